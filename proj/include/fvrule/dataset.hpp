#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fvrule/errors.hpp"
#include "fvrule/rng.hpp"
#include "fvrule/text.hpp"

namespace fvrule {

struct SignalDecl {
  std::string name;
  int width = 1;

  friend bool operator==(const SignalDecl&, const SignalDecl&) = default;
};

inline nlohmann::json to_json(const std::vector<SignalDecl>& ctx) {
  auto arr = nlohmann::json::array();
  for (const auto& s : ctx) arr.push_back({{"name", s.name}, {"width", s.width}});
  return arr;
}

// Accepts [{"name":..,"width":..}] or bare names.
inline std::vector<SignalDecl> signals_from_json(const nlohmann::json& j) {
  std::vector<SignalDecl> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw Error(ErrorCode::Schema, "design_context must be an array");
  for (const auto& e : j) {
    if (e.is_string()) {
      out.push_back({e.get<std::string>(), 1});
    } else if (e.is_object() && e.contains("name") && e["name"].is_string()) {
      const int w = e.value("width", 1);
      if (w < 1) throw Error(ErrorCode::Schema, "signal width must be >= 1");
      out.push_back({e["name"].get<std::string>(), w});
    } else {
      throw Error(ErrorCode::Schema, "design_context entries need a string 'name'");
    }
  }
  return out;
}

inline std::string describe(const std::vector<SignalDecl>& ctx) {
  std::vector<std::string> parts;
  for (const auto& s : ctx)
    parts.push_back(s.width == 1 ? s.name : s.name + "[" + std::to_string(s.width - 1) + ":0]");
  return text::join(parts, ", ");
}

struct NlSvaPair {
  std::string id;
  std::string nl;
  std::string golden_sva;
  std::vector<SignalDecl> design_context;  // may be empty
  std::string source;

  nlohmann::json to_json() const {
    return {{"schema_version", 1},
            {"id", id},
            {"nl", nl},
            {"golden_sva", golden_sva},
            {"design_context", fvrule::to_json(design_context)},
            {"source", source}};
  }

  static NlSvaPair from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Schema, "record is not a JSON object");
    if (j.contains("schema_version") && j["schema_version"] != 1)
      throw Error(ErrorCode::Schema, "unsupported schema_version");
    auto req = [&](const char* key) {
      if (!j.contains(key) || !j[key].is_string())
        throw Error(ErrorCode::Schema, std::string("missing string field '") + key + "'");
      auto v = j[key].get<std::string>();
      if (text::trim(v).empty())
        throw Error(ErrorCode::Schema, std::string("field '") + key + "' is empty");
      return v;
    };
    NlSvaPair p;
    p.id = req("id");
    p.nl = req("nl");
    p.golden_sva = req("golden_sva");
    if (j.contains("design_context")) p.design_context = signals_from_json(j["design_context"]);
    p.source = j.value("source", std::string());
    return p;
  }
};

struct LoadedDataset {
  std::vector<NlSvaPair> items;
  std::vector<RecordError> errors;  // line numbers are 1-based
};

inline LoadedDataset parse_dataset(std::string_view content) {
  LoadedDataset out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto p = NlSvaPair::from_json(nlohmann::json::parse(line));
      if (!seen.insert(p.id).second) {
        out.errors.push_back({line_no, ErrorCode::DuplicateId, "duplicate id '" + p.id + "'"});
        continue;
      }
      out.items.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({line_no, ErrorCode::Schema, e.what()});
    } catch (const Error& e) {
      out.errors.push_back({line_no, e.code(), e.what()});
    }
  }
  return out;
}

inline LoadedDataset load_dataset(const std::string& path) {
  return parse_dataset(text::read_file(path));
}

inline std::string dump_dataset(const std::vector<NlSvaPair>& items) {
  std::string out;
  for (const auto& p : items) out += p.to_json().dump() + "\n";
  return out;
}

// Seeded shuffle, then the first round(fraction * N) items train.
inline std::pair<std::vector<NlSvaPair>, std::vector<NlSvaPair>> split(
    std::vector<NlSvaPair> items, double train_fraction = 0.8, std::uint64_t seed = 0) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::Precondition, "train_fraction must be in (0, 1)");
  SeededRng rng(seed);
  rng.shuffle(items);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(items.size())));
  std::vector<NlSvaPair> train(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<NlSvaPair> test(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  return {std::move(train), std::move(test)};
}

}  // namespace fvrule
