#pragma once

// Operator lexicon for SystemVerilog assertions.
//
// Every assertion or free-text rule is projected onto a set of canonical
// operator tokens drawn from six categories. Parametrised operators are
// reduced to a shape so that `##2` and `##5` are the same operator:
//
//   ##<n>, ##<param>      -> "##m"
//   ##[m:n], [m:n]        -> "[m:n]"
//   !=                    -> "!=="
//   ===                   -> "=="
//   @(posedge x)          -> "@(posedge)"   (likewise negedge, bare "@()")
//   disable iff           -> "disable iff"
//
// Scanning is longest-match-first over an ordered token table, so `|=>`
// is never read as `|` followed by `=>`. Comments and string literals are
// skipped. The table is exportable as `{ "token": "Category" }` JSON and
// can be extended or re-categorised from the same format.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fvrule/errors.hpp"
#include "fvrule/text.hpp"

namespace fvrule {

enum class OperatorCategory : std::uint8_t {
  TemporalImplication = 0,
  TemporalDelay,
  TemporalSampling,
  TemporalLiveness,
  CombinationalLogic,
  Miscellaneous,
};

// Fixed ranking used wherever categories are listed.
inline constexpr std::array<OperatorCategory, 6> kAllCategories = {
    OperatorCategory::TemporalImplication, OperatorCategory::TemporalDelay,
    OperatorCategory::TemporalSampling,    OperatorCategory::TemporalLiveness,
    OperatorCategory::CombinationalLogic,  OperatorCategory::Miscellaneous,
};

inline const char* category_name(OperatorCategory c) {
  switch (c) {
    case OperatorCategory::TemporalImplication: return "TemporalImplication";
    case OperatorCategory::TemporalDelay: return "TemporalDelay";
    case OperatorCategory::TemporalSampling: return "TemporalSampling";
    case OperatorCategory::TemporalLiveness: return "TemporalLiveness";
    case OperatorCategory::CombinationalLogic: return "CombinationalLogic";
    case OperatorCategory::Miscellaneous: return "Miscellaneous";
  }
  return "Miscellaneous";
}

// Short row labels for failure tables.
inline const char* category_label(OperatorCategory c) {
  switch (c) {
    case OperatorCategory::TemporalImplication: return "Temp. Impl.";
    case OperatorCategory::TemporalDelay: return "Temp. Delay";
    case OperatorCategory::TemporalSampling: return "Temp. Sampl.";
    case OperatorCategory::TemporalLiveness: return "Temp. Live.";
    case OperatorCategory::CombinationalLogic: return "Comb. Logic";
    case OperatorCategory::Miscellaneous: return "Miscellaneous";
  }
  return "Miscellaneous";
}

inline std::optional<OperatorCategory> parse_category(std::string_view name) {
  for (auto c : kAllCategories)
    if (name == category_name(c)) return c;
  return std::nullopt;
}

inline std::size_t category_rank(OperatorCategory c) {
  return static_cast<std::size_t>(c);
}

struct Operator {
  std::string token;
  OperatorCategory category = OperatorCategory::Miscellaneous;

  friend bool operator==(const Operator&, const Operator&) = default;
};

// Distinct operators ordered by canonical token.
class OperatorSet {
 public:
  using const_iterator = std::vector<Operator>::const_iterator;

  OperatorSet() = default;
  OperatorSet(std::initializer_list<Operator> ops) {
    for (const auto& op : ops) insert(op);
  }

  // Returns false when the token is already present.
  bool insert(Operator op) {
    auto it = std::lower_bound(ops_.begin(), ops_.end(), op.token,
                               [](const Operator& a, const std::string& t) { return a.token < t; });
    if (it != ops_.end() && it->token == op.token) return false;
    ops_.insert(it, std::move(op));
    return true;
  }

  bool contains(std::string_view token) const {
    auto it = std::lower_bound(ops_.begin(), ops_.end(), token,
                               [](const Operator& a, std::string_view t) { return a.token < t; });
    return it != ops_.end() && it->token == token;
  }

  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }
  const_iterator begin() const { return ops_.begin(); }
  const_iterator end() const { return ops_.end(); }

  std::vector<std::string> tokens() const {
    std::vector<std::string> out;
    out.reserve(ops_.size());
    for (const auto& op : ops_) out.push_back(op.token);
    return out;
  }

  friend bool operator==(const OperatorSet&, const OperatorSet&) = default;

 private:
  std::vector<Operator> ops_;
};

// One operator occurrence found by the scanner.
struct OperatorOccurrence {
  std::size_t offset = 0;
  std::size_t length = 0;
  Operator op;
};

class Lexicon {
 public:
  static const Lexicon& builtin() {
    static const Lexicon instance = make_builtin();
    return instance;
  }

  // Starts from the built-in table and applies every `token: category`
  // pair: known tokens are re-categorised, unknown ones become new literal
  // operators matched verbatim.
  static Lexicon from_json(const nlohmann::json& doc) {
    if (!doc.is_object())
      throw Error(ErrorCode::Schema, "operator table must be a JSON object");
    Lexicon lex = make_builtin();
    for (const auto& [token, value] : doc.items()) {
      if (!value.is_string())
        throw Error(ErrorCode::Schema, "category of '" + token + "' must be a string");
      auto cat = parse_category(value.get<std::string>());
      if (!cat)
        throw Error(ErrorCode::Schema, "unknown category '" + value.get<std::string>() +
                                           "' for token '" + token + "'");
      if (text::trim(token).empty())
        throw Error(ErrorCode::Schema, "empty operator token");
      lex.set(token, *cat);
    }
    return lex;
  }

  nlohmann::json to_json() const {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [token, cat] : table_) doc[token] = category_name(cat);
    return doc;
  }

  std::optional<OperatorCategory> category_of(std::string_view canonical) const {
    auto it = table_.find(std::string(canonical));
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<OperatorOccurrence> scan(std::string_view src) const {
    std::vector<OperatorOccurrence> out;
    std::size_t i = 0;
    const std::size_t n = src.size();
    auto emit = [&](std::size_t start, std::size_t end, const std::string& canonical) {
      auto cat = category_of(canonical);
      if (cat) out.push_back({start, end - start, Operator{canonical, *cat}});
    };
    while (i < n) {
      const char c = src[i];
      if (text::is_space(c)) {
        ++i;
        continue;
      }
      if (c == '/' && i + 1 < n && src[i + 1] == '/') {
        while (i < n && src[i] != '\n') ++i;
        continue;
      }
      if (c == '/' && i + 1 < n && src[i + 1] == '*') {
        auto close = src.find("*/", i + 2);
        i = close == std::string_view::npos ? n : close + 2;
        continue;
      }
      if (c == '"') {
        ++i;
        while (i < n && src[i] != '"') i += (src[i] == '\\' && i + 1 < n) ? 2 : 1;
        if (i < n) ++i;
        continue;
      }
      if (c == '#' && i + 1 < n && src[i + 1] == '#') {
        std::size_t j = i + 2;
        std::size_t k = j;
        while (k < n && (src[k] == ' ' || src[k] == '\t')) ++k;
        if (k < n && src[k] == '[') {
          auto close = src.find(']', k);
          std::size_t end = close == std::string_view::npos ? n : close + 1;
          emit(i, end, "[m:n]");
          i = end;
        } else {
          while (j < n && text::is_word_char(src[j])) ++j;
          emit(i, j, "##m");
          i = j;
        }
        continue;
      }
      if (c == '[') {
        if (auto end = match_range(src, i)) {
          emit(i, *end, "[m:n]");
          i = *end;
          continue;
        }
        ++i;
        continue;
      }
      if (c == '@') {
        std::size_t j = skip_ws(src, i + 1);
        if (j < n && src[j] == '(') {
          std::size_t k = skip_ws(src, j + 1);
          std::size_t w = k;
          while (w < n && text::is_word_char(src[w])) ++w;
          auto word = src.substr(k, w - k);
          if (word == "posedge" || word == "negedge") {
            emit(i, w, "@(" + std::string(word) + ")");
            i = w;
          } else {
            emit(i, j + 1, "@()");
            i = j + 1;
          }
          continue;
        }
        ++i;
        continue;
      }
      if (text::is_word_char(c)) {
        std::size_t j = i;
        while (j < n && text::is_word_char(src[j])) ++j;
        auto word = src.substr(i, j - i);
        if (word == "disable") {
          std::size_t k = skip_ws(src, j);
          std::size_t w = k;
          while (w < n && text::is_word_char(src[w])) ++w;
          if (src.substr(k, w - k) == "iff") {
            emit(i, w, "disable iff");
            i = w;
            continue;
          }
        }
        if (auto it = word_literals_.find(std::string(word)); it != word_literals_.end())
          emit(i, j, it->second);
        i = j;
        continue;
      }
      // Symbolic literals, longest first.
      bool matched = false;
      for (const auto& [spelling, canonical] : symbol_literals_) {
        if (src.compare(i, spelling.size(), spelling) == 0) {
          emit(i, i + spelling.size(), canonical);
          i += spelling.size();
          matched = true;
          break;
        }
      }
      if (!matched) ++i;
    }
    return out;
  }

  OperatorSet extract(std::string_view src) const {
    OperatorSet set;
    for (auto& occ : scan(src)) set.insert(std::move(occ.op));
    return set;
  }

  // Canonical form of a single operator spelling, or nullopt if the
  // spelling is not an operator.
  std::optional<Operator> canonicalize(std::string_view spelling) const {
    auto occ = scan(spelling);
    if (occ.size() != 1) return std::nullopt;
    return occ.front().op;
  }

 private:
  static Lexicon make_builtin() {
    Lexicon lex;
    using C = OperatorCategory;
    for (const char* t : {"|->", "|=>"}) lex.set(t, C::TemporalImplication);
    for (const char* t : {"##m", "[m:n]"}) lex.set(t, C::TemporalDelay);
    for (const char* t : {"$past", "$rose", "$fell", "$stable"}) lex.set(t, C::TemporalSampling);
    for (const char* t : {"s_eventually", "s_always", "strong"}) lex.set(t, C::TemporalLiveness);
    for (const char* t : {"&&", "||", "!", "==", "!==", "^"}) lex.set(t, C::CombinationalLogic);
    for (const char* t : {"@(posedge)", "@(negedge)", "@()", "disable iff"})
      lex.set(t, C::Miscellaneous);
    lex.add_alias("!=", "!==");
    lex.add_alias("===", "==");
    return lex;
  }

  static bool is_shaped(const std::string& token) {
    return token == "##m" || token == "[m:n]" || token == "disable iff" ||
           token.rfind("@(", 0) == 0;
  }

  void set(const std::string& token, OperatorCategory cat) {
    table_[token] = cat;
    if (!is_shaped(token)) add_literal(token, token);
  }

  void add_alias(const std::string& spelling, const std::string& canonical) {
    add_literal(spelling, canonical);
  }

  void add_literal(const std::string& spelling, const std::string& canonical) {
    if (text::is_word_char(spelling.front())) {
      word_literals_[spelling] = canonical;
      return;
    }
    auto it = std::find_if(symbol_literals_.begin(), symbol_literals_.end(),
                           [&](const auto& p) { return p.first == spelling; });
    if (it != symbol_literals_.end()) {
      it->second = canonical;
    } else {
      symbol_literals_.emplace_back(spelling, canonical);
    }
    std::stable_sort(symbol_literals_.begin(), symbol_literals_.end(),
                     [](const auto& a, const auto& b) {
                       if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
                       return a.first < b.first;
                     });
  }

  static std::size_t skip_ws(std::string_view s, std::size_t i) {
    while (i < s.size() && text::is_space(s[i])) ++i;
    return i;
  }

  // `[ a : b ]` where a is a number or identifier and b a number,
  // identifier or `$`. Returns the end offset.
  static std::optional<std::size_t> match_range(std::string_view s, std::size_t i) {
    std::size_t j = skip_ws(s, i + 1);
    std::size_t w = j;
    while (w < s.size() && text::is_word_char(s[w]) && s[w] != '$') ++w;
    if (w == j) return std::nullopt;
    j = skip_ws(s, w);
    if (j >= s.size() || s[j] != ':') return std::nullopt;
    j = skip_ws(s, j + 1);
    w = j;
    while (w < s.size() && text::is_word_char(s[w])) ++w;
    if (w == j) return std::nullopt;
    j = skip_ws(s, w);
    if (j >= s.size() || s[j] != ']') return std::nullopt;
    return j + 1;
  }

  std::map<std::string, OperatorCategory> table_;
  std::map<std::string, std::string> word_literals_;
  std::vector<std::pair<std::string, std::string>> symbol_literals_;
};

// Projection of arbitrary text onto the operator universe.
inline OperatorSet extract_operators(std::string_view text,
                                     const Lexicon& lex = Lexicon::builtin()) {
  return lex.extract(text);
}

inline double operator_similarity(const Operator& u, const Operator& v) {
  if (u.token == v.token) return 1.0;
  if (u.category == v.category) return 0.5;
  return 0.0;
}

// Soft Jaccard alignment of the operators of an initial assertion against
// those of a reasoning trace. Two empty sets score 1.0.
inline double operator_alignment_score(const OperatorSet& init, const OperatorSet& trace) {
  if (init.empty() && trace.empty()) return 1.0;
  double numerator = 0.0;
  for (const auto& u : init) {
    double best = 0.0;
    for (const auto& v : trace) best = std::max(best, operator_similarity(u, v));
    numerator += best;
  }
  std::size_t union_size = trace.size();
  for (const auto& u : init)
    if (!trace.contains(u.token)) ++union_size;
  return numerator / static_cast<double>(union_size);
}

// Categories of operators the generated assertion uses but the golden one
// does not, in category rank order. A mismatch confined to clocking/reset
// constructs (in either direction) is reported as Miscellaneous.
inline std::vector<OperatorCategory> classify_mismatch(const OperatorSet& generated,
                                                       const OperatorSet& golden) {
  std::array<bool, kAllCategories.size()> hit{};
  for (const auto& op : generated)
    if (!golden.contains(op.token)) hit[category_rank(op.category)] = true;

  bool any_diff = false;
  bool only_misc = true;
  auto visit = [&](const OperatorSet& a, const OperatorSet& b) {
    for (const auto& op : a) {
      if (b.contains(op.token)) continue;
      any_diff = true;
      if (op.category != OperatorCategory::Miscellaneous) only_misc = false;
    }
  };
  visit(generated, golden);
  visit(golden, generated);
  if (any_diff && only_misc) hit[category_rank(OperatorCategory::Miscellaneous)] = true;

  std::vector<OperatorCategory> out;
  for (auto c : kAllCategories)
    if (hit[category_rank(c)]) out.push_back(c);
  return out;
}

}  // namespace fvrule
