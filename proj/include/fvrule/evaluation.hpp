#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fvrule/dataset.hpp"
#include "fvrule/equivalence.hpp"
#include "fvrule/errors.hpp"
#include "fvrule/lexicon.hpp"
#include "fvrule/parallel.hpp"
#include "fvrule/sva_parser.hpp"

namespace fvrule {

// ---- BLEU ------------------------------------------------------------------

// Words and operators become separate tokens: "req|->gnt" is three tokens.
inline std::vector<std::string> bleu_tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (text::is_space(c)) {
      ++i;
      continue;
    }
    if (text::is_word_char(c) || c == '\'') {
      std::size_t j = i + 1;
      while (j < s.size() && (text::is_word_char(s[j]) || s[j] == '\'')) ++j;
      out.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    std::size_t len = 1;
    for (const auto& p : sva::detail::punctuators()) {
      if (s.compare(i, p.size(), p) == 0) {
        len = p.size();
        break;
      }
    }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

// Sentence BLEU with n-grams up to 4 and uniform weights. An order with no
// matching n-gram scores 1 / (candidate n-grams + 1) instead of 0. Brevity
// penalty exp(1 - r/c) when the candidate is shorter. Empty candidate: 0.
inline double bleu(std::string_view candidate, std::string_view reference) {
  const auto c = bleu_tokenize(candidate);
  const auto r = bleu_tokenize(reference);
  if (c.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, int> ref_counts, cand_counts;
    for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[{r.begin() + i, r.begin() + i + n}];
    for (std::size_t i = 0; i + n <= c.size(); ++i) ++cand_counts[{c.begin() + i, c.begin() + i + n}];
    const double total = c.size() >= n ? static_cast<double>(c.size() - n + 1) : 0.0;
    double matches = 0.0;
    for (const auto& [gram, cnt] : cand_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches += std::min(cnt, it->second);
    }
    const double p = matches > 0.0 ? matches / total : 1.0 / (total + 1.0);
    log_sum += std::log(p) / 4.0;
  }
  const double cl = static_cast<double>(c.size());
  const double rl = static_cast<double>(r.size());
  const double bp = cl < rl ? std::exp(1.0 - rl / cl) : 1.0;
  return std::min(1.0, bp * std::exp(log_sum));
}

// ---- per-item and aggregate metrics -----------------------------------------

struct ItemEval {
  std::string id;
  std::string golden;
  std::string generated;
  double bleu = 0.0;
  int syn = 0;
  std::optional<int> func;          // nullopt: skipped
  std::optional<int> relaxed_func;  // nullopt: skipped
  std::string verdict;
  std::string note;
};

struct EvalReport {
  std::vector<ItemEval> items;
  double bleu = 0.0;  // means over all items
  double syn = 0.0;
  double func = 0.0;  // means over non-skipped items
  double relaxed_func = 0.0;
  std::size_t scored = 0;
  std::size_t skipped = 0;
  std::vector<RecordError> errors;  // MissingPrediction, one per id
  std::array<std::size_t, kAllCategories.size()> taxonomy{};
  std::size_t functional_failures = 0;

  std::size_t taxonomy_total() const {
    std::size_t s = 0;
    for (auto v : taxonomy) s += v;
    return s;
  }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& it : items) {
      arr.push_back({{"id", it.id},
                     {"bleu", it.bleu},
                     {"syn", it.syn},
                     {"func", it.func ? nlohmann::json(*it.func) : nlohmann::json("skipped")},
                     {"relaxed_func", it.relaxed_func ? nlohmann::json(*it.relaxed_func) : nlohmann::json("skipped")},
                     {"verdict", it.verdict},
                     {"note", it.note}});
    }
    nlohmann::json tax = nlohmann::json::object();
    for (auto c : kAllCategories) tax[category_name(c)] = taxonomy[category_rank(c)];
    auto errs = nlohmann::json::array();
    for (const auto& e : errors) errs.push_back({{"code", error_code_name(e.code)}, {"reason", e.reason}});
    return {{"items", arr},
            {"aggregate",
             {{"bleu", bleu}, {"syn", syn}, {"func", func}, {"relaxed_func", relaxed_func},
              {"scored", scored}, {"skipped", skipped}, {"functional_failures", functional_failures}}},
            {"taxonomy", tax},
            {"errors", errs}};
  }

  // Reads back the taxonomy counts of a saved report.
  static std::array<std::size_t, kAllCategories.size()> taxonomy_from_json(const nlohmann::json& j) {
    std::array<std::size_t, kAllCategories.size()> t{};
    const auto& tax = j.at("taxonomy");
    for (auto c : kAllCategories) t[category_rank(c)] = tax.value(category_name(c), std::size_t{0});
    return t;
  }

  std::string items_csv() const {
    std::ostringstream out;
    out << "id,bleu,syn,func,relaxed_func,verdict\n";
    char buf[32];
    for (const auto& it : items) {
      std::snprintf(buf, sizeof(buf), "%.6f", it.bleu);
      out << it.id << ',' << buf << ',' << it.syn << ','
          << (it.func ? std::to_string(*it.func) : "skipped") << ','
          << (it.relaxed_func ? std::to_string(*it.relaxed_func) : "skipped") << ',' << it.verdict << '\n';
    }
    return out.str();
  }
};

// One item: syntax gate, then the oracle. Unsyntactic output scores 0 on
// both functional metrics; undecidable comparisons are skipped.
inline ItemEval evaluate_item(const NlSvaPair& item, const std::string& generated,
                              const sva::EquivalenceOracle& oracle) {
  ItemEval e;
  e.id = item.id;
  e.golden = item.golden_sva;
  e.generated = generated;
  e.bleu = bleu(generated, item.golden_sva);
  const auto check = sva::syntax_check(generated);
  e.syn = check.ok ? 1 : 0;
  if (!check.ok) {
    e.func = 0;
    e.relaxed_func = 0;
    e.note = check.message;
    return e;
  }
  try {
    const auto v = oracle.compare(item.golden_sva, generated);
    e.verdict = sva::verdict_name(v.verdict);
    e.func = v.verdict == sva::Verdict::Equivalent ? 1 : 0;
    e.relaxed_func =
        (v.verdict == sva::Verdict::Equivalent || v.verdict == sva::Verdict::GoldenImpliesGenerated) ? 1 : 0;
  } catch (const Error& err) {
    switch (err.code()) {
      case ErrorCode::UnsupportedConstruct:
      case ErrorCode::BudgetExceeded:
      case ErrorCode::Syntax:  // golden side; the generated side passed above
        e.note = err.what();
        return e;
      default:
        throw;
    }
  }
  return e;
}

inline void add_taxonomy(EvalReport& report) {
  report.taxonomy = {};
  report.functional_failures = 0;
  for (const auto& it : report.items) {
    if (it.syn != 1 || !it.func || *it.func != 0) continue;
    ++report.functional_failures;
    for (auto c : classify_mismatch(extract_operators(it.generated), extract_operators(it.golden)))
      ++report.taxonomy[category_rank(c)];
  }
}

// Predictions are keyed by dataset id. Items without a prediction are
// reported in `errors` and left out of the metrics.
inline EvalReport evaluate(const std::vector<NlSvaPair>& dataset,
                           const std::map<std::string, std::string>& predictions,
                           const sva::EquivalenceOracle& oracle, std::size_t jobs = 1) {
  EvalReport report;
  std::vector<const NlSvaPair*> present;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (predictions.count(dataset[i].id)) {
      present.push_back(&dataset[i]);
    } else {
      report.errors.push_back({i + 1, ErrorCode::MissingPrediction, "no prediction for '" + dataset[i].id + "'"});
    }
  }
  report.items.resize(present.size());
  parallel_for(present.size(), jobs, [&](std::size_t i) {
    report.items[i] = evaluate_item(*present[i], predictions.at(present[i]->id), oracle);
  });

  double bleu_sum = 0.0, syn_sum = 0.0, func_sum = 0.0, rfunc_sum = 0.0;
  for (const auto& it : report.items) {
    bleu_sum += it.bleu;
    syn_sum += it.syn;
    if (!it.func) {
      ++report.skipped;
      continue;
    }
    ++report.scored;
    func_sum += *it.func;
    rfunc_sum += *it.relaxed_func;
  }
  if (!report.items.empty()) {
    report.bleu = bleu_sum / static_cast<double>(report.items.size());
    report.syn = syn_sum / static_cast<double>(report.items.size());
  }
  if (report.scored > 0) {
    report.func = func_sum / static_cast<double>(report.scored);
    report.relaxed_func = rfunc_sum / static_cast<double>(report.scored);
  }
  add_taxonomy(report);
  return report;
}

// ---- failure taxonomy tables -----------------------------------------------

using TaxonomyCounts = std::array<std::size_t, kAllCategories.size()>;

// "-75%" style relative change; "--" when the baseline count is zero.
inline std::string format_reduction(std::size_t base, std::size_t ours) {
  if (base == 0) return "--";
  const double pct = (static_cast<double>(base) - static_cast<double>(ours)) / static_cast<double>(base) * 100.0;
  const long r = std::lround(pct);
  if (r == 0) return "0%";
  return (r > 0 ? "-" : "+") + std::to_string(std::labs(r)) + "%";
}

struct ReductionRow {
  std::string label;
  std::size_t base = 0;
  std::size_t ours = 0;
  std::string reduction;
};

// One row per category in rank order plus a "Total Failures" row summing
// the category counts.
inline std::vector<ReductionRow> reduction_table(const TaxonomyCounts& base, const TaxonomyCounts& ours) {
  std::vector<ReductionRow> rows;
  std::size_t tb = 0, to = 0;
  for (auto c : kAllCategories) {
    const auto r = category_rank(c);
    rows.push_back({category_label(c), base[r], ours[r], format_reduction(base[r], ours[r])});
    tb += base[r];
    to += ours[r];
  }
  rows.push_back({"Total Failures", tb, to, format_reduction(tb, to)});
  return rows;
}

inline std::string taxonomy_csv(const TaxonomyCounts& counts) {
  std::string out = "category,failures\n";
  std::size_t total = 0;
  for (auto c : kAllCategories) {
    out += std::string(category_label(c)) + "," + std::to_string(counts[category_rank(c)]) + "\n";
    total += counts[category_rank(c)];
  }
  return out + "Total Failures," + std::to_string(total) + "\n";
}

inline std::string reduction_csv(const std::vector<ReductionRow>& rows) {
  std::string out = "category,base,ours,reduction\n";
  for (const auto& r : rows)
    out += r.label + "," + std::to_string(r.base) + "," + std::to_string(r.ours) + "," + r.reduction + "\n";
  return out;
}

}  // namespace fvrule
