#pragma once

// Test-time pipeline: initial generation, tree retrieval by background
// similarity, hybrid trace scoring, signal masking, rule adaptation and
// rule-guided regeneration.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvrule/errors.hpp"
#include "fvrule/lexicon.hpp"
#include "fvrule/llm.hpp"
#include "fvrule/optree.hpp"
#include "fvrule/parallel.hpp"
#include "fvrule/similarity.hpp"

namespace fvrule {

struct RetrievalConfig {
  int k_trees = 3;
  int k_traces = 3;
  double alpha = 0.5;
  std::string similarity = "lexical";  // or "embedding"
  std::size_t jobs = 1;                // concurrent judge calls per item

  void validate() const {
    if (k_trees < 1 || k_traces < 1) throw Error(ErrorCode::Config, "k_trees and k_traces must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::Config, "alpha must be in [0, 1]");
  }
};

struct RetrievedTree {
  const OpTree* tree = nullptr;
  double score = 0.0;
};

// Top-k trees by similarity of their background specification to the
// query; ties go to the smaller tree id.
inline std::vector<RetrievedTree> retrieve_trees(std::string_view nl_spec, const std::vector<OpTree>& library,
                                                 int k, const TextSimilarity& sim) {
  std::vector<RetrievedTree> all;
  all.reserve(library.size());
  for (const auto& t : library) all.push_back({&t, sim.similarity(nl_spec, t.background.nl_spec)});
  std::stable_sort(all.begin(), all.end(), [](const RetrievedTree& a, const RetrievedTree& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tree->id < b.tree->id;
  });
  if (all.size() > static_cast<std::size_t>(std::max(k, 0))) all.resize(static_cast<std::size_t>(k));
  return all;
}

inline std::vector<RetrievedTree> retrieve_trees(std::string_view nl_spec, const std::vector<OpTree>& library,
                                                 int k) {
  std::vector<std::string> corpus;
  for (const auto& t : library) corpus.push_back(t.background.nl_spec);
  return retrieve_trees(nl_spec, library, k, TfIdfSimilarity(corpus));
}

// Gated convex combination: zero whenever either score is zero.
inline double hybrid_score(double s_op, double s_llm, double alpha) {
  if (s_op == 0.0 || s_llm == 0.0) return 0.0;
  return alpha * s_op + (1.0 - alpha) * s_llm;
}

struct ScoredTrace {
  ReasoningTrace trace;
  double s_op = 0.0;
  double s_llm = 0.0;
  double s_hybrid = 0.0;
  std::string judge_error;  // set when the judge failed and s_llm fell back to 0
};

inline double trace_operator_score(const ReasoningTrace& trace, std::string_view initial_sva) {
  return operator_alignment_score(extract_operators(initial_sva), extract_operators(trace.flattened_text));
}

inline ScoredTrace score_trace(const LlmGateway& gw, const ReasoningTrace& trace, std::string_view initial_sva,
                               std::string_view nl_spec, const RetrievalConfig& cfg) {
  ScoredTrace st;
  st.trace = trace;
  st.s_op = trace_operator_score(trace, initial_sva);
  try {
    st.s_llm = judge_applicability(gw, trace, nl_spec);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparseableJudgment && e.code() != ErrorCode::Provider) throw;
    st.s_llm = 0.0;
    st.judge_error = e.what();
  }
  st.s_hybrid = hybrid_score(st.s_op, st.s_llm, cfg.alpha);
  return st;
}

namespace detail {

inline std::string mask_words(std::string_view s, const std::map<std::string, std::string>& repl) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (text::is_word_char(s[i])) {
      std::size_t j = i;
      while (j < s.size() && text::is_word_char(s[j])) ++j;
      std::string w(s.substr(i, j - i));
      auto it = repl.find(w);
      out += it == repl.end() ? w : it->second;
      i = j;
    } else {
      out += s[i++];
    }
  }
  return out;
}

}  // namespace detail

// Replaces the trace's instance-specific signal names with <signal_1>,
// <signal_2>, ... numbered by first occurrence. Names in known_signals (the
// target design) are left alone. Keywords, operators and numbers are never
// signal names, so they are never masked.
inline ReasoningTrace abstract_signals(const ReasoningTrace& trace,
                                       const std::optional<std::vector<std::string>>& known_signals = std::nullopt) {
  std::set<std::string> candidates(trace.instance_signals.begin(), trace.instance_signals.end());
  if (known_signals)
    for (const auto& k : *known_signals) candidates.erase(k);

  std::map<std::string, std::string> repl;
  auto number = [&](std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
      if (!text::is_word_char(s[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < s.size() && text::is_word_char(s[j])) ++j;
      std::string w(s.substr(i, j - i));
      if (candidates.count(w) && !repl.count(w))
        repl[w] = "<signal_" + std::to_string(repl.size() + 1) + ">";
      i = j;
    }
  };
  number(trace.flattened_text);
  number(trace.rule.directive);

  ReasoningTrace out = trace;
  out.flattened_text = detail::mask_words(trace.flattened_text, repl);
  out.rule.directive = detail::mask_words(trace.rule.directive, repl);
  out.rule.abstracted = true;
  return out;
}

struct InferenceResult {
  std::string initial_sva;
  std::string final_sva;
  std::vector<std::pair<std::string, double>> retrieved;  // tree id, similarity
  std::vector<ScoredTrace> scored;                        // whole pool, pool order
  std::vector<std::size_t> selected;                      // indices into scored
  std::vector<OpRule> adapted_rules;
  bool no_applicable_rules = false;
  std::vector<std::string> warnings;

  nlohmann::json audit_json() const {
    auto pool = nlohmann::json::array();
    for (const auto& s : scored) {
      nlohmann::json j = {{"tree_id", s.trace.tree_id},
                          {"node_path", s.trace.node_path},
                          {"s_op", s.s_op},
                          {"s_llm", s.s_llm},
                          {"s_hybrid", s.s_hybrid}};
      if (!s.judge_error.empty()) j["judge_error"] = s.judge_error;
      pool.push_back(j);
    }
    auto sel = nlohmann::json::array();
    for (auto i : selected) sel.push_back(scored[i].trace.tree_id + ":" + text::join(scored[i].trace.node_path, "/"));
    auto rules = nlohmann::json::array();
    for (const auto& r : adapted_rules) rules.push_back(r.directive);
    auto ret = nlohmann::json::array();
    for (const auto& [id, s] : retrieved) ret.push_back({{"tree_id", id}, {"similarity", s}});
    return {{"retrieved", ret},          {"scores", pool},
            {"selected", sel},           {"adapted_rules", rules},
            {"no_applicable_rules", no_applicable_rules}, {"warnings", warnings}};
  }
};

namespace detail {

// Re-throws library errors with the pipeline stage prefixed.
template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ProviderError& e) {
    throw ProviderError(std::string(stage) + ": " + e.what(), e.retryable());
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.what());
  }
}

}  // namespace detail

inline InferenceResult infer(const LlmGateway& gw, std::string_view nl_spec,
                             const std::vector<SignalDecl>& design_context, const std::vector<OpTree>& library,
                             const RetrievalConfig& cfg, const TextSimilarity* sim = nullptr) {
  cfg.validate();
  InferenceResult r;
  r.initial_sva = detail::staged("initial generation", [&] { return generate_sva(gw, nl_spec, design_context, {}); });
  r.final_sva = r.initial_sva;

  if (library.empty()) {
    r.no_applicable_rules = true;
    r.warnings.push_back("empty tree library; generating without rules");
    return r;
  }
  const auto trees = sim ? retrieve_trees(nl_spec, library, cfg.k_trees, *sim)
                         : retrieve_trees(nl_spec, library, cfg.k_trees);
  std::vector<ReasoningTrace> pool;
  for (const auto& t : trees) {
    r.retrieved.emplace_back(t.tree->id, t.score);
    for (auto& tr : detail::staged("trace extraction", [&] { return extract_traces(*t.tree); }))
      pool.push_back(std::move(tr));
  }

  r.scored.resize(pool.size());
  detail::staged("judging", [&] {
    parallel_for(pool.size(), cfg.jobs,
                 [&](std::size_t i) { r.scored[i] = score_trace(gw, pool[i], r.initial_sva, nl_spec, cfg); });
    return 0;
  });
  for (const auto& s : r.scored)
    if (!s.judge_error.empty()) r.warnings.push_back("judge failed for " + s.trace.tree_id + ": " + s.judge_error);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < r.scored.size(); ++i)
    if (r.scored[i].s_hybrid > 0.0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (r.scored[a].s_hybrid != r.scored[b].s_hybrid) return r.scored[a].s_hybrid > r.scored[b].s_hybrid;
    if (r.scored[a].trace.tree_id != r.scored[b].trace.tree_id)
      return r.scored[a].trace.tree_id < r.scored[b].trace.tree_id;
    return a < b;
  });
  if (order.size() > static_cast<std::size_t>(cfg.k_traces)) order.resize(static_cast<std::size_t>(cfg.k_traces));
  r.selected = order;
  if (order.empty()) {
    r.no_applicable_rules = true;
    r.warnings.push_back("no trace passed the hybrid gate");
    return r;
  }

  std::optional<std::vector<std::string>> known;
  if (!design_context.empty()) {
    known.emplace();
    for (const auto& d : design_context) known->push_back(d.name);
  }
  std::vector<ReasoningTrace> masked;
  for (auto i : order) masked.push_back(abstract_signals(r.scored[i].trace, known));

  try {
    r.adapted_rules = detail::staged("rule adaptation", [&] { return adapt_rules(gw, nl_spec, design_context, masked); });
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyRuleSet) throw;
    r.no_applicable_rules = true;
    r.warnings.push_back(e.what());
    return r;
  }
  r.final_sva = detail::staged("final generation",
                               [&] { return generate_sva(gw, nl_spec, design_context, r.adapted_rules); });
  return r;
}

}  // namespace fvrule
