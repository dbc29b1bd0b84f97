#pragma once

// Training loop. Per iteration, every unfixed item is regenerated with the
// rules of its own earlier trees. A mismatch against the golden assertion
// triggers a new reasoning tree; the tree is committed as valid only when
// regenerating with its rules yields an equivalent assertion.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvrule/dataset.hpp"
#include "fvrule/equivalence.hpp"
#include "fvrule/errors.hpp"
#include "fvrule/lexicon.hpp"
#include "fvrule/llm.hpp"
#include "fvrule/optree.hpp"
#include "fvrule/parallel.hpp"
#include "fvrule/rng.hpp"
#include "fvrule/tree_library.hpp"

namespace fvrule {

struct TrainConfig {
  int max_iterations = 25;
  int questions_per_layer = 3;
  double diversity_threshold = 0.8;
  std::string oracle = "bounded";  // or "external"
  std::uint64_t rng_seed = 0;
  std::size_t concurrency_limit = 1;

  void validate() const {
    if (max_iterations < 1) throw Error(ErrorCode::Config, "max_iterations must be >= 1");
    if (questions_per_layer < 1) throw Error(ErrorCode::Config, "questions_per_layer must be >= 1");
    if (oracle != "bounded" && oracle != "external") throw Error(ErrorCode::Config, "oracle must be bounded or external");
  }
};

struct IterationRecord {
  int iteration = 0;
  std::size_t attempted = 0;
  std::size_t newly_fixed = 0;
  double cumulative_fixing_ratio = 0.0;
  std::size_t trees_built = 0;
  std::size_t trees_committed = 0;
  std::size_t skipped = 0;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct TrainLog {
  std::size_t dataset_size = 0;
  std::vector<std::string> excluded;  // items whose golden assertion cannot be checked
  std::vector<IterationRecord> iterations;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const {
    auto its = nlohmann::json::array();
    for (const auto& r : iterations)
      its.push_back({{"iteration", r.iteration},
                     {"attempted", r.attempted},
                     {"newly_fixed", r.newly_fixed},
                     {"cumulative_fixing_ratio", r.cumulative_fixing_ratio},
                     {"trees_built", r.trees_built},
                     {"trees_committed", r.trees_committed},
                     {"skipped", r.skipped}});
    return {{"dataset_size", dataset_size}, {"excluded", excluded}, {"iterations", its}, {"warnings", warnings}};
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "iteration,attempted,newly_fixed,cumulative_fixing_ratio,trees_built,trees_committed,skipped\n";
    char ratio[32];
    for (const auto& r : iterations) {
      std::snprintf(ratio, sizeof(ratio), "%.6f", r.cumulative_fixing_ratio);
      out << r.iteration << ',' << r.attempted << ',' << r.newly_fixed << ',' << ratio << ','
          << r.trees_built << ',' << r.trees_committed << ',' << r.skipped << '\n';
    }
    return out.str();
  }

  static TrainLog from_json(const nlohmann::json& j) {
    TrainLog log;
    log.dataset_size = j.value("dataset_size", std::size_t{0});
    log.excluded = j.value("excluded", std::vector<std::string>{});
    log.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& r : j.at("iterations"))
      log.iterations.push_back({r.at("iteration").get<int>(), r.at("attempted").get<std::size_t>(),
                                r.at("newly_fixed").get<std::size_t>(), r.at("cumulative_fixing_ratio").get<double>(),
                                r.at("trees_built").get<std::size_t>(), r.at("trees_committed").get<std::size_t>(),
                                r.value("skipped", std::size_t{0})});
    return log;
  }
};

// (iteration, cumulative fixing ratio), one point per logged iteration.
inline std::vector<std::pair<int, double>> fixing_ratio_curve(const TrainLog& log) {
  std::vector<std::pair<int, double>> out;
  for (const auto& r : log.iterations) out.emplace_back(r.iteration, r.cumulative_fixing_ratio);
  return out;
}

inline std::string fixing_ratio_csv(const TrainLog& log) {
  std::string out = "iteration,fixing_ratio\n";
  char buf[64];
  for (const auto& [it, ratio] : fixing_ratio_curve(log)) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f\n", it, ratio);
    out += buf;
  }
  return out;
}

struct TrainResult {
  TrainLog log;
  std::vector<OpTree> committed;  // in commit order
};

namespace detail {

// Appends rules whose directive is not already present, keeping first-seen order.
inline void append_distinct(std::vector<OpRule>& into, const std::vector<OpRule>& from) {
  for (const auto& r : from) {
    const bool seen = std::any_of(into.begin(), into.end(), [&](const OpRule& x) { return x.directive == r.directive; });
    if (!seen) into.push_back(r);
  }
}

struct ItemOutcome {
  bool fixed = false;
  bool skipped = false;
  std::optional<OpTree> tree;  // built this iteration, valid or not
  std::vector<OpRule> new_rules;
  std::string warning;
};

// True iff the generated assertion is judged equivalent. Problems that lie
// with the generated text count as a mismatch.
inline bool generated_matches(const sva::EquivalenceOracle& oracle, const std::string& golden,
                              const std::string& generated, std::string& note) {
  try {
    return oracle.compare(golden, generated).verdict == sva::Verdict::Equivalent;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::Syntax:
      case ErrorCode::UnsupportedConstruct:
      case ErrorCode::UnknownSignal:
      case ErrorCode::BudgetExceeded:
        note = e.what();
        return false;
      default:
        throw;
    }
  }
}

}  // namespace detail

// Runs training and writes the committed trees to `library_path`, replacing
// any previous content.
inline TrainResult train(const LlmGateway& gw, const std::vector<NlSvaPair>& dataset,
                         const sva::EquivalenceOracle& oracle, const TrainConfig& cfg,
                         const std::string& library_path) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::Precondition, "training set is empty");

  TrainResult result;
  result.log.dataset_size = dataset.size();
  save_library(library_path, {});

  const std::size_t n = dataset.size();
  std::vector<bool> fixed(n, false), excluded(n, false);
  std::vector<std::vector<OpRule>> carry(n);

  if (cfg.oracle == "bounded") {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        sva::parse_sva(dataset[i].golden_sva);
      } catch (const Error& e) {
        excluded[i] = true;
        result.log.excluded.push_back(dataset[i].id);
        result.log.warnings.push_back("excluded " + dataset[i].id + ": " + e.what());
      }
    }
  }

  TreeBuildOptions topts;
  topts.questions_per_layer = cfg.questions_per_layer;
  topts.diversity_threshold = cfg.diversity_threshold;

  std::size_t fixed_count = 0;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < n; ++i)
      if (!fixed[i] && !excluded[i]) pending.push_back(i);
    if (pending.empty()) break;

    std::vector<detail::ItemOutcome> outcomes(pending.size());
    auto process = [&](std::size_t slot) {
      const auto& item = dataset[pending[slot]];
      auto& out = outcomes[slot];
      try {
        const auto first = generate_sva(gw, item.nl, item.design_context, carry[pending[slot]]);
        std::string note;
        if (detail::generated_matches(oracle, item.golden_sva, first, note)) {
          out.fixed = true;
          return;
        }
        BackgroundNode bg{item.nl, item.design_context, item.golden_sva, first};
        const std::string source = item.source.empty() ? "dataset" : item.source;
        auto tree = build_op_tree(gw, bg, topts, source + "/" + item.id + "/it" + std::to_string(it));
        tree.created_iteration = it;
        tree.provenance.dataset = item.source;
        tree.provenance.item_id = item.id;
        std::vector<OpRule> traced;
        for (const auto& tr : extract_traces(tree)) traced.push_back(tr.rule);
        detail::append_distinct(out.new_rules, traced);

        auto rules = carry[pending[slot]];
        detail::append_distinct(rules, out.new_rules);
        const auto second = generate_sva(gw, item.nl, item.design_context, rules);
        if (detail::generated_matches(oracle, item.golden_sva, second, note)) {
          tree.valid = true;
          tree.provenance.validated_rules = rules;
          out.fixed = true;
        }
        out.tree = std::move(tree);
      } catch (const Error& e) {
        switch (e.code()) {
          case ErrorCode::Provider:
          case ErrorCode::EmptyCompletion:
          case ErrorCode::DegenerateTree:
            out.skipped = true;
            out.warning = "iteration " + std::to_string(it) + ", item " + item.id + " skipped: " + e.what();
            return;
          default:
            throw Error(e.code() == ErrorCode::Precondition ? e.code() : ErrorCode::Oracle,
                        "item " + item.id + ": " + e.what());
        }
      }
    };
    parallel_for(pending.size(), cfg.concurrency_limit, process);

    IterationRecord rec;
    rec.iteration = it;
    rec.attempted = pending.size();
    for (std::size_t slot = 0; slot < pending.size(); ++slot) {
      auto& out = outcomes[slot];
      const auto idx = pending[slot];
      if (out.skipped) {
        ++rec.skipped;
        result.log.warnings.push_back(out.warning);
        continue;
      }
      detail::append_distinct(carry[idx], out.new_rules);
      if (out.tree) {
        ++rec.trees_built;
        if (out.tree->valid) {
          library_append(library_path, *out.tree);
          result.committed.push_back(*out.tree);
          ++rec.trees_committed;
        }
      }
      if (out.fixed) {
        fixed[idx] = true;
        ++rec.newly_fixed;
        ++fixed_count;
      }
    }
    rec.cumulative_fixing_ratio = static_cast<double>(fixed_count) / static_cast<double>(n);
    result.log.iterations.push_back(rec);
  }
  return result;
}

// ---- operator-level stratified sampling -----------------------------------

// Buckets items by every operator category of their golden assertion (items
// with none share an extra bucket), shuffles each bucket, then takes one
// item per bucket in turn, buckets with more remaining items first, skipping
// items already taken. Returns round(ratio * N) distinct items.
inline std::vector<NlSvaPair> stratified_sample(const std::vector<NlSvaPair>& dataset, double ratio,
                                                std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorCode::Precondition, "ratio must be in (0, 1]");
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(dataset.size())));

  constexpr std::size_t kBuckets = kAllCategories.size() + 1;
  std::array<std::vector<std::size_t>, kBuckets> buckets;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto ops = extract_operators(dataset[i].golden_sva);
    std::set<std::size_t> cats;
    for (const auto& op : ops) cats.insert(category_rank(op.category));
    if (cats.empty()) cats.insert(kBuckets - 1);
    for (auto c : cats) buckets[c].push_back(i);
  }
  SeededRng rng(seed);
  for (auto& b : buckets) rng.shuffle(b);

  std::array<std::size_t, kBuckets> cursor{};
  std::vector<bool> taken(dataset.size(), false);
  auto remaining = [&](std::size_t b) {
    std::size_t r = 0;
    for (std::size_t k = cursor[b]; k < buckets[b].size(); ++k) r += taken[buckets[b][k]] ? 0 : 1;
    return r;
  };

  std::vector<NlSvaPair> out;
  while (out.size() < target) {
    std::vector<std::size_t> order;
    for (std::size_t b = 0; b < kBuckets; ++b)
      if (remaining(b) > 0) order.push_back(b);
    if (order.empty()) break;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remaining(a) > remaining(b); });
    for (auto b : order) {
      if (out.size() >= target) break;
      while (cursor[b] < buckets[b].size() && taken[buckets[b][cursor[b]]]) ++cursor[b];
      if (cursor[b] == buckets[b].size()) continue;
      const auto idx = buckets[b][cursor[b]++];
      taken[idx] = true;
      out.push_back(dataset[idx]);
    }
  }
  return out;
}

}  // namespace fvrule
