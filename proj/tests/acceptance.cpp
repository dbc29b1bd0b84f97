// Acceptance run: one line per criterion, nonzero exit if any fails.
// Every check compares the library against an oracle written in tests/.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "fvrule/cli.hpp"
#include "fvrule/evaluation.hpp"
#include "fvrule/inference.hpp"
#include "fvrule/trainer.hpp"
#include "naive_sva.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fvrule;
using testing_support::source_path;
using testing_support::TempDir;

namespace {

// Collects failed expectations; a criterion passes when none were recorded.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

struct Skip {
  std::string reason;
};

struct Criterion {
  int number;
  std::string title;
  double limit_s;  // 0: no runtime bound
  std::function<void(Check&)> body;
};

std::set<std::string> extract_identifiers(const std::string& s) {
  std::set<std::string> out;
  std::string cur;
  for (char ch : s + ' ') {
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_') {
      cur += ch;
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  return out;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

const std::vector<std::string> kCanonical = {
    "|->", "|=>", "##m", "[m:n]", "$past", "$rose", "$fell", "$stable", "s_eventually", "s_always", "strong",
    "&&", "||", "!", "==", "!==", "^", "@(posedge)", "@(negedge)", "@()", "disable iff"};

OperatorSet to_ops(const std::set<std::string>& tokens) {
  OperatorSet s;
  for (const auto& t : tokens) s.insert(*Lexicon::builtin().canonicalize(t));
  return s;
}

void alignment(Check& c) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<std::string> a, b;
    // Vary density so that empty and near-full sets both occur.
    const unsigned density = 1 + rng() % 6;
    for (const auto& t : kCanonical) {
      if (rng() % density == 0) a.insert(t);
      if (rng() % density == 0) b.insert(t);
    }
    const double got = operator_alignment_score(to_ops(a), to_ops(b));
    const double want = oracle::soft_jaccard(a, b);
    c.expect(got == want, "pair " + std::to_string(trial) + ": " + fmt(got) + " != " + fmt(want));
  }
  c.expect(operator_alignment_score(to_ops({"|->"}), to_ops({"|=>"})) == 0.25, "{|->} vs {|=>} != 0.25");
  for (const auto& t : kCanonical) {
    c.expect(operator_alignment_score(to_ops({t, "&&"}), to_ops({t, "&&"})) == 1.0, "identical set " + t);
  }
}

void gate(Check& c) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng);
    const double op = i % 7 == 0 ? 0.0 : u(rng);
    const double llm = i % 11 == 0 ? 0.0 : u(rng);
    const double got = hybrid_score(op, llm, a);
    const double want = (op > 0.0 && llm > 0.0) ? a * op + (1.0 - a) * llm : 0.0;
    c.expect(got == want, "triple " + std::to_string(i) + ": " + fmt(got) + " != " + fmt(want));
    if (op > 0.0 && llm > 0.0) {
      const double op2 = std::min(1.0, op + 0.1 * u(rng));
      const double llm2 = std::min(1.0, llm + 0.1 * u(rng));
      c.expect(hybrid_score(op2, llm, a) >= got, "not monotone in s_op at triple " + std::to_string(i));
      c.expect(hybrid_score(op, llm2, a) >= got, "not monotone in s_llm at triple " + std::to_string(i));
    }
  }
  c.expect(hybrid_score(1.0, 0.0, 0.5) == 0.0 && hybrid_score(0.0, 1.0, 0.5) == 0.0, "gate at zero");
}

void oracle_agreement(Check& c) {
  naive::Gen gen(31337, 2);
  const std::vector<std::string> names = {"a", "b"};
  sva::EquivalenceOptions opts;
  opts.max_len = 4;
  const sva::Verdict map[] = {sva::Verdict::Equivalent, sva::Verdict::GoldenImpliesGenerated,
                              sva::Verdict::GeneratedImpliesGolden, sva::Verdict::Incomparable};
  std::set<int> seen;
  for (int i = 0; i < 100; ++i) {
    const auto x = gen.assertion();
    const auto y = gen.pick(0, 2) ? gen.mutate(x) : gen.assertion();
    const auto tx = naive::render(x, names), ty = naive::render(y, names);
    const auto want = naive::compare(x, y, 2, 4);
    const auto got = sva::check_equivalence(sva::parse_sva(tx), sva::parse_sva(ty), names, opts);
    seen.insert(want.verdict);
    const auto where = "pair " + std::to_string(i) + " (" + tx + " vs " + ty + ")";
    c.expect(got.verdict == map[want.verdict],
             where + ": " + sva::verdict_name(got.verdict) + " != " + sva::verdict_name(map[want.verdict]));
    c.expect(got.counterexample.has_value() == want.counterexample.has_value() &&
                 (!want.counterexample || got.counterexample->to_string() == naive::to_string(*want.counterexample, names)),
             where + ": counterexample differs");
  }
  c.expect(seen.size() == 4, "random pairs did not cover all four verdicts");

  sva::EquivalenceOptions small;
  small.max_len = 4;
  const auto v = sva::check_equivalence(sva::parse_sva("req |-> gnt"), sva::parse_sva("req |=> gnt"), {"req", "gnt"},
                                        small);
  c.expect(v.verdict == sva::Verdict::Incomparable, "req |-> gnt vs req |=> gnt not Incomparable");
  if (v.counterexample) {
    const auto& t = *v.counterexample;
    c.expect(sva::eval_assertion(sva::parse_sva("req |-> gnt"), t) != sva::eval_assertion(sva::parse_sva("req |=> gnt"), t),
             "counterexample does not separate the assertions");
  } else {
    c.expect(false, "Incomparable verdict without counterexample");
  }
  const auto w = sva::check_equivalence(sva::parse_sva("req && ack |-> gnt"), sva::parse_sva("req |-> gnt"),
                                        {"req", "ack", "gnt"}, small);
  c.expect(w.verdict == sva::Verdict::GeneratedImpliesGolden,
           std::string("req && ack |-> gnt vs req |-> gnt gave ") + sva::verdict_name(w.verdict));
}

struct TrainRun {
  TrainResult result;
  std::string library, log_json, log_csv;
};

TrainRun train_micro(const TempDir& dir, const std::string& name) {
  auto gw = testing_support::demo_gateway();
  const auto data = load_dataset(source_path("data/micro.jsonl"));
  if (!data.errors.empty()) throw std::runtime_error("micro dataset has invalid records");
  TrainConfig cfg;
  cfg.max_iterations = 3;
  cfg.rng_seed = 17;
  cfg.concurrency_limit = 4;
  TrainRun run;
  run.result = train(gw, data.items, sva::BoundedOracle(), cfg, dir.file(name));
  run.library = text::read_file(dir.file(name));
  run.log_json = run.result.log.to_json().dump(2);
  run.log_csv = run.result.log.to_csv();
  return run;
}

void training(Check& c) {
  TempDir dir;
  const auto first = train_micro(dir, "a.jsonl");
  const auto second = train_micro(dir, "b.jsonl");
  const auto& log = first.result.log;
  c.expect(!log.iterations.empty() && log.iterations.size() <= 3, "iterations outside [1, 3]");
  c.expect(!log.iterations.empty() && log.iterations.back().cumulative_fixing_ratio == 1.0,
           "final fixing ratio is not 1.0");

  // Items failing before training are those whose rule-free generation does
  // not match; each needs a committed tree that the oracle validates.
  const auto data = load_dataset(source_path("data/micro.jsonl")).items;
  auto gw = testing_support::demo_gateway();
  const sva::BoundedOracle oracle;
  const auto lib = library_load(dir.file("a.jsonl"));
  c.expect(lib.errors.empty(), "library has invalid records");
  std::size_t failing = 0;
  for (const auto& it : data) {
    const auto init = generate_sva(gw, it.nl, it.design_context, {});
    if (oracle.compare(it.golden_sva, init).verdict == sva::Verdict::Equivalent) continue;
    ++failing;
    bool valid = false;
    for (const auto& t : lib.trees) {
      if (t.provenance.item_id != it.id) continue;
      const auto fixed = generate_sva(gw, it.nl, it.design_context, t.provenance.validated_rules);
      valid |= oracle.compare(it.golden_sva, fixed).verdict == sva::Verdict::Equivalent;
    }
    c.expect(valid, "no valid committed tree for initially failing item " + it.id);
  }
  c.expect(failing > 0, "fixture has no initially failing item");
  c.expect(first.library == second.library, "libraries differ between runs");
  c.expect(first.log_json == second.log_json && first.log_csv == second.log_csv, "train logs differ between runs");
}

void inference(Check& c) {
  TempDir dir;
  const auto run = train_micro(dir, "lib.jsonl");
  const auto lib = library_load(dir.file("lib.jsonl")).trees;
  const auto held = load_dataset(source_path("data/heldout.jsonl")).items;
  c.expect(held.size() == 1, "held-out fixture should hold one item");
  if (held.empty()) return;
  const auto& item = held[0];

  const auto planted = std::find_if(lib.begin(), lib.end(), [](const OpTree& t) { return t.provenance.item_id == "m01"; });
  c.expect(planted != lib.end(), "planted tree for m01 missing from the library");
  if (planted == lib.end()) return;

  std::vector<std::string> training_signals;
  for (const auto& it : load_dataset(source_path("data/micro.jsonl")).items) {
    if (it.id != "m01") continue;
    for (const auto& s : it.design_context) {
      if (s.name != "clk") training_signals.push_back(s.name);
    }
  }

  auto gw = testing_support::demo_gateway();
  std::vector<std::string> corpus;
  for (const auto& t : lib) corpus.push_back(t.background.nl_spec);
  const TfIdfSimilarity sim(corpus);
  const auto r = infer(gw, item.nl, item.design_context, lib, RetrievalConfig{}, &sim);

  c.expect(std::any_of(r.retrieved.begin(), r.retrieved.end(), [&](const auto& p) { return p.first == planted->id; }),
           "planted tree not retrieved");
  bool from_planted = false;
  for (auto i : r.selected) {
    c.expect(r.scored[i].s_hybrid > 0.0, "selected trace with s_hybrid <= 0");
    from_planted |= r.scored[i].trace.tree_id == planted->id;
  }
  c.expect(from_planted, "no selected trace comes from the planted tree");
  c.expect(r.audit_json().at("selected").size() == r.selected.size(), "audit does not list the selection");
  c.expect(!r.adapted_rules.empty(), "no adapted rule");
  for (const auto& rule : r.adapted_rules) {
    c.expect(rule.directive.find("cmd_req") != std::string::npos || rule.directive.find("cmd_gnt") != std::string::npos,
             "adapted rule does not name the held-out signals: " + rule.directive);
    c.expect(rule.directive.find("<signal_") == std::string::npos, "placeholder left in rule: " + rule.directive);
    for (const auto& sig : training_signals) {
      c.expect(extract_identifiers(rule.directive).count(sig) == 0,
               "training signal '" + sig + "' leaked into rule: " + rule.directive);
    }
  }
  const auto v = sva::BoundedOracle().compare(item.golden_sva, r.final_sva);
  c.expect(v.verdict == sva::Verdict::Equivalent,
           "final SVA '" + r.final_sva + "' is " + sva::verdict_name(v.verdict) + " to golden");
  c.expect(r.initial_sva != r.final_sva, "rules did not change the prediction");
  (void)run;

  const auto empty = infer(gw, item.nl, item.design_context, {}, RetrievalConfig{});
  c.expect(empty.final_sva == empty.initial_sva && empty.final_sva == r.initial_sva,
           "empty library output differs from the initial generation");
}

void metric_invariants(Check& c) {
  auto check_report = [&](const EvalReport& r, const std::string& name) {
    for (const auto& it : r.items) {
      if (!it.func) continue;
      c.expect(*it.func <= *it.relaxed_func, name + "/" + it.id + ": func > relaxed func");
      c.expect(*it.func <= it.syn, name + "/" + it.id + ": func > syn");
      if (it.syn == 0) c.expect(*it.func == 0, name + "/" + it.id + ": syn 0 but func 1");
    }
    c.expect(r.func <= r.relaxed_func, name + ": aggregate func > relaxed func");
    c.expect(r.func <= r.syn, name + ": aggregate func > syn");
  };

  // Micro set: rule-free generations, then regenerations with the rules each
  // item's committed tree validated. Held-out set: full inference.
  TempDir dir;
  train_micro(dir, "lib.jsonl");
  const auto lib = library_load(dir.file("lib.jsonl")).trees;
  auto gw = testing_support::demo_gateway();
  const sva::BoundedOracle bounded;
  {
    const auto data = load_dataset(source_path("data/micro.jsonl")).items;
    std::map<std::string, std::string> init, fin;
    for (const auto& it : data) {
      init[it.id] = fin[it.id] = generate_sva(gw, it.nl, it.design_context, {});
      for (const auto& t : lib) {
        if (t.provenance.item_id == it.id)
          fin[it.id] = generate_sva(gw, it.nl, it.design_context, t.provenance.validated_rules);
      }
    }
    const auto before = evaluate(data, init, bounded, 4);
    const auto after = evaluate(data, fin, bounded, 4);
    check_report(before, "micro initial");
    check_report(after, "micro trained");
    c.expect(before.func < 1.0 && after.func == 1.0, "micro fixture should go from failing to fully correct");
  }
  {
    const auto data = load_dataset(source_path("data/heldout.jsonl")).items;
    std::map<std::string, std::string> init, fin;
    for (const auto& it : data) {
      const auto r = infer(gw, it.nl, it.design_context, lib, RetrievalConfig{});
      init[it.id] = r.initial_sva;
      fin[it.id] = r.final_sva;
    }
    check_report(evaluate(data, init, bounded, 4), "held-out initial");
    check_report(evaluate(data, fin, bounded, 4), "held-out final");
  }

  // Fixture 3: random goldens against identical, mutated, unrelated and broken predictions.
  naive::Gen gen(404, 2);
  const std::vector<std::string> names = {"a", "b"};
  std::vector<NlSvaPair> data;
  std::map<std::string, std::string> pred;
  for (int i = 0; i < 120; ++i) {
    const auto g = gen.assertion();
    const auto id = "r" + std::to_string(i);
    data.push_back({id, "spec", naive::render(g, names), {}, "t"});
    switch (i % 4) {
      case 0: pred[id] = naive::render(g, names); break;
      case 1: pred[id] = naive::render(gen.mutate(g), names); break;
      case 2: pred[id] = naive::render(gen.assertion(), names); break;
      default: pred[id] = "(" + naive::render(g, names); break;
    }
  }
  sva::EquivalenceOptions o;
  o.max_len = 3;
  const auto rnd = evaluate(data, pred, sva::BoundedOracle(o), 4);
  check_report(rnd, "random");
  c.expect(rnd.syn < 1.0 && rnd.func > 0.0, "random fixture does not exercise both gates");

  for (const auto& it : data) {
    c.expect(bleu(it.golden_sva, it.golden_sva) == 1.0, "bleu(x, x) != 1 for " + it.golden_sva);
    const auto tok = bleu_tokenize(it.golden_sva);
    c.expect(std::abs(bleu(pred[it.id], it.golden_sva) - oracle::bleu(bleu_tokenize(pred[it.id]), tok)) < 1e-12,
             "bleu disagrees with reference on " + it.id);
  }
}

void taxonomy(Check& c) {
  // Human column of the published failure table, categories in rank order.
  const TaxonomyCounts base = {4, 2, 0, 1, 0, 1}, ours = {1, 0, 0, 0, 0, 1};
  const std::vector<std::string> printed = {"-75%", "-100%", "--", "-100%", "--", "0%", "-75%"};
  const auto rows = reduction_table(base, ours);
  c.expect(rows.size() == printed.size(), "reduction table has wrong row count");
  for (std::size_t i = 0; i < std::min(rows.size(), printed.size()); ++i) {
    c.expect(rows[i].reduction == printed[i], rows[i].label + ": " + rows[i].reduction + " != " + printed[i]);
  }
  c.expect(!rows.empty() && rows.back().base == 8 && rows.back().ours == 2, "total is not 8 -> 2");
  c.expect(!rows.empty() && rows.front().label == "Temp. Impl." && rows.front().base == 4 && rows.front().ours == 1,
           "first row is not Temp. Impl. 4 -> 1");
  // Independent arithmetic: (8 - 2) / 8 and (4 - 1) / 4.
  c.expect(format_reduction(8, 2) == "-" + std::to_string((8 - 2) * 100 / 8) + "%", "8 -> 2");
  c.expect(format_reduction(4, 1) == "-" + std::to_string((4 - 1) * 100 / 4) + "%", "4 -> 1");
}

void sampling(Check& c) {
  // Four single-category strata of unequal size: 10 implication, 10 delay,
  // 10 liveness, 10 combinational.
  std::vector<NlSvaPair> d;
  const std::vector<std::pair<std::string, std::string>> forms = {
      {"i", "a%d |-> b"}, {"d", "##2 a%d"}, {"l", "s_eventually a%d"}, {"c", "a%d && b"}};
  for (const auto& [prefix, form] : forms) {
    for (int k = 0; k < 10; ++k) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), form.c_str(), k);
      d.push_back({prefix + std::to_string(k), "x", buf, {}, "s"});
    }
  }
  for (const auto& it : d) {
    const auto cats = extract_operators(it.golden_sva);
    c.expect(cats.size() == 1, "synthetic item " + it.id + " is not single-category");
  }
  for (std::uint64_t seed : {1u, 7u, 42u, 1000u}) {
    const auto s = stratified_sample(d, 0.5, seed);
    c.expect(s.size() == 20, "sample size " + std::to_string(s.size()) + " != 20");
    std::map<char, int> per;
    std::set<std::string> ids;
    for (const auto& x : s) {
      ++per[x.id[0]];
      ids.insert(x.id);
    }
    c.expect(ids.size() == s.size(), "duplicate items at seed " + std::to_string(seed));
    for (const auto& [prefix, form] : forms) {
      const int n = per[prefix[0]];
      c.expect(n >= 4 && n <= 6, "stratum " + prefix + " got " + std::to_string(n) + " (want 5 +/- 1)");
    }
    c.expect(dump_dataset(s) == dump_dataset(stratified_sample(d, 0.5, seed)),
             "not deterministic at seed " + std::to_string(seed));
  }
}

void live(Check& c) {
  const char* key = std::getenv("OPENAI_API_KEY");
  if (key == nullptr || *key == '\0') throw Skip{"OPENAI_API_KEY not set"};
  TempDir dir;
  auto cli = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "fvrule");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    c.expect(code == 0, args[1] + " exited " + std::to_string(code) + ": " + err.str());
    return code;
  };
  const auto micro = source_path("data/micro.jsonl");
  const std::vector<std::string> common = {"--provider", "http", "--log-dir", dir.file("logs")};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  if (cli(with({"train", "--dataset", micro, "--out-library", dir.file("lib.jsonl"), "--max-iter", "2"})) != 0) return;
  if (cli(with({"infer", "--dataset", micro, "--library", dir.file("lib.jsonl"), "--out", dir.file("pred.jsonl")})) != 0)
    return;
  if (cli({"eval", "--dataset", micro, "--predictions", dir.file("pred.jsonl"), "--out-dir", dir.file("eval"),
           "--log-dir", dir.file("logs")}) != 0)
    return;
  const auto report = nlohmann::json::parse(text::read_file(dir.file("eval/report.json")));
  c.expect(report.contains("aggregate") && report.contains("taxonomy") && report["items"].size() == 12,
           "report is not well formed");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "operator alignment matches brute force; {|->} vs {|=>} = 0.25; identical = 1", 1.0, alignment},
      {2, "hybrid score gate and monotonicity", 1.0, gate},
      {3, "bounded oracle agrees with naive evaluator on 100 pairs; hand cases", 30.0, oracle_agreement},
      {4, "scripted micro training: ratio 1.0 within 3 iterations, reproducible", 10.0, training},
      {5, "scripted held-out inference: planted tree, substitution, equivalent output", 5.0, inference},
      {6, "metric invariants Func <= R.Func, Func <= Syn, bleu(x, x) = 1", 0.0, metric_invariants},
      {7, "failure reduction 8 -> 2 and Temp. Impl. 4 -> 1 give -75%", 0.0, taxonomy},
      {8, "stratified sampling at 0.5: even, distinct, deterministic", 1.0, sampling},
      {9, "live provider pipeline on the micro dataset", 0.0, live},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    std::string status = "PASS", note;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const Skip& s) {
      status = "SKIP";
      note = s.reason;
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (status != "SKIP") {
      if (cr.limit_s > 0 && secs >= cr.limit_s) check.failures.push_back("took " + fmt(secs) + " s");
      if (!check.failures.empty()) status = "FAIL";
    }
    std::printf("[%s] criterion %d: %s (%.3f s)%s%s\n", status.c_str(), cr.number, cr.title.c_str(), secs,
                note.empty() ? "" : " -- ", note.c_str());
    for (std::size_t i = 0; i < check.failures.size() && i < 10; ++i) std::printf("    %s\n", check.failures[i].c_str());
    if (check.failures.size() > 10) std::printf("    ... %zu more\n", check.failures.size() - 10);
    failed += status == "FAIL";
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
