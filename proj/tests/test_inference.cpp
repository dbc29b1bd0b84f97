#include <gtest/gtest.h>

#include <random>

#include "fvrule/inference.hpp"
#include "support.hpp"

using namespace fvrule;
using testing_support::scripted;

namespace {

ReasoningNode node(std::string id, Layer layer, std::string q, std::string a, std::optional<std::string> parent,
                   std::optional<std::string> rule = std::nullopt) {
  ReasoningNode n;
  n.node_id = std::move(id);
  n.layer = layer;
  n.question = std::move(q);
  n.answer = std::move(a);
  n.parent = std::move(parent);
  if (rule) n.rule = OpRule::from_directive(*rule);
  return n;
}

OpTree tree(std::string id, std::string nl, std::string answer = "|=> waits a cycle while |-> does not",
            std::string rule = "Use |-> instead of |=> when gnt must answer req in the same cycle.") {
  OpTree t;
  t.id = std::move(id);
  t.background.nl_spec = std::move(nl);
  t.background.design_context = {{"clk", 1}, {"req", 1}, {"gnt", 1}};
  t.background.golden_sva = "@(posedge clk) req |-> gnt";
  t.background.failing_sva = "@(posedge clk) req |=> gnt";
  t.valid = true;
  t.add_node(node("d1", Layer::ContextualDiagnosis, "What timing is required?", "Same cycle.", std::nullopt));
  t.add_node(node("d1.g1", Layer::TheoreticalGrounding, "How do the implications differ?", answer, "d1"));
  t.add_node(node("d1.g1.r1", Layer::RuleGeneration, "Which rule?", "Overlap.", "d1.g1", rule));
  return t;
}

// Word-set Jaccard, so engineered overlaps give exact scores.
class JaccardSimilarity : public TextSimilarity {
 public:
  double similarity(std::string_view a, std::string_view b) const override { return token_jaccard(a, b); }
};

// Judge whose score is a fixed function of the trace text.
class HashJudge : public LlmProvider {
 public:
  std::string complete(const PromptRequest& r) const override {
    if (r.kind == PromptKind::GenerateSva) return "a |=> b";
    if (r.kind == PromptKind::AdaptRules) return "Rule: use |->";
    const auto h = text::fnv1a64(r.values.at("trace")) % 5;
    return h == 0 ? "0" : "0." + std::to_string(2 * h);
  }
  std::string name() const override { return "hash"; }
};

std::string json_line(const nlohmann::json& j) { return j.dump() + "\n"; }

const char* kQuery = "When req is asserted, gnt must be asserted in the same cycle.";

}  // namespace

// ---- retrieval -------------------------------------------------------------

TEST(Retrieve, IdenticalBackgroundRanksFirst) {
  std::vector<OpTree> lib = {tree("a", "valid and ready handshake"), tree("b", kQuery), tree("c", "fifo full blocks push")};
  const auto got = retrieve_trees(kQuery, lib, 3);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].tree->id, "b");
  EXPECT_DOUBLE_EQ(got[0].score, 1.0);
}

TEST(Retrieve, KLargerThanLibrary) {
  std::vector<OpTree> lib = {tree("a", "x y"), tree("b", "y z")};
  EXPECT_EQ(retrieve_trees("x", lib, 10).size(), 2u);
  EXPECT_EQ(retrieve_trees("x", lib, 1).size(), 1u);
}

TEST(Retrieve, EngineeredOverlapsKeepOrder) {
  std::vector<OpTree> lib = {tree("zero", "error flag clear"), tree("half", "grant follows request stall"),
                             tree("full", "grant follows request")};
  JaccardSimilarity jac;
  const auto got = retrieve_trees("grant follows request", lib, 3, jac);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].tree->id, "full");
  EXPECT_DOUBLE_EQ(got[0].score, 1.0);
  EXPECT_EQ(got[1].tree->id, "half");
  EXPECT_DOUBLE_EQ(got[1].score, 0.75);
  EXPECT_EQ(got[2].tree->id, "zero");
  EXPECT_DOUBLE_EQ(got[2].score, 0.0);
  // The default lexical similarity ranks them the same way.
  const auto lexical = retrieve_trees("grant follows request", lib, 3);
  EXPECT_EQ(lexical[0].tree->id, "full");
  EXPECT_EQ(lexical[1].tree->id, "half");
  EXPECT_EQ(lexical[2].tree->id, "zero");
}

TEST(Retrieve, TiesGoToSmallerId) {
  std::vector<OpTree> lib = {tree("t3", "same text"), tree("t1", "same text"), tree("t2", "same text")};
  const auto got = retrieve_trees("same text", lib, 3);
  EXPECT_EQ(got[0].tree->id, "t1");
  EXPECT_EQ(got[1].tree->id, "t2");
  EXPECT_EQ(got[2].tree->id, "t3");
}

// ---- scoring ---------------------------------------------------------------

TEST(Hybrid, Arithmetic) {
  EXPECT_DOUBLE_EQ(hybrid_score(1.0, 1.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(hybrid_score(0.25, 0.8, 0.5), 0.525);
  EXPECT_EQ(hybrid_score(0.9, 0.0, 0.5), 0.0);
  EXPECT_EQ(hybrid_score(0.0, 0.9, 0.5), 0.0);
}

TEST(ScoreTrace, OverlapVersusNonOverlapCase) {
  ReasoningTrace tr;
  tr.tree_id = "t";
  tr.flattened_text = "Background: x\nQ1: which?\nA1: use |-> here\nRule: use |->";
  tr.rule = OpRule::from_directive("use |->");
  auto gw = scripted(R"({"kind":"JudgeApplicability","response":"0.8"})");
  const auto s = score_trace(gw, tr, "req |=> gnt", kQuery, RetrievalConfig{});
  EXPECT_DOUBLE_EQ(s.s_op, 0.25);
  EXPECT_DOUBLE_EQ(s.s_llm, 0.8);
  EXPECT_DOUBLE_EQ(s.s_hybrid, 0.525);
}

TEST(ScoreTrace, JudgeFailureGatesOut) {
  ReasoningTrace tr;
  tr.flattened_text = "Rule: use |->";
  auto gw = scripted(R"({"kind":"JudgeApplicability","response":"no idea"})");
  const auto s = score_trace(gw, tr, "req |-> gnt", kQuery, RetrievalConfig{});
  EXPECT_EQ(s.s_op, 1.0);
  EXPECT_EQ(s.s_llm, 0.0);
  EXPECT_EQ(s.s_hybrid, 0.0);
  EXPECT_FALSE(s.judge_error.empty());
}

TEST(Hybrid, MonotoneAndBoundedOffTheGate) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(0.001, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), op = u(rng), llm = u(rng), d = u(rng) * (1.0 - std::max(op, llm));
    const double h = hybrid_score(op, llm, a);
    EXPECT_LE(h, hybrid_score(op + d, llm, a) + 1e-12);
    EXPECT_LE(h, hybrid_score(op, llm + d, a) + 1e-12);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, 1.0);
  }
}

TEST(Hybrid, GateInvariantUnderCommonJudgeScaling) {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double op = rng() % 4 == 0 ? 0.0 : u(rng);
    const double llm = rng() % 4 == 0 ? 0.0 : u(rng);
    const double c = 1.0 - u(rng) * 0.999;
    EXPECT_EQ(hybrid_score(op, llm, 0.5) == 0.0, hybrid_score(op, c * llm, 0.5) == 0.0);
  }
  // With alpha = 0 the ranking follows the judge alone, so scaling keeps it.
  EXPECT_LT(hybrid_score(0.3, 0.4, 0.0), hybrid_score(0.9, 0.5, 0.0));
  EXPECT_LT(hybrid_score(0.3, 0.4 * 0.3, 0.0), hybrid_score(0.9, 0.5 * 0.3, 0.0));
}

// ---- masking ---------------------------------------------------------------

TEST(Abstract, WorkedExample) {
  ReasoningTrace tr;
  tr.flattened_text = "use |-> because gnt is asserted with req";
  tr.rule = OpRule::from_directive("use |-> because gnt is asserted with req");
  tr.instance_signals = {"req", "gnt"};
  const auto m = abstract_signals(tr);
  EXPECT_EQ(m.flattened_text, "use |-> because <signal_1> is asserted with <signal_2>");
  EXPECT_EQ(m.rule.directive, m.flattened_text);
  EXPECT_TRUE(m.rule.abstracted);
}

TEST(Abstract, NoIdentifiersOnlyFlagChanges) {
  ReasoningTrace tr;
  tr.flattened_text = "use |-> with ##2 delay";
  tr.rule = OpRule::from_directive(tr.flattened_text);
  tr.instance_signals = {"req"};
  const auto m = abstract_signals(tr);
  EXPECT_EQ(m.flattened_text, tr.flattened_text);
  EXPECT_EQ(m.rule.directive, tr.rule.directive);
  EXPECT_TRUE(m.rule.abstracted);
}

TEST(Abstract, ConsistentPlaceholdersAndKnownSignalsPass) {
  ReasoningTrace tr;
  tr.flattened_text = "req then req then gnt ##3 req_q";
  tr.rule = OpRule::from_directive("req |-> gnt");
  tr.instance_signals = {"req", "gnt", "req_q"};
  const auto m = abstract_signals(tr);
  EXPECT_EQ(m.flattened_text, "<signal_1> then <signal_1> then <signal_2> ##3 <signal_3>");
  EXPECT_EQ(m.rule.directive, "<signal_1> |-> <signal_2>");
  const auto k = abstract_signals(tr, std::vector<std::string>{"gnt"});
  EXPECT_EQ(k.flattened_text, "<signal_1> then <signal_1> then gnt ##3 <signal_2>");
}

TEST(Abstract, TreeTracesMaskTheirDesignSignals) {
  const auto traces = extract_traces(tree("t", kQuery));
  const auto m = abstract_signals(traces[0]);
  for (const char* s : {" req ", " gnt "}) EXPECT_EQ(m.flattened_text.find(s), std::string::npos) << m.flattened_text;
  EXPECT_NE(m.flattened_text.find("|->"), std::string::npos);
}

// ---- pipeline --------------------------------------------------------------

TEST(Infer, EmptyLibraryFallsBackToInitial) {
  auto gw = scripted(R"({"kind":"GenerateSva","response":"req |=> gnt"})");
  const auto r = infer(gw, kQuery, {}, {}, RetrievalConfig{});
  EXPECT_EQ(r.final_sva, "req |=> gnt");
  EXPECT_EQ(r.initial_sva, r.final_sva);
  EXPECT_TRUE(r.no_applicable_rules);
}

TEST(Infer, ScriptedScenarioFlipsImplication) {
  const std::string fixture =
      json_line({{"kind", "GenerateSva"}, {"response", "@(posedge clk) cmd_req |=> cmd_gnt"}}) +
      json_line({{"kind", "GenerateSva"},
                 {"match", {{"rules", "cmd_gnt in the same cycle"}}},
                 {"response", "@(posedge clk) cmd_req |-> cmd_gnt"}}) +
      json_line({{"kind", "JudgeApplicability"}, {"response", "0.8"}}) +
      json_line({{"kind", "AdaptRules"},
                 {"match", {{"traces", "<signal_"}}},
                 {"response", "Rule: Use |-> instead of |=> so cmd_req sees cmd_gnt in the same cycle."}});
  auto gw = scripted(fixture);
  const std::vector<OpTree> lib = {tree("m01", kQuery)};
  const auto r = infer(gw, "When cmd_req is asserted, cmd_gnt must be asserted in the same cycle.",
                       {{"clk", 1}, {"cmd_req", 1}, {"cmd_gnt", 1}}, lib, RetrievalConfig{});
  EXPECT_EQ(r.initial_sva, "@(posedge clk) cmd_req |=> cmd_gnt");
  EXPECT_EQ(r.final_sva, "@(posedge clk) cmd_req |-> cmd_gnt");
  ASSERT_EQ(r.selected.size(), 1u);
  EXPECT_FALSE(r.no_applicable_rules);
  ASSERT_EQ(r.adapted_rules.size(), 1u);
  const auto& s = r.scored[r.selected[0]];
  EXPECT_DOUBLE_EQ(s.s_llm, 0.8);
  EXPECT_GT(s.s_op, 0.0);
  const auto audit = r.audit_json();
  EXPECT_EQ(audit.at("selected").size(), 1u);
  EXPECT_EQ(audit.at("selected")[0], "m01:d1/d1.g1/d1.g1.r1");
}

TEST(Infer, AllTracesGatedOut) {
  auto gw = scripted(R"({"kind":"GenerateSva","response":"req |=> gnt"})"
                     "\n"
                     R"({"kind":"JudgeApplicability","response":"0.0"})");
  const std::vector<OpTree> lib = {tree("a", kQuery), tree("b", "other text")};
  const auto r = infer(gw, kQuery, {}, lib, RetrievalConfig{});
  EXPECT_TRUE(r.no_applicable_rules);
  EXPECT_TRUE(r.selected.empty());
  EXPECT_EQ(r.final_sva, r.initial_sva);
  EXPECT_EQ(r.scored.size(), 2u);
}

TEST(Infer, ProviderErrorsCarryStage) {
  auto gw = scripted(R"({"kind":"JudgeApplicability","response":"0.5"})");
  try {
    infer(gw, kQuery, {}, {}, RetrievalConfig{});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("initial generation:", 0), 0u) << e.what();
  }
}

TEST(Infer, BadConfigRejected) {
  auto gw = scripted(R"({"kind":"GenerateSva","response":"a"})");
  RetrievalConfig cfg;
  cfg.k_traces = 0;
  EXPECT_THROW(infer(gw, kQuery, {}, {}, cfg), Error);
  cfg.k_traces = 1;
  cfg.alpha = 1.5;
  EXPECT_THROW(infer(gw, kQuery, {}, {}, cfg), Error);
}

TEST(Infer, SelectionIsTopPositiveScores) {
  const std::vector<std::string> answers = {"|-> and |=> differ", "##1 delays", "$rose marks an edge",
                                            "&& combines", "s_eventually waits", "plain words"};
  std::mt19937 rng(31);
  for (int round = 0; round < 20; ++round) {
    std::vector<OpTree> lib;
    for (int i = 0; i < 6; ++i) {
      auto t = tree("t" + std::to_string(i), "req gnt spec " + std::to_string(rng() % 3),
                    answers[rng() % answers.size()], "Use " + answers[rng() % 5]);
      t.add_node(node("d1.g1.r2", Layer::RuleGeneration, "Other?", answers[rng() % answers.size()], "d1.g1",
                      "Prefer $stable over ##" + std::to_string(rng() % 3)));
      lib.push_back(std::move(t));
    }
    RetrievalConfig cfg;
    cfg.k_trees = 1 + static_cast<int>(rng() % 6);
    cfg.k_traces = 1 + static_cast<int>(rng() % 6);
    cfg.jobs = 3;
    LlmGateway gw(std::make_shared<HashJudge>());
    const auto r = infer(gw, "req gnt spec 1", {}, lib, cfg);
    EXPECT_EQ(r.scored.size(), 2u * static_cast<std::size_t>(cfg.k_trees));

    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < r.scored.size(); ++i)
      if (r.scored[i].s_hybrid > 0.0) want.push_back(i);
    std::sort(want.begin(), want.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = r.scored[a];
      const auto& y = r.scored[b];
      return std::tie(y.s_hybrid, x.trace.tree_id, a) < std::tie(x.s_hybrid, y.trace.tree_id, b);
    });
    if (want.size() > static_cast<std::size_t>(cfg.k_traces)) want.resize(static_cast<std::size_t>(cfg.k_traces));
    EXPECT_EQ(r.selected, want);
    for (const auto& s : r.scored) {
      EXPECT_DOUBLE_EQ(s.s_hybrid, hybrid_score(s.s_op, s.s_llm, cfg.alpha));
      if (s.s_op == 0.0 || s.s_llm == 0.0) { EXPECT_EQ(s.s_hybrid, 0.0); }
    }
  }
}
