#pragma once

// The four model-backed operations: assertion generation, reasoning-tree
// construction, applicability judging and rule adaptation.

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fvrule/dataset.hpp"
#include "fvrule/equivalence.hpp"
#include "fvrule/errors.hpp"
#include "fvrule/lexicon.hpp"
#include "fvrule/llm_gateway.hpp"
#include "fvrule/optree.hpp"
#include "fvrule/text.hpp"

namespace fvrule {

struct Exemplar {
  std::string nl;
  std::string sva;
};

namespace detail {

inline std::string or_none(std::string s) { return s.empty() ? "(none)" : s; }

inline std::string render_context(const std::vector<SignalDecl>& ctx) {
  return ctx.empty() ? "(not provided)" : describe(ctx);
}

inline std::string render_rules(const std::vector<OpRule>& rules) {
  std::string out;
  for (std::size_t i = 0; i < rules.size(); ++i)
    out += std::to_string(i + 1) + ". " + rules[i].directive + "\n";
  return or_none(std::string(text::trim(out)));
}

inline std::string render_shots(const std::vector<Exemplar>& shots) {
  std::string out;
  for (const auto& s : shots) out += "Specification: " + s.nl + "\nAssertion: " + s.sva + "\n";
  return or_none(std::string(text::trim(out)));
}

inline bool is_prose(std::string_view line) {
  const auto l = text::lower(text::trim(line));
  for (const char* p : {"here is", "here's", "sure", "the assertion", "this assertion", "note", "explanation"})
    if (l.rfind(p, 0) == 0) return true;
  return false;
}

inline std::string strip_trailing_semicolon(std::string s) {
  while (!s.empty() && (s.back() == ';' || text::is_space(s.back()))) s.pop_back();
  return s;
}

// "label: assert property (body);" -> "body" when the parentheses wrap the
// whole remainder.
inline std::string strip_wrapper(std::string s) {
  static const std::regex head(R"(^(?:[A-Za-z_]\w*\s*:\s*)?(?:assert|assume|cover)\s+property\s*\()");
  std::smatch m;
  if (!std::regex_search(s, m, head)) return s;
  const std::size_t open = static_cast<std::size_t>(m.length(0)) - 1;
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')' && --depth == 0)
      return i + 1 == s.size() ? std::string(text::trim(std::string_view(s).substr(open + 1, i - open - 1))) : s;
  }
  return s;
}

}  // namespace detail

// The assertion inside a model reply: the first fenced code block if any,
// otherwise the first line that parses as an assertion, otherwise the first
// non-prose line naming an operator. Throws EmptyCompletion.
inline std::string extract_assertion(std::string_view response) {
  const auto fence = response.find("```");
  if (fence != std::string_view::npos) {
    auto body_start = response.find('\n', fence);
    if (body_start != std::string_view::npos) {
      ++body_start;
      const auto close = response.find("```", body_start);
      auto body = response.substr(body_start, close == std::string_view::npos ? std::string_view::npos
                                                                              : close - body_start);
      auto s = detail::strip_wrapper(detail::strip_trailing_semicolon(text::normalize_space(body)));
      if (!s.empty()) return s;
    }
  }
  const auto lines = text::split_lines(response);
  for (const auto& line : lines) {
    const auto t = text::trim(line);
    if (t.empty() || detail::is_prose(t) || t.find("```") != std::string_view::npos) continue;
    const auto s = detail::strip_wrapper(detail::strip_trailing_semicolon(std::string(t)));
    auto check = sva::syntax_check(s);
    if (check.ok && !sva::referenced_signals(sva::parse_sva_lenient(s)).empty()) return s;
  }
  for (const auto& line : lines) {
    const auto t = text::trim(line);
    if (t.empty() || detail::is_prose(t) || t.find("```") != std::string_view::npos) continue;
    if (!extract_operators(t).empty()) return detail::strip_wrapper(detail::strip_trailing_semicolon(std::string(t)));
  }
  throw Error(ErrorCode::EmptyCompletion, "model reply contains no assertion");
}

inline std::string generate_sva(const LlmGateway& gw, std::string_view nl_spec,
                                const std::vector<SignalDecl>& design_context,
                                const std::vector<OpRule>& rules,
                                const std::vector<Exemplar>& shots = {}) {
  if (text::trim(nl_spec).empty()) throw Error(ErrorCode::Precondition, "empty specification");
  const auto reply = gw.call(PromptKind::GenerateSva,
                             {{"nl_spec", std::string(nl_spec)},
                              {"design_context", detail::render_context(design_context)},
                              {"rules", detail::render_rules(rules)},
                              {"shots", detail::render_shots(shots)}});
  return extract_assertion(reply);
}

// ---- reasoning trees -----------------------------------------------------

struct TreeBuildOptions {
  int questions_per_layer = 3;
  double diversity_threshold = 0.8;  // token Jaccard above this is a repeat
};

struct LayerReply {
  std::string question;
  std::string answer;
  std::optional<std::string> rule;
};

// Reads "Question:", "Answer:" and "Rule:" lines; unmarked lines continue
// the previous field. A reply with no markers is all answer.
inline LayerReply parse_layer_reply(std::string_view reply) {
  LayerReply out;
  std::string* cur = nullptr;
  bool any_marker = false;
  for (const auto& raw : text::split_lines(reply)) {
    auto line = std::string(text::trim(raw));
    while (!line.empty() && (line.front() == '-' || line.front() == '*')) line = std::string(text::trim(line.substr(1)));
    auto take = [&](const char* marker, std::string& field) {
      if (!text::starts_with_icase(line, marker)) return false;
      field = std::string(text::trim(std::string_view(line).substr(std::string_view(marker).size())));
      cur = &field;
      any_marker = true;
      return true;
    };
    if (take("question:", out.question) || take("answer:", out.answer)) continue;
    if (text::starts_with_icase(line, "rule:")) {
      out.rule.emplace();
      take("rule:", *out.rule);
      continue;
    }
    if (cur && !line.empty()) *cur += (cur->empty() ? "" : " ") + line;
  }
  if (!any_marker) out.answer = std::string(text::trim(reply));
  return out;
}

inline double token_jaccard(std::string_view a, std::string_view b) {
  auto wa = text::words(a);
  auto wb = text::words(b);
  std::set<std::string> sa(wa.begin(), wa.end()), sb(wb.begin(), wb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& w : sa) inter += sb.count(w);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

// Builds a three-layer tree from a failing generation. The result has
// valid == false. Throws DegenerateTree when no leaf yields a rule that
// names an operator.
inline OpTree build_op_tree(const LlmGateway& gw, const BackgroundNode& bg,
                            const TreeBuildOptions& opts = {}, std::string tree_id = "tree") {
  if (opts.questions_per_layer < 1) throw Error(ErrorCode::Precondition, "questions_per_layer must be >= 1");
  if (text::trim(bg.nl_spec).empty() || text::trim(bg.golden_sva).empty())
    throw Error(ErrorCode::Precondition, "background needs nl_spec and golden_sva");

  OpTree tree;
  tree.id = std::move(tree_id);
  tree.background = bg;

  auto path_text = [&](const std::optional<std::string>& parent) {
    std::vector<std::string> chain;
    for (auto p = parent; p; p = tree.nodes.at(*p).parent) chain.push_back(*p);
    std::reverse(chain.begin(), chain.end());
    std::string out;
    for (const auto& id : chain) {
      const auto& n = tree.nodes.at(id);
      out += std::string(layer_name(n.layer)) + " Q: " + n.question + "\n" +
             layer_name(n.layer) + " A: " + n.answer + "\n";
    }
    return detail::or_none(std::string(text::trim(out)));
  };

  auto ask = [&](Layer layer, const std::optional<std::string>& parent,
                 const std::vector<std::string>& asked, const std::string& rejected) {
    std::string asked_text;
    for (const auto& q : asked) asked_text += "- " + q + "\n";
    return parse_layer_reply(gw.call(PromptKind::BuildOpTreeLayer,
                                     {{"layer", layer_name(layer)},
                                      {"nl_spec", bg.nl_spec},
                                      {"design_context", detail::render_context(bg.design_context)},
                                      {"golden_sva", bg.golden_sva},
                                      {"failing_sva", detail::or_none(bg.failing_sva)},
                                      {"path", path_text(parent)},
                                      {"asked_questions", detail::or_none(std::string(text::trim(asked_text)))},
                                      {"rejected_question", detail::or_none(rejected)}}));
  };

  auto max_overlap = [](const std::string& q, const std::vector<std::string>& asked) {
    double m = 0.0;
    for (const auto& a : asked) m = std::max(m, token_jaccard(q, a));
    return m;
  };

  const char prefix[] = {'d', 'g', 'r'};
  std::vector<std::optional<std::string>> parents = {std::nullopt};
  for (Layer layer : {Layer::ContextualDiagnosis, Layer::TheoreticalGrounding, Layer::RuleGeneration}) {
    std::vector<std::optional<std::string>> next;
    for (const auto& parent : parents) {
      std::vector<std::string> asked;
      for (int i = 0; i < opts.questions_per_layer; ++i) {
        auto reply = ask(layer, parent, asked, "");
        if (!asked.empty()) {
          const double overlap = max_overlap(reply.question, asked);
          if (overlap > opts.diversity_threshold) {
            auto retry = ask(layer, parent, asked, reply.question);
            // Keep whichever repeats less; the retry wins ties.
            if (max_overlap(retry.question, asked) <= overlap) reply = std::move(retry);
          }
        }
        asked.push_back(reply.question);

        ReasoningNode node;
        node.node_id = (parent ? *parent + "." : std::string()) +
                       prefix[static_cast<int>(layer) - 1] + std::to_string(i + 1);
        node.layer = layer;
        node.question = reply.question;
        node.answer = reply.answer;
        node.parent = parent;
        if (layer == Layer::RuleGeneration) {
          auto rule = OpRule::from_directive(reply.rule ? *reply.rule : reply.answer);
          if (rule.target_operators.empty()) continue;  // pruned leaf
          node.rule = std::move(rule);
        }
        next.push_back(node.node_id);
        tree.add_node(std::move(node));
      }
    }
    parents = std::move(next);
  }

  // Drop inner nodes left without children by leaf pruning, bottom up.
  for (Layer layer : {Layer::TheoreticalGrounding, Layer::ContextualDiagnosis}) {
    std::vector<std::string> dead;
    for (const auto& [id, n] : tree.nodes)
      if (n.layer == layer && tree.children_of(id).empty()) dead.push_back(id);
    for (const auto& id : dead) {
      tree.nodes.erase(id);
      tree.root_ids.erase(std::remove(tree.root_ids.begin(), tree.root_ids.end(), id), tree.root_ids.end());
    }
  }
  if (tree.nodes.empty())
    throw Error(ErrorCode::DegenerateTree, "no leaf produced a rule naming an operator");
  return tree;
}

// ---- judging and adaptation ----------------------------------------------

// First decimal in the reply, clamped to [0, 1]. Throws UnparseableJudgment.
inline double parse_judgment(std::string_view reply) {
  static const std::regex number(R"(-?(\d+(\.\d*)?|\.\d+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(reply.begin(), reply.end(), m, number))
    throw Error(ErrorCode::UnparseableJudgment, "judge reply has no number");
  return std::clamp(std::stod(m.str()), 0.0, 1.0);
}

inline double judge_applicability(const LlmGateway& gw, const ReasoningTrace& trace,
                                  std::string_view nl_spec) {
  return parse_judgment(gw.call(PromptKind::JudgeApplicability,
                                {{"nl_spec", std::string(nl_spec)}, {"trace", trace.flattened_text}}));
}

// Informal meaning of every canonical operator, embedded in adaptation
// prompts.
inline std::string operator_definitions() {
  static const std::vector<std::pair<std::string, std::string>> defs = {
      {"|->", "overlapping implication: when the antecedent sequence matches, the consequent is checked starting in the same cycle as the match ends"},
      {"|=>", "non-overlapping implication: the consequent is checked starting one cycle after the antecedent match ends"},
      {"##m", "fixed cycle delay: the next element starts exactly m cycles later"},
      {"[m:n]", "ranged delay ##[m:n]: the next element starts between m and n cycles later"},
      {"$past", "$past(e, d): value of e d cycles earlier (default 1)"},
      {"$rose", "$rose(e): e is 1 now and was 0 in the previous cycle"},
      {"$fell", "$fell(e): e is 0 now and was 1 in the previous cycle"},
      {"$stable", "$stable(e): e has the same value as in the previous cycle"},
      {"s_eventually", "s_eventually p: p must hold at some present or future cycle"},
      {"s_always", "s_always p: p must hold at every present and future cycle"},
      {"strong", "strong(s): the sequence s must complete; an unfinished match fails"},
      {"&&", "logical and"},
      {"||", "logical or"},
      {"!", "logical negation"},
      {"==", "equality"},
      {"!==", "inequality (also written !=)"},
      {"^", "exclusive or"},
      {"@(posedge)", "sample signals on the rising clock edge"},
      {"@(negedge)", "sample signals on the falling clock edge"},
      {"@()", "clocking event"},
      {"disable iff", "disable iff (c): the check is abandoned while c holds"},
  };
  std::string out;
  for (const auto& [tok, def] : defs) {
    const auto cat = Lexicon::builtin().category_of(tok);
    out += tok + " [" + (cat ? category_name(*cat) : "") + "]: " + def + "\n";
  }
  return out;
}

inline std::vector<OpRule> parse_rules(std::string_view reply) {
  std::vector<std::string> lines;
  bool marked = false;
  for (const auto& raw : text::split_lines(reply)) {
    auto line = std::string(text::trim(raw));
    while (!line.empty() && (line.front() == '-' || line.front() == '*')) line = std::string(text::trim(line.substr(1)));
    if (text::starts_with_icase(line, "rule")) {
      const auto colon = line.find(':');
      if (colon != std::string::npos && colon < 10) {
        if (!marked) lines.clear();
        marked = true;
        lines.push_back(std::string(text::trim(std::string_view(line).substr(colon + 1))));
        continue;
      }
    }
    if (!marked && !line.empty() && line.find("```") == std::string::npos) lines.push_back(line);
  }
  std::vector<OpRule> out;
  std::set<std::string> seen;
  for (auto& l : lines) {
    auto rule = OpRule::from_directive(l);
    if (rule.target_operators.empty() || !seen.insert(rule.directive).second) continue;
    out.push_back(std::move(rule));
  }
  return out;
}

// Adapts masked traces to a new specification. Throws EmptyRuleSet when
// there is nothing to adapt or the reply holds no usable rule, and
// Precondition when a trace is not abstracted.
inline std::vector<OpRule> adapt_rules(const LlmGateway& gw, std::string_view nl_spec,
                                       const std::vector<SignalDecl>& design_context,
                                       const std::vector<ReasoningTrace>& masked_traces) {
  if (masked_traces.empty()) throw Error(ErrorCode::EmptyRuleSet, "no traces to adapt");
  for (const auto& t : masked_traces)
    if (!t.rule.abstracted)
      throw Error(ErrorCode::Precondition, "trace from '" + t.tree_id + "' is not abstracted");
  std::string traces;
  for (std::size_t i = 0; i < masked_traces.size(); ++i)
    traces += "Trace " + std::to_string(i + 1) + ":\n" + masked_traces[i].flattened_text + "\n";
  auto rules = parse_rules(gw.call(PromptKind::AdaptRules,
                                   {{"nl_spec", std::string(nl_spec)},
                                    {"design_context", detail::render_context(design_context)},
                                    {"traces", std::string(text::trim(traces))},
                                    {"operator_definitions", operator_definitions()}}));
  if (rules.empty()) throw Error(ErrorCode::EmptyRuleSet, "adaptation produced no rule naming an operator");
  return rules;
}

}  // namespace fvrule
