#pragma once

// Operator reasoning trees.
//
// A tree hangs off a background node (the failing training item) and holds
// three layers of question/answer nodes: contextual diagnosis, theoretical
// grounding and rule generation. Every leaf sits on the rule layer and
// carries one OpRule. A root-to-leaf path is a ReasoningTrace.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fvrule/dataset.hpp"
#include "fvrule/errors.hpp"
#include "fvrule/lexicon.hpp"
#include "fvrule/sva_parser.hpp"

namespace fvrule {

enum class Layer { ContextualDiagnosis = 1, TheoreticalGrounding = 2, RuleGeneration = 3 };

inline const char* layer_name(Layer l) {
  switch (l) {
    case Layer::ContextualDiagnosis: return "ContextualDiagnosis";
    case Layer::TheoreticalGrounding: return "TheoreticalGrounding";
    case Layer::RuleGeneration: return "RuleGeneration";
  }
  return "RuleGeneration";
}

inline std::optional<Layer> parse_layer(std::string_view s) {
  for (auto l : {Layer::ContextualDiagnosis, Layer::TheoreticalGrounding, Layer::RuleGeneration})
    if (s == layer_name(l)) return l;
  return std::nullopt;
}

inline nlohmann::json operators_to_json(const OperatorSet& ops) {
  auto arr = nlohmann::json::array();
  for (const auto& op : ops) arr.push_back(op.token);
  return arr;
}

inline OperatorSet operators_from_json(const nlohmann::json& j, const Lexicon& lex = Lexicon::builtin()) {
  OperatorSet out;
  if (!j.is_array()) throw Error(ErrorCode::Schema, "operator list must be an array");
  for (const auto& t : j) {
    if (!t.is_string()) throw Error(ErrorCode::Schema, "operator tokens must be strings");
    auto op = lex.canonicalize(t.get<std::string>());
    if (!op) throw Error(ErrorCode::Schema, "unknown operator '" + t.get<std::string>() + "'");
    out.insert(*op);
  }
  return out;
}

struct OpRule {
  std::string directive;
  OperatorSet target_operators;  // non-empty
  bool abstracted = false;

  static OpRule from_directive(std::string directive) {
    OpRule r;
    r.target_operators = extract_operators(directive);
    r.directive = std::move(directive);
    return r;
  }

  nlohmann::json to_json() const {
    return {{"directive", directive},
            {"target_operators", operators_to_json(target_operators)},
            {"abstracted", abstracted}};
  }

  static OpRule from_json(const nlohmann::json& j) {
    OpRule r;
    r.directive = j.at("directive").get<std::string>();
    r.target_operators = operators_from_json(j.at("target_operators"));
    r.abstracted = j.value("abstracted", false);
    if (r.target_operators.empty()) throw Error(ErrorCode::Schema, "rule names no operators");
    return r;
  }

  friend bool operator==(const OpRule&, const OpRule&) = default;
};

struct BackgroundNode {
  std::string nl_spec;
  std::vector<SignalDecl> design_context;
  std::string golden_sva;
  std::string failing_sva;

  nlohmann::json to_json() const {
    return {{"nl_spec", nl_spec},
            {"design_context", fvrule::to_json(design_context)},
            {"golden_sva", golden_sva},
            {"failing_sva", failing_sva}};
  }

  static BackgroundNode from_json(const nlohmann::json& j) {
    BackgroundNode b;
    b.nl_spec = j.at("nl_spec").get<std::string>();
    b.golden_sva = j.at("golden_sva").get<std::string>();
    b.failing_sva = j.value("failing_sva", std::string());
    if (j.contains("design_context")) b.design_context = signals_from_json(j["design_context"]);
    if (text::trim(b.nl_spec).empty() || text::trim(b.golden_sva).empty())
      throw Error(ErrorCode::Schema, "background needs non-empty nl_spec and golden_sva");
    return b;
  }

  friend bool operator==(const BackgroundNode&, const BackgroundNode&) = default;
};

struct ReasoningNode {
  std::string node_id;
  Layer layer = Layer::ContextualDiagnosis;
  std::string question;
  std::string answer;
  OperatorSet operator_tags;  // always Φ(answer)
  std::optional<std::string> parent;
  std::optional<OpRule> rule;  // leaves only

  nlohmann::json to_json() const {
    nlohmann::json j = {{"node_id", node_id},
                        {"layer", layer_name(layer)},
                        {"question", question},
                        {"answer", answer},
                        {"operator_tags", operators_to_json(operator_tags)},
                        {"parent", parent ? nlohmann::json(*parent) : nlohmann::json(nullptr)}};
    if (rule) j["rule"] = rule->to_json();
    return j;
  }

  static ReasoningNode from_json(const nlohmann::json& j) {
    ReasoningNode n;
    n.node_id = j.at("node_id").get<std::string>();
    auto layer = parse_layer(j.at("layer").get<std::string>());
    if (!layer) throw Error(ErrorCode::Schema, "unknown layer for node '" + n.node_id + "'");
    n.layer = *layer;
    n.question = j.value("question", std::string());
    n.answer = j.value("answer", std::string());
    // Stored tags are ignored; the current lexicon decides.
    n.operator_tags = extract_operators(n.answer);
    if (j.contains("parent") && !j["parent"].is_null()) n.parent = j["parent"].get<std::string>();
    if (j.contains("rule") && !j["rule"].is_null()) n.rule = OpRule::from_json(j["rule"]);
    return n;
  }

  friend bool operator==(const ReasoningNode&, const ReasoningNode&) = default;
};

struct TreeProvenance {
  std::string dataset;
  std::string item_id;
  // Rules fed to the regeneration that validated this tree, in prompt order.
  std::vector<OpRule> validated_rules;

  friend bool operator==(const TreeProvenance&, const TreeProvenance&) = default;
};

struct ReasoningTrace {
  std::string tree_id;
  std::vector<std::string> node_path;
  std::string flattened_text;
  OpRule rule;
  // Identifiers specific to the training item, candidates for masking.
  std::vector<std::string> instance_signals;
};

class OpTree {
 public:
  std::string id;
  BackgroundNode background;
  std::map<std::string, ReasoningNode> nodes;
  std::vector<std::string> root_ids;
  bool valid = false;  // set only by the trainer's validity check
  int created_iteration = 1;
  TreeProvenance provenance;

  void add_node(ReasoningNode n) {
    n.operator_tags = extract_operators(n.answer);
    if (!n.parent) root_ids.push_back(n.node_id);
    auto key = n.node_id;
    nodes.insert_or_assign(std::move(key), std::move(n));
  }

  std::vector<std::string> children_of(const std::string& node_id) const {
    std::vector<std::string> out;
    for (const auto& [id, n] : nodes)
      if (n.parent && *n.parent == node_id) out.push_back(id);
    return out;  // std::map order, i.e. sorted by id
  }

  std::size_t leaf_count() const {
    std::size_t n = 0;
    for (const auto& [id, node] : nodes)
      if (children_of(id).empty()) ++n;
    return n;
  }

  // Throws MalformedTree describing the first violated invariant.
  void check_structure() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::MalformedTree, why); };
    std::set<std::string> roots(root_ids.begin(), root_ids.end());
    if (roots.size() != root_ids.size()) fail("duplicate root id");
    for (const auto& r : root_ids) {
      auto it = nodes.find(r);
      if (it == nodes.end()) fail("root '" + r + "' is not a node");
      if (it->second.parent) fail("root '" + r + "' has a parent");
    }
    for (const auto& [id, n] : nodes) {
      if (n.node_id != id) fail("node key mismatch for '" + id + "'");
      if (!n.parent) {
        if (!roots.count(id)) fail("parentless node '" + id + "' is not listed as a root");
        if (n.layer != Layer::ContextualDiagnosis) fail("root '" + id + "' is not a diagnosis node");
        continue;
      }
      auto p = nodes.find(*n.parent);
      if (p == nodes.end()) fail("node '" + id + "' has unknown parent '" + *n.parent + "'");
      if (static_cast<int>(n.layer) != static_cast<int>(p->second.layer) + 1)
        fail("layer order violated at '" + id + "'");
    }
    // Walk each parent chain; any chain longer than the node count loops.
    for (const auto& [id, n] : nodes) {
      std::set<std::string> seen{id};
      const ReasoningNode* cur = &n;
      while (cur->parent) {
        if (!seen.insert(*cur->parent).second) fail("cycle through '" + id + "'");
        cur = &nodes.at(*cur->parent);
      }
    }
    for (const auto& [id, n] : nodes) {
      const bool leaf = children_of(id).empty();
      if (leaf && n.layer != Layer::RuleGeneration) fail("leaf '" + id + "' is not a rule node");
      if (leaf && !n.rule) fail("leaf '" + id + "' carries no rule");
      if (!leaf && n.rule) fail("inner node '" + id + "' carries a rule");
      if (n.rule && n.rule->target_operators.empty()) fail("rule at '" + id + "' names no operators");
    }
  }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& [id, n] : nodes) arr.push_back(n.to_json());
    auto rules = nlohmann::json::array();
    for (const auto& r : provenance.validated_rules) rules.push_back(r.to_json());
    return {{"schema_version", 1},
            {"id", id},
            {"background", background.to_json()},
            {"nodes", arr},
            {"root_ids", root_ids},
            {"valid", valid},
            {"created_iteration", created_iteration},
            {"provenance",
             {{"dataset", provenance.dataset},
              {"item_id", provenance.item_id},
              {"validated_rules", rules}}}};
  }

  static OpTree from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Schema, "tree record is not an object");
    if (j.value("schema_version", 0) != 1) throw Error(ErrorCode::Schema, "unsupported schema_version");
    OpTree t;
    try {
      t.id = j.at("id").get<std::string>();
      if (t.id.empty()) throw Error(ErrorCode::Schema, "empty tree id");
      t.background = BackgroundNode::from_json(j.at("background"));
      for (const auto& n : j.at("nodes")) {
        auto node = ReasoningNode::from_json(n);
        if (t.nodes.count(node.node_id)) throw Error(ErrorCode::Schema, "duplicate node id");
        t.nodes.emplace(node.node_id, std::move(node));
      }
      t.root_ids = j.at("root_ids").get<std::vector<std::string>>();
      t.valid = j.at("valid").get<bool>();
      t.created_iteration = j.at("created_iteration").get<int>();
      if (t.created_iteration < 1) throw Error(ErrorCode::Schema, "created_iteration must be >= 1");
      const auto& prov = j.at("provenance");
      t.provenance.dataset = prov.value("dataset", std::string());
      t.provenance.item_id = prov.value("item_id", std::string());
      if (prov.contains("validated_rules"))
        for (const auto& r : prov["validated_rules"]) t.provenance.validated_rules.push_back(OpRule::from_json(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Schema, e.what());
    }
    try {
      t.check_structure();
    } catch (const Error& e) {
      throw Error(ErrorCode::Schema, e.what());
    }
    return t;
  }

  // Identifiers tied to this tree's training item.
  std::vector<std::string> instance_signals() const {
    std::vector<std::string> out;
    auto push = [&](const std::string& s) {
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    };
    for (const auto& d : background.design_context) push(d.name);
    for (const auto& s : sva::assertion_identifiers(background.golden_sva)) push(s);
    for (const auto& s : sva::assertion_identifiers(background.failing_sva)) push(s);
    return out;
  }

  friend bool operator==(const OpTree&, const OpTree&) = default;
};

// One trace per leaf, depth first with siblings in node-id order.
// Throws MalformedTree on a cycle or a layer-order violation.
inline std::vector<ReasoningTrace> extract_traces(const OpTree& tree) {
  tree.check_structure();
  std::vector<ReasoningTrace> out;
  const auto signals = tree.instance_signals();
  std::vector<std::string> path;

  auto emit = [&](const ReasoningNode& leaf) {
    ReasoningTrace tr;
    tr.tree_id = tree.id;
    tr.node_path = path;
    tr.flattened_text = "Background: " + tree.background.nl_spec;
    for (std::size_t i = 0; i < path.size(); ++i) {
      const auto& n = tree.nodes.at(path[i]);
      const auto k = std::to_string(i + 1);
      tr.flattened_text += "\nQ" + k + ": " + n.question + "\nA" + k + ": " + n.answer;
    }
    tr.flattened_text += "\nRule: " + leaf.rule->directive;
    tr.rule = *leaf.rule;
    tr.instance_signals = signals;
    out.push_back(std::move(tr));
  };

  auto visit = [&](auto&& self, const std::string& id) -> void {
    path.push_back(id);
    auto kids = tree.children_of(id);
    if (kids.empty()) emit(tree.nodes.at(id));
    for (const auto& k : kids) self(self, k);
    path.pop_back();
  };

  auto roots = tree.root_ids;
  std::sort(roots.begin(), roots.end());
  for (const auto& r : roots) visit(visit, r);
  return out;
}

}  // namespace fvrule
