#pragma once

// Assertion syntax tree.
//
// Nodes are immutable and shared. Three shapes nest inside each other:
// boolean expressions, sequences (booleans joined by cycle delays) and
// properties (implications and liveness wrappers). A leading delay
// `##[m:n] s` is a Delay node; `l ##[m:n] r` is SeqConcat(l, Delay(m,n,r)),
// so a Delay always means "its child starts m..n cycles after the anchor".
//
// Constructs that parse as legal SVA but lie outside the evaluated subset
// become Unsupported nodes carrying their source text.

#include <algorithm>
#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fvrule::sva {

enum class NodeKind {
  Signal,
  Const,
  Not,
  And,
  Or,
  Xor,
  Eq,
  Neq,
  Past,
  Rose,
  Fell,
  Stable,
  Delay,
  SeqConcat,
  ImplOverlap,
  ImplNonOverlap,
  SEventually,
  SAlways,
  Strong,
  Unsupported,
};

enum class Shape { Boolean, Sequence, Property };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind = NodeKind::Const;
  Shape shape = Shape::Boolean;
  std::string name;  // signal name, or construct label for Unsupported
  std::string raw;   // source text of Unsupported nodes
  bool value = false;
  int min = 0;  // delay lower bound, or $past depth
  int max = 0;  // delay upper bound
  std::vector<NodePtr> children;
  std::size_t position = 0;
};

struct Clocking {
  std::string edge;  // "posedge", "negedge" or empty
  std::string clock;

  friend bool operator==(const Clocking&, const Clocking&) = default;
};

struct SvaAst {
  std::optional<Clocking> clocking;
  NodePtr disable_guard;  // may be null
  NodePtr property;
};

inline bool is_boolean_kind(NodeKind k) {
  switch (k) {
    case NodeKind::Signal:
    case NodeKind::Const:
    case NodeKind::Not:
    case NodeKind::And:
    case NodeKind::Or:
    case NodeKind::Xor:
    case NodeKind::Eq:
    case NodeKind::Neq:
    case NodeKind::Past:
    case NodeKind::Rose:
    case NodeKind::Fell:
    case NodeKind::Stable:
      return true;
    default:
      return false;
  }
}

// ---- construction -------------------------------------------------------

namespace make {

inline NodePtr node(NodeKind kind, Shape shape, std::vector<NodePtr> children = {},
                    std::size_t pos = 0) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->shape = shape;
  n->children = std::move(children);
  n->position = pos;
  return n;
}

inline NodePtr signal(std::string name, std::size_t pos = 0) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Signal;
  n->shape = Shape::Boolean;
  n->name = std::move(name);
  n->position = pos;
  return n;
}

inline NodePtr constant(bool v, std::size_t pos = 0) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Const;
  n->value = v;
  n->position = pos;
  return n;
}

inline NodePtr unary(NodeKind kind, NodePtr child, std::size_t pos = 0) {
  return node(kind, Shape::Boolean, {std::move(child)}, pos);
}

inline NodePtr binary(NodeKind kind, NodePtr l, NodePtr r, std::size_t pos = 0) {
  return node(kind, Shape::Boolean, {std::move(l), std::move(r)}, pos);
}

inline NodePtr past(NodePtr child, int depth, std::size_t pos = 0) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Past;
  n->shape = Shape::Boolean;
  n->min = depth;
  n->children = {std::move(child)};
  n->position = pos;
  return n;
}

inline NodePtr delay(int lo, int hi, NodePtr child, std::size_t pos = 0) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Delay;
  n->shape = Shape::Sequence;
  n->min = lo;
  n->max = hi;
  n->children = {std::move(child)};
  n->position = pos;
  return n;
}

inline NodePtr concat(NodePtr lhs, NodePtr delayed, std::size_t pos = 0) {
  return node(NodeKind::SeqConcat, Shape::Sequence, {std::move(lhs), std::move(delayed)}, pos);
}

inline NodePtr implication(bool overlapping, NodePtr antecedent, NodePtr consequent,
                           std::size_t pos = 0) {
  return node(overlapping ? NodeKind::ImplOverlap : NodeKind::ImplNonOverlap, Shape::Property,
              {std::move(antecedent), std::move(consequent)}, pos);
}

inline NodePtr unsupported(std::string construct, std::string raw, Shape shape,
                           std::vector<NodePtr> children, std::size_t pos) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Unsupported;
  n->shape = shape;
  n->name = std::move(construct);
  n->raw = std::move(raw);
  n->children = std::move(children);
  n->position = pos;
  return n;
}

}  // namespace make

// ---- queries ------------------------------------------------------------

inline bool structurally_equal(const NodePtr& a, const NodePtr& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind || a->name != b->name || a->value != b->value || a->min != b->min ||
      a->max != b->max || a->children.size() != b->children.size())
    return false;
  if (a->kind == NodeKind::Unsupported && a->raw != b->raw) return false;
  for (std::size_t i = 0; i < a->children.size(); ++i)
    if (!structurally_equal(a->children[i], b->children[i])) return false;
  return true;
}

inline bool structurally_equal(const SvaAst& a, const SvaAst& b) {
  return a.clocking == b.clocking && structurally_equal(a.disable_guard, b.disable_guard) &&
         structurally_equal(a.property, b.property);
}

inline void collect_signals(const NodePtr& n, std::set<std::string>& out) {
  if (!n) return;
  if (n->kind == NodeKind::Signal) out.insert(n->name);
  for (const auto& c : n->children) collect_signals(c, out);
}

// Signals the assertion reads, excluding the clock.
inline std::vector<std::string> referenced_signals(const SvaAst& ast) {
  std::set<std::string> out;
  collect_signals(ast.disable_guard, out);
  collect_signals(ast.property, out);
  return {out.begin(), out.end()};
}

inline const Node* find_unsupported(const NodePtr& n) {
  if (!n) return nullptr;
  if (n->kind == NodeKind::Unsupported) return n.get();
  for (const auto& c : n->children)
    if (auto* u = find_unsupported(c)) return u;
  return nullptr;
}

inline const Node* find_unsupported(const SvaAst& ast) {
  if (auto* u = find_unsupported(ast.disable_guard)) return u;
  return find_unsupported(ast.property);
}

// ---- printing -----------------------------------------------------------

namespace detail {

// Binding strength; higher binds tighter.
inline int precedence(const Node& n) {
  switch (n.kind) {
    case NodeKind::SEventually:
    case NodeKind::SAlways:
      return 0;
    case NodeKind::ImplOverlap:
    case NodeKind::ImplNonOverlap:
      return 1;
    case NodeKind::Delay:
    case NodeKind::SeqConcat:
      return 2;
    case NodeKind::Or: return 3;
    case NodeKind::And: return 4;
    case NodeKind::Xor: return 5;
    case NodeKind::Eq:
    case NodeKind::Neq:
      return 6;
    case NodeKind::Not: return 7;
    case NodeKind::Unsupported: return n.shape == Shape::Boolean ? 8 : 0;
    default: return 8;
  }
}

inline std::string delay_text(const Node& d) {
  if (d.min == d.max) return "##" + std::to_string(d.min);
  return "##[" + std::to_string(d.min) + ":" + std::to_string(d.max) + "]";
}

inline std::string print(const NodePtr& n, int ctx);

inline std::string print_binary(const Node& n, const char* op, int lctx, int rctx) {
  return print(n.children[0], lctx) + " " + op + " " + print(n.children[1], rctx);
}

inline std::string print_bare(const Node& n) {
  switch (n.kind) {
    case NodeKind::Signal: return n.name;
    case NodeKind::Const: return n.value ? "1'b1" : "1'b0";
    case NodeKind::Not: return "!" + print(n.children[0], 7);
    case NodeKind::And: return print_binary(n, "&&", 4, 5);
    case NodeKind::Or: return print_binary(n, "||", 3, 4);
    case NodeKind::Xor: return print_binary(n, "^", 5, 6);
    case NodeKind::Eq: return print_binary(n, "==", 6, 7);
    case NodeKind::Neq: return print_binary(n, "!=", 6, 7);
    case NodeKind::Past:
      return "$past(" + print(n.children[0], 0) +
             (n.min == 1 ? std::string() : ", " + std::to_string(n.min)) + ")";
    case NodeKind::Rose: return "$rose(" + print(n.children[0], 0) + ")";
    case NodeKind::Fell: return "$fell(" + print(n.children[0], 0) + ")";
    case NodeKind::Stable: return "$stable(" + print(n.children[0], 0) + ")";
    case NodeKind::Delay: return delay_text(n) + " " + print(n.children[0], 3);
    case NodeKind::SeqConcat: {
      const auto& d = *n.children[1];
      return print(n.children[0], 2) + " " + delay_text(d) + " " + print(d.children[0], 3);
    }
    case NodeKind::ImplOverlap: return print_binary(n, "|->", 2, 0);
    case NodeKind::ImplNonOverlap: return print_binary(n, "|=>", 2, 0);
    case NodeKind::SEventually: return "s_eventually " + print(n.children[0], 0);
    case NodeKind::SAlways: return "s_always " + print(n.children[0], 0);
    case NodeKind::Strong: return "strong(" + print(n.children[0], 0) + ")";
    case NodeKind::Unsupported: return n.raw;
  }
  return {};
}

inline std::string print(const NodePtr& n, int ctx) {
  auto s = print_bare(*n);
  return precedence(*n) < ctx ? "(" + s + ")" : s;
}

}  // namespace detail

inline std::string to_string(const NodePtr& n) { return n ? detail::print(n, 0) : std::string(); }

inline std::string to_string(const SvaAst& ast) {
  std::string out;
  if (ast.clocking) {
    out += "@(";
    if (!ast.clocking->edge.empty()) out += ast.clocking->edge + " ";
    out += ast.clocking->clock + ") ";
  }
  if (ast.disable_guard) out += "disable iff (" + to_string(ast.disable_guard) + ") ";
  out += to_string(ast.property);
  return out;
}

}  // namespace fvrule::sva
