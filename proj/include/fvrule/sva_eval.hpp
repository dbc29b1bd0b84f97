#pragma once

// Finite-trace evaluation of the assertion subset. SEMANTICS.md at the
// repository root is the normative description; in short:
//
//  * The property is checked at every start cycle (implicit always).
//  * `|->` checks the consequent at the antecedent's end cycle, `|=>` one
//    cycle later. An antecedent that cannot complete inside the trace does
//    not match.
//  * Obligations are strong: a sequence or property that would need cycles
//    past the end of the trace fails. s_eventually needs a witness inside
//    the trace; s_always needs every remaining cycle.
//  * Any boolean expression read before cycle 0 is false, which fixes the
//    pre-history of $past, $rose, $fell and $stable.
//  * `disable iff (g)`: the attempt starting at t passes if g holds at some
//    cycle in [t, t + horizon], where horizon is the property's static
//    look-ahead (unbounded for s_eventually/s_always), clipped to the trace.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fvrule/errors.hpp"
#include "fvrule/sva_ast.hpp"

namespace fvrule::sva {

inline constexpr std::size_t kMaxTraceLength = 64;
inline constexpr std::size_t kMaxTraceSignals = 64;

// Boolean signal values sampled at successive clock edges.
class Trace {
 public:
  Trace() = default;

  Trace(std::vector<std::string> signals, std::size_t length)
      : signals_(std::move(signals)), cycles_(length, 0) {
    if (length < 1 || length > kMaxTraceLength)
      throw Error(ErrorCode::Precondition,
                  "trace length must be in [1, " + std::to_string(kMaxTraceLength) + "]");
    if (signals_.size() > kMaxTraceSignals)
      throw Error(ErrorCode::Precondition, "too many signals in trace");
    for (std::size_t i = 0; i < signals_.size(); ++i)
      for (std::size_t j = i + 1; j < signals_.size(); ++j)
        if (signals_[i] == signals_[j])
          throw Error(ErrorCode::Precondition, "duplicate signal '" + signals_[i] + "'");
  }

  // One row of values per signal, all rows the same length.
  static Trace from_rows(std::vector<std::string> signals,
                         const std::vector<std::vector<int>>& rows) {
    if (rows.size() != signals.size())
      throw Error(ErrorCode::Precondition, "one value row per signal required");
    const std::size_t len = rows.empty() ? 1 : rows.front().size();
    Trace t(std::move(signals), len);
    for (std::size_t s = 0; s < rows.size(); ++s) {
      if (rows[s].size() != len)
        throw Error(ErrorCode::Precondition, "every cycle must assign every signal");
      for (std::size_t c = 0; c < len; ++c) t.set(s, c, rows[s][c] != 0);
    }
    return t;
  }

  const std::vector<std::string>& signals() const { return signals_; }
  std::size_t length() const { return cycles_.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < signals_.size(); ++i)
      if (signals_[i] == name) return i;
    return std::nullopt;
  }

  bool value(std::size_t signal, std::size_t cycle) const {
    return ((cycles_[cycle] >> signal) & 1U) != 0;
  }

  void set(std::size_t signal, std::size_t cycle, bool v) {
    const std::uint64_t bit = std::uint64_t{1} << signal;
    cycles_[cycle] = v ? (cycles_[cycle] | bit) : (cycles_[cycle] & ~bit);
  }

  // Packed row for one cycle: bit s is signal s.
  std::uint64_t cycle_bits(std::size_t cycle) const { return cycles_[cycle]; }
  void set_cycle_bits(std::size_t cycle, std::uint64_t bits) { cycles_[cycle] = bits; }

  // "req=[1,0] gnt=[1,0]"
  std::string to_string() const {
    std::string out;
    for (std::size_t s = 0; s < signals_.size(); ++s) {
      if (s) out += ' ';
      out += signals_[s] + "=[";
      for (std::size_t c = 0; c < length(); ++c) {
        if (c) out += ',';
        out += value(s, c) ? '1' : '0';
      }
      out += ']';
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t s = 0; s < signals_.size(); ++s) {
      std::vector<int> row;
      for (std::size_t c = 0; c < length(); ++c) row.push_back(value(s, c) ? 1 : 0);
      j[signals_[s]] = row;
    }
    return j;
  }

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  std::vector<std::string> signals_;
  std::vector<std::uint64_t> cycles_;
};

// An assertion bound to a fixed signal ordering, ready for repeated
// evaluation against traces over exactly those signals.
class CompiledAssertion {
 public:
  CompiledAssertion(const SvaAst& ast, const std::vector<std::string>& signals) {
    if (const auto* u = find_unsupported(ast)) throw UnsupportedConstruct(u->name, u->position);
    for (std::size_t i = 0; i < signals.size(); ++i) index_[signals[i]] = i;
    root_ = compile(ast.property);
    if (ast.disable_guard) guard_ = compile(ast.disable_guard);
    horizon_ = horizon(root_);
  }

  // Safe to call concurrently on one instance.
  bool holds(const Trace& trace) const {
    Run run{*this, trace, static_cast<int>(trace.length())};
    for (int t = 0; t < run.len_; ++t) {
      if (run.disabled(t)) continue;
      if (!run.prop(root_, t)) return false;
    }
    return true;
  }

 private:
  struct CNode {
    NodeKind kind;
    std::size_t signal = 0;
    bool value = false;
    int min = 0;
    int max = 0;
    int a = -1;  // child indices into nodes_
    int b = -1;
  };

  static constexpr long long kUnbounded = std::numeric_limits<int>::max();

  int compile(const NodePtr& n) {
    CNode c{n->kind};
    c.value = n->value;
    c.min = n->min;
    c.max = n->max;
    if (n->kind == NodeKind::Signal) {
      auto it = index_.find(n->name);
      if (it == index_.end())
        throw Error(ErrorCode::UnknownSignal, "signal '" + n->name + "' is not in the trace");
      c.signal = it->second;
    }
    if (!n->children.empty()) c.a = compile(n->children[0]);
    if (n->children.size() > 1) c.b = compile(n->children[1]);
    nodes_.push_back(c);
    return static_cast<int>(nodes_.size()) - 1;
  }

  long long horizon(int i) const {
    const auto& n = nodes_[i];
    auto sat = [](long long x) { return std::min(x, kUnbounded); };
    switch (n.kind) {
      case NodeKind::Delay: return sat(n.max + horizon(n.a));
      case NodeKind::SeqConcat: return sat(horizon(n.a) + horizon(n.b));
      case NodeKind::Strong: return horizon(n.a);
      case NodeKind::ImplOverlap: return sat(horizon(n.a) + horizon(n.b));
      case NodeKind::ImplNonOverlap: return sat(horizon(n.a) + 1 + horizon(n.b));
      case NodeKind::SEventually:
      case NodeKind::SAlways:
        return kUnbounded;
      default:
        return 0;  // booleans occupy a single cycle
    }
  }

  struct Run {
    const CompiledAssertion& self_;
    const Trace& trace_;
    int len_;

    bool disabled(int t) const {
      if (self_.guard_ < 0) return false;
      const long long last = std::min<long long>(len_ - 1, t + self_.horizon_);
      for (long long c = t; c <= last; ++c)
        if (boolean(self_.guard_, static_cast<int>(c))) return true;
      return false;
    }

    bool boolean(int i, int t) const {
      if (t < 0 || t >= len_) return false;
      const auto& n = self_.nodes_[i];
      switch (n.kind) {
        case NodeKind::Signal: return trace_.value(n.signal, static_cast<std::size_t>(t));
        case NodeKind::Const: return n.value;
        case NodeKind::Not: return !boolean(n.a, t);
        case NodeKind::And: return boolean(n.a, t) && boolean(n.b, t);
        case NodeKind::Or: return boolean(n.a, t) || boolean(n.b, t);
        case NodeKind::Xor: return boolean(n.a, t) != boolean(n.b, t);
        case NodeKind::Eq: return boolean(n.a, t) == boolean(n.b, t);
        case NodeKind::Neq: return boolean(n.a, t) != boolean(n.b, t);
        case NodeKind::Past: return boolean(n.a, t - n.min);
        case NodeKind::Rose: return boolean(n.a, t) && !boolean(n.a, t - 1);
        case NodeKind::Fell: return !boolean(n.a, t) && boolean(n.a, t - 1);
        case NodeKind::Stable: return boolean(n.a, t) == boolean(n.a, t - 1);
        default: return false;
      }
    }

    // Bit e set iff a match of sequence i starting (anchored) at t ends at e.
    std::uint64_t ends(int i, int t) const {
      if (t < 0 || t >= len_) return 0;
      const auto& n = self_.nodes_[i];
      switch (n.kind) {
        case NodeKind::Delay: {
          std::uint64_t out = 0;
          for (long long d = n.min; d <= n.max && t + d < len_; ++d)
            out |= ends(n.a, static_cast<int>(t + d));
          return out;
        }
        case NodeKind::SeqConcat: {
          std::uint64_t out = 0;
          std::uint64_t lhs = ends(n.a, t);
          while (lhs) {
            const int e = __builtin_ctzll(lhs);
            lhs &= lhs - 1;
            out |= ends(n.b, e);
          }
          return out;
        }
        case NodeKind::Strong: return ends(n.a, t);
        default:
          return boolean(i, t) ? (std::uint64_t{1} << t) : 0;
      }
    }

    bool prop(int i, int t) const {
      if (t < 0 || t >= len_) return false;
      const auto& n = self_.nodes_[i];
      switch (n.kind) {
        case NodeKind::ImplOverlap:
        case NodeKind::ImplNonOverlap: {
          const int shift = n.kind == NodeKind::ImplOverlap ? 0 : 1;
          std::uint64_t m = ends(n.a, t);
          while (m) {
            const int e = __builtin_ctzll(m);
            m &= m - 1;
            if (!prop(n.b, e + shift)) return false;
          }
          return true;
        }
        case NodeKind::SEventually:
          for (int u = t; u < len_; ++u)
            if (prop(n.a, u)) return true;
          return false;
        case NodeKind::SAlways:
          for (int u = t; u < len_; ++u)
            if (!prop(n.a, u)) return false;
          return true;
        default:
          return ends(i, t) != 0;
      }
    }
  };

  std::unordered_map<std::string, std::size_t> index_;
  std::vector<CNode> nodes_;
  int root_ = -1;
  int guard_ = -1;
  long long horizon_ = 0;
};

// True iff the assertion holds on the trace.
inline bool eval_assertion(const SvaAst& ast, const Trace& trace) {
  return CompiledAssertion(ast, trace.signals()).holds(trace);
}

}  // namespace fvrule::sva
