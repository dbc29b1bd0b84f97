#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fvrule/errors.hpp"
#include "fvrule/parallel.hpp"
#include "fvrule/sva_ast.hpp"
#include "fvrule/sva_eval.hpp"
#include "fvrule/sva_parser.hpp"

namespace fvrule::sva {

enum class Verdict {
  Equivalent,
  GoldenImpliesGenerated,  // first argument implies the second
  GeneratedImpliesGolden,  // second argument implies the first
  Incomparable,
};

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Equivalent: return "Equivalent";
    case Verdict::GoldenImpliesGenerated: return "GoldenImpliesGenerated";
    case Verdict::GeneratedImpliesGolden: return "GeneratedImpliesGolden";
    case Verdict::Incomparable: return "Incomparable";
  }
  return "Incomparable";
}

inline Verdict swap_direction(Verdict v) {
  if (v == Verdict::GoldenImpliesGenerated) return Verdict::GeneratedImpliesGolden;
  if (v == Verdict::GeneratedImpliesGolden) return Verdict::GoldenImpliesGenerated;
  return v;
}

struct EquivalenceVerdict {
  Verdict verdict = Verdict::Equivalent;
  // First trace (in enumeration order) on which the two assertions
  // disagree. Absent only for Equivalent, or for verdicts from external
  // tools that do not report witnesses.
  std::optional<Trace> counterexample;
  // For Incomparable: first disagreement of the opposite direction.
  std::optional<Trace> converse_counterexample;
  std::uint64_t traces_checked = 0;
};

struct EquivalenceOptions {
  std::size_t max_len = 5;
  std::uint64_t budget = std::uint64_t{1} << 24;
  std::size_t jobs = 1;
};

// Number of traces of length 1..max_len over n signals, or nullopt when it
// does not fit in 64 bits.
inline std::optional<std::uint64_t> enumeration_size(std::size_t n_signals, std::size_t max_len) {
  std::uint64_t total = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t bits = n_signals * len;
    if (bits >= 63) return std::nullopt;
    const std::uint64_t count = std::uint64_t{1} << bits;
    if (total > UINT64_MAX - count) return std::nullopt;
    total += count;
  }
  return total;
}

namespace detail {

// Enumeration order: by length, then by index i where the value of signal s
// at cycle c is bit (c * n + s) of i.
inline void fill_trace(Trace& t, std::uint64_t index, std::size_t n_signals) {
  const std::uint64_t mask = n_signals == 0 ? 0 : (n_signals >= 64 ? ~0ULL : ((1ULL << n_signals) - 1));
  for (std::size_t c = 0; c < t.length(); ++c) {
    t.set_cycle_bits(c, n_signals == 0 ? 0 : (index >> (c * n_signals)) & mask);
  }
}

}  // namespace detail

// Decides the relation between two assertions by evaluating both on every
// trace of length 1..max_len over `signals`.
inline EquivalenceVerdict check_equivalence(const SvaAst& a, const SvaAst& b,
                                            const std::vector<std::string>& signals,
                                            const EquivalenceOptions& opts = {}) {
  if (opts.max_len < 1 || opts.max_len > kMaxTraceLength)
    throw Error(ErrorCode::Precondition, "max_len must be in [1, 64]");
  {
    std::set<std::string> uniq(signals.begin(), signals.end());
    if (uniq.size() != signals.size())
      throw Error(ErrorCode::Precondition, "duplicate signal in signal list");
  }
  const CompiledAssertion ca(a, signals);
  const CompiledAssertion cb(b, signals);

  const auto total = enumeration_size(signals.size(), opts.max_len);
  if (!total || *total > opts.budget) throw BudgetExceeded(total.value_or(UINT64_MAX), opts.budget);

  // Global index space: lengths laid end to end.
  std::vector<std::uint64_t> offsets;
  std::uint64_t acc = 0;
  for (std::size_t len = 1; len <= opts.max_len; ++len) {
    offsets.push_back(acc);
    acc += std::uint64_t{1} << (signals.size() * len);
  }
  auto locate = [&](std::uint64_t g) {
    std::size_t li = offsets.size() - 1;
    while (offsets[li] > g) --li;
    return std::pair<std::size_t, std::uint64_t>{li + 1, g - offsets[li]};
  };
  auto make_trace = [&](std::uint64_t g) {
    auto [len, idx] = locate(g);
    Trace t(signals, len);
    detail::fill_trace(t, idx, signals.size());
    return t;
  };

  constexpr std::uint64_t kNone = UINT64_MAX;
  constexpr std::uint64_t kChunk = 4096;
  const std::uint64_t n_chunks = (acc + kChunk - 1) / kChunk;
  std::atomic<std::uint64_t> first_a_not_b{kNone};  // a holds, b fails
  std::atomic<std::uint64_t> first_b_not_a{kNone};
  std::atomic<std::uint64_t> checked{0};

  auto lower = [](std::atomic<std::uint64_t>& slot, std::uint64_t v) {
    auto cur = slot.load();
    while (v < cur && !slot.compare_exchange_weak(cur, v)) {
    }
  };

  auto run_chunk = [&](std::size_t chunk) {
    const std::uint64_t begin = chunk * kChunk;
    const std::uint64_t end = std::min(acc, begin + kChunk);
    if (begin > first_a_not_b.load() && begin > first_b_not_a.load()) return;
    std::size_t cur_len = 0;
    Trace t;
    std::uint64_t local = 0;
    for (std::uint64_t g = begin; g < end; ++g) {
      auto [len, idx] = locate(g);
      if (len != cur_len) {
        t = Trace(signals, len);
        cur_len = len;
      }
      detail::fill_trace(t, idx, signals.size());
      const bool ha = ca.holds(t);
      const bool hb = cb.holds(t);
      ++local;
      if (ha && !hb) lower(first_a_not_b, g);
      if (hb && !ha) lower(first_b_not_a, g);
      if (first_a_not_b.load() <= g && first_b_not_a.load() <= g) break;
    }
    checked += local;
  };

  if (opts.jobs <= 1) {
    for (std::uint64_t c = 0; c < n_chunks; ++c) {
      run_chunk(static_cast<std::size_t>(c));
      if (first_a_not_b.load() != kNone && first_b_not_a.load() != kNone) break;
    }
  } else {
    parallel_for(static_cast<std::size_t>(n_chunks), opts.jobs, run_chunk);
  }

  EquivalenceVerdict out;
  out.traces_checked = checked.load();
  const auto ab = first_a_not_b.load();
  const auto ba = first_b_not_a.load();
  if (ab == kNone && ba == kNone) {
    out.verdict = Verdict::Equivalent;
  } else if (ab == kNone) {
    out.verdict = Verdict::GoldenImpliesGenerated;
    out.counterexample = make_trace(ba);
  } else if (ba == kNone) {
    out.verdict = Verdict::GeneratedImpliesGolden;
    out.counterexample = make_trace(ab);
  } else {
    out.verdict = Verdict::Incomparable;
    out.counterexample = make_trace(std::min(ab, ba));
    out.converse_counterexample = make_trace(std::max(ab, ba));
  }
  return out;
}

struct SyntaxCheckResult {
  bool ok = false;
  // Set when the text is legal but uses constructs outside the evaluated
  // subset.
  std::optional<std::string> unsupported;
  std::string message;
  std::size_t position = 0;

  explicit operator bool() const { return ok; }
};

// Syntax gate: malformed text fails, out-of-subset but legal text passes.
inline SyntaxCheckResult syntax_check(std::string_view source) {
  SyntaxCheckResult r;
  try {
    auto ast = parse_sva_lenient(source);
    r.ok = true;
    if (const auto* u = find_unsupported(ast)) {
      r.unsupported = u->name;
      r.position = u->position;
    }
  } catch (const SyntaxError& e) {
    r.ok = false;
    r.message = e.what();
    r.position = e.position();
  }
  return r;
}

// Decides how a generated assertion relates to a golden one.
class EquivalenceOracle {
 public:
  virtual ~EquivalenceOracle() = default;
  // May throw SyntaxError / UnsupportedConstruct for either side,
  // BudgetExceeded, or tool errors.
  virtual EquivalenceVerdict compare(std::string_view golden, std::string_view generated) const = 0;
  virtual std::string name() const = 0;
};

class BoundedOracle : public EquivalenceOracle {
 public:
  explicit BoundedOracle(EquivalenceOptions opts = {}) : opts_(opts) {}

  EquivalenceVerdict compare(std::string_view golden, std::string_view generated) const override {
    auto g = parse_sva(golden);
    auto p = parse_sva(generated);
    std::set<std::string> all;
    for (auto& s : referenced_signals(g)) all.insert(s);
    for (auto& s : referenced_signals(p)) all.insert(s);
    return check_equivalence(g, p, {all.begin(), all.end()}, opts_);
  }

  std::string name() const override { return "bounded"; }
  const EquivalenceOptions& options() const { return opts_; }

 private:
  EquivalenceOptions opts_;
};

}  // namespace fvrule::sva
