#pragma once

#include <cstdint>
#include <vector>

#include "methyl/eval.hpp"
#include "methyl/program.hpp"

namespace methyl {

// Domination convention: `a R b` ("a covers b") holds iff for every (le, k)
// comparison k(a) >= k(b), and for every (eq, k) comparison k(a) == k(b).
// Pruning keeps a minimal subset M of S with: forall s in S, exists m in M
// with m R s. With the seed comparison (le, score) this keeps top scorers.

// Survivor indices (ascending) given one key column per comparison.
// `cols[i][j]` is comparison i evaluated on element j.
// Uses a dense grid over all key dimensions but the widest `le` one when the
// cell bound fits, otherwise falls back to pairwise elimination (quadratic);
// `used_fallback` reports which path ran.
std::vector<int32_t> thin_columns(const std::vector<Comparison::Rel>& rels,
                                  const std::vector<std::vector<int64_t>>& cols, size_t n,
                                  bool* used_fallback = nullptr);

// The grid-cell bound: the product of key ranges divided by the widest `le`
// range (exactly, by omitting that factor). This is both the space cost of
// the fast pruning path and the cost objective for preorder synthesis.
// Saturates instead of overflowing. Empty input gives 1.
int64_t grid_bound(const std::vector<Comparison::Rel>& rels,
                   const std::vector<std::vector<int64_t>>& cols);

// Prune a canonically sorted solution set under a program's preorder.
std::vector<Value> thin_set(const KeywordPreorder& r, const std::vector<Value>& sols,
                            Interp& interp, bool* used_fallback = nullptr);

// Does a cover b? Key evaluation failure is a hard error.
bool preorder_holds(const KeywordPreorder& r, const Value& a, const Value& b, Interp& interp);

// As preorder_holds, but a key evaluation failure means "does not cover".
// Synthesis probes candidate keys that may be partial; a partial key then
// produces unresolvable counterexamples instead of crashing, which makes
// the search discard it.
bool preorder_covers_soft(const KeywordPreorder& r, const Value& a, const Value& b,
                          Interp& interp);

// Guaranteed upper bound on the survivor count of thin over a set with the
// given key columns: the product of key ranges (max - min, clamped to at
// least 1) with the widest `le` range left out. Saturates on overflow.
int64_t n_r_bound(const std::vector<Comparison::Rel>& rels,
                  const std::vector<std::vector<int64_t>>& cols);
int64_t n_r_bound(const KeywordPreorder& r, const std::vector<Value>& sols, Interp& interp);

// One negative example for preorder synthesis: per-slot (covering, covered)
// parent solutions. The premise — every `first` covers its `second` — held,
// yet the covered side derived a child that no child of the covering side
// dominates. A candidate comparison eliminates the example by breaking the
// premise on at least one pair. Memo-key synthesis reuses the shape with a
// single pair of states that the key must tell apart.
struct ThinCounterexample {
  std::vector<std::pair<Value, Value>> pairs;
  // Stable identity for deduplication across instances.
  Value canonical() const;
};

// A traced run paired with the instance that produced it, so key expressions
// referencing problem constants evaluate under the right bindings.
struct TracedRun {
  const TraceBundle* bundle = nullptr;
  const Instance* instance = nullptr;
};

// The synthesis cost objective: the survivor bound over the union of every
// stored per-state solution set across the runs. Returns the saturation
// value when a key fails to evaluate somewhere (partial keys rank last).
int64_t preorder_cost(const KeywordPreorder& r, const std::vector<TracedRun>& runs);

// Extracts every counterexample to pruning with `r` from one traced run:
// within each recorded (state, seed) group, for each ordered pair of slot
// assignments whose premise holds, checks that every derived child of the
// covered assignment is dominated by some child of the covering one.
// Deduplicated by canonical form; discovery order.
std::vector<ThinCounterexample> extract_thin_counterexamples(const TraceBundle& bundle,
                                                             const Instance& inst,
                                                             const KeywordPreorder& r);

}  // namespace methyl
