#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "methyl/grammar.hpp"
#include "methyl/program.hpp"
#include "methyl/thinning.hpp"

namespace methyl {

// One preorder-inference problem, expressed through callbacks so the two
// callers share the search machinery:
//   - pruning preorders: seed {(le, scorer)}, rels {le, eq}; refresh
//     re-extracts counterexamples from cached traces under the candidate;
//     cost is the traced key-range product;
//   - memo keys: empty seed, rels {eq}; refresh filters a fixed list of
//     state pairs down to those the candidate still fails to tell apart;
//     cost counts distinct key tuples over traced states.
struct PreorderSynthTask {
  std::vector<Comparison> seed;
  std::vector<Comparison::Rel> rels;
  std::function<std::vector<ThinCounterexample>(const KeywordPreorder&)> refresh;
  std::function<int64_t(const KeywordPreorder&)> cost;
  std::chrono::steady_clock::time_point deadline{};  // epoch = none
};

// True when the pair breaks the comparison: both keys evaluate to ints and
// the relation fails. A key failure is indeterminate, never a violation.
bool comparison_violated(const Comparison& c, const Value& a, const Value& b, Interp& interp);

// A comparison eliminates an example iff it violates some pair in it.
bool falsifies(const Comparison& c, const ThinCounterexample& e, Interp& interp);

// Unary integer keys over `subject`, smallest terms first, each term paired
// with every requested relation in order, truncated to `limit` comparisons.
// Keys that ignore the subject are skipped: they cannot tell values apart.
// `exhausted` (optional) reports that the grammar offered nothing beyond the
// returned pool, so a larger limit cannot add candidates.
std::vector<Comparison> comparison_pool(const Type& subject, const GrammarConfig& cfg,
                                        const std::vector<Comparison::Rel>& rels, int64_t limit,
                                        bool* exhausted = nullptr);

// Two-stage candidate filter. Stage 1 samples lim*8 examples with
// replacement and keeps comparisons falsifying at least floor(lim/2) of
// them (all of them when lim == 1). Stage 2 evaluates survivors on every
// example, keeps those falsifying at least |es|/lim, and among comparisons
// with identical falsified sets keeps only the one whose key has the
// smallest range over the example values (ties: pool order). Survivors are
// returned in pool order.
std::vector<Comparison> candidate_comps(const std::vector<Comparison>& pool, int lim,
                                        const std::vector<ThinCounterexample>& es,
                                        std::mt19937_64& rng);

// Depth-first branch and bound over preorders built from the task seed plus
// at most n_c pool comparisons. At each node the examples are refreshed for
// the current candidate; an empty set means the candidate is correct.
// Children are sorted by cost and pruned against the best complete solution
// found so far, which is sound because both cost functions are monotone
// under added comparisons. Returns the cheapest correct preorder in the
// explored space — cost ties broken toward fewer comparisons, then pool
// order — or absent (also when the deadline expires; `timed_out` reports
// that separately).
std::optional<KeywordPreorder> best_preorder(const PreorderSynthTask& task,
                                             const std::vector<Comparison>& pool, int n_c,
                                             std::mt19937_64& rng, bool* timed_out = nullptr);

struct SynthResult {
  std::optional<KeywordPreorder> preorder;
  bool timed_out = false;
  int rounds = 0;         // deepening turns taken
  int n_c = 0;            // comparison limit of the successful turn
  int64_t pool_size = 0;  // pool size of the successful turn
};

// Iterative deepening over (pool size, comparison limit), starting at
// (10^5, 2); every failed turn doubles the pool and allows one more
// comparison. Stops on success, on the task deadline, or once the grammar
// is exhausted and deeper search cannot help.
SynthResult synthesize_preorder(const PreorderSynthTask& task, const Type& subject,
                                const GrammarConfig& cfg, uint64_t rng_seed);

}  // namespace methyl
