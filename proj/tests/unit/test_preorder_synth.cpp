#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "methyl/eval.hpp"
#include "methyl/parser.hpp"
#include "methyl/preorder_synth.hpp"
#include "methyl/symbols.hpp"
#include "methyl/thinning.hpp"

using namespace methyl;

namespace {

using Rel = Comparison::Rel;

ExprPtr key_expr(const std::string& src) { return parse_expr(src, {}); }

// Single-pair examples over integer subjects, for the filter tests.
ThinCounterexample int_pair(int64_t a, int64_t b) {
  ThinCounterexample e;
  e.pairs.emplace_back(Value::integer(a), Value::integer(b));
  return e;
}

HyloProgram knapsack_program() {
  return parse_program(R"lhy(
(define sumw (lambda p (fold (lambda (acc i) (add acc (fst i))) 0 p)))
(define sumv (lambda p (fold (lambda (acc i) (add acc (snd i))) 0 p)))
(hylo
  (functor (+ (c unit) I (* (* (c int) (c int)) I)))
  (state (list (tuple int int)))
  (solution (list (tuple int int)))
  (constants (XS (list (tuple int int)) (size 24) (ints 1 8) (scale-size 1))
             (W int (range 3 6) (scale 1)))
  (root XS)
  (psi (lambda xs
    (if (eq (len xs) 0)
        (collect (tag 1 unit))
        (seq (collect (tag 2 (tail xs)))
             (collect (tag 3 (tuple (head xs) (tail xs))))))))
  (phi (lambda y
    (if (eq (vtag y) 1) (collect nil))
    (if (eq (vtag y) 2) (collect (vpayload y)))
    (if (eq (vtag y) 3)
        (if (le (add (sumw (snd (vpayload y))) (fst (fst (vpayload y)))) W)
            (collect (cons (fst (vpayload y)) (snd (vpayload y))))))))
  (scorer (lambda p (sumv p)))
)
)lhy");
}

Instance knapsack_instance(const HyloProgram& prog,
                           const std::vector<std::pair<int, int>>& items, int w) {
  std::string xs = "(list";
  for (auto [wi, vi] : items)
    xs += " (tuple " + std::to_string(wi) + " " + std::to_string(vi) + ")";
  xs += ")";
  return parse_instance("(instance (XS " + xs + ") (W " + std::to_string(w) + "))", prog);
}

struct TracedCase {
  Instance inst;
  TraceBundle trace;
};

std::vector<TracedCase> trace_knapsacks(const HyloProgram& prog) {
  std::vector<TracedCase> out;
  std::vector<std::pair<std::vector<std::pair<int, int>>, int>> cases = {
      {{{3, 3}, {2, 3}, {1, 2}}, 4},
      {{{2, 7}, {3, 1}, {1, 1}, {2, 4}}, 5},
      {{{1, 1}, {1, 2}, {2, 2}, {3, 5}}, 3},
      {{{1, 2}, {2, 3}, {1, 1}, {3, 4}, {2, 2}}, 6},
      {{{4, 5}, {1, 1}, {2, 3}, {3, 3}, {1, 2}, {2, 4}}, 7},
  };
  for (const auto& [items, w] : cases) {
    TracedCase tc{knapsack_instance(prog, items, w), {}};
    EngineConfig cfg;
    cfg.trace_derivations = true;
    cfg.trace_sets = true;
    run_program(prog, tc.inst, cfg, &tc.trace);
    out.push_back(std::move(tc));
  }
  return out;
}

// Pruning-preorder task over cached knapsack traces: refresh re-extracts
// counterexamples per instance and deduplicates across them; cost is the
// traced range product.
PreorderSynthTask step1_task(const HyloProgram& prog, const std::vector<TracedCase>& traced) {
  PreorderSynthTask task;
  task.seed = {{Rel::Le, prog.scorer}};
  task.rels = {Rel::Le, Rel::Eq};
  task.refresh = [&](const KeywordPreorder& r) {
    std::vector<ThinCounterexample> es;
    std::set<Value> seen;
    for (const TracedCase& tc : traced)
      for (ThinCounterexample& e : extract_thin_counterexamples(tc.trace, tc.inst, r))
        if (seen.insert(e.canonical()).second) es.push_back(std::move(e));
    return es;
  };
  task.cost = [&](const KeywordPreorder& r) {
    std::vector<TracedRun> runs;
    for (const TracedCase& tc : traced) runs.push_back({&tc.trace, &tc.inst});
    return preorder_cost(r, runs);
  };
  return task;
}

// Memo-key task: a fixed list of state pairs with differing solution sets;
// refresh keeps the pairs the candidate keys still map together; cost is
// the number of distinct key tuples over the traced states (saturating on
// key failure).
PreorderSynthTask step3_task(const std::vector<Value>& states,
                             const std::vector<ThinCounterexample>& examples) {
  PreorderSynthTask task;
  task.rels = {Rel::Eq};
  task.refresh = [&examples](const KeywordPreorder& r) {
    Interp interp(nullptr);
    std::vector<ThinCounterexample> out;
    for (const ThinCounterexample& e : examples) {
      bool distinguished = false;
      for (const Comparison& c : r.comps)
        distinguished = distinguished || falsifies(c, e, interp);
      if (!distinguished) out.push_back(e);
    }
    return out;
  };
  task.cost = [&states](const KeywordPreorder& r) {
    Interp interp(nullptr);
    std::set<std::vector<int64_t>> tuples;
    for (const Value& s : states) {
      std::vector<int64_t> row;
      for (const Comparison& c : r.comps) {
        Value k;
        if (!interp.call(c.key, s, k) || !k.is(Value::Kind::Int))
          return std::numeric_limits<int64_t>::max();
        row.push_back(k.as_int());
      }
      tuples.insert(std::move(row));
    }
    return static_cast<int64_t>(tuples.size());
  };
  return task;
}

}  // namespace

TEST_CASE("comparison pools pair size-ordered keys with each relation") {
  Type subject = Type::tuple({Type::integer(), Type::integer()});
  GrammarConfig cfg;
  bool exhausted = true;
  auto pool = comparison_pool(subject, cfg, {Rel::Le, Rel::Eq}, 6, &exhausted);
  REQUIRE(pool.size() == 6);
  CHECK(!exhausted);  // truncated below the grammar's supply
  // constant keys are skipped; the two components come first, both relations
  CHECK(pool[0].rel == Rel::Le);
  CHECK(pool[1].rel == Rel::Eq);
  CHECK(expr_eq(pool[0].key, key_expr("(lambda p (fst p))")));
  CHECK(expr_eq(pool[1].key, key_expr("(lambda p (fst p))")));
  CHECK(expr_eq(pool[2].key, key_expr("(lambda p (snd p))")));
  CHECK(expr_eq(pool[3].key, key_expr("(lambda p (snd p))")));

  // a tiny grammar is exhausted even under a generous limit
  GrammarConfig tiny;
  tiny.max_size = 2;
  tiny.int_literals = false;
  auto small = comparison_pool(Type::integer(), tiny, {Rel::Eq}, 100, &exhausted);
  CHECK(exhausted);
  REQUIRE(small.size() == 2);  // p and (neg p)
  CHECK(expr_eq(small[0].key, key_expr("(lambda p p)")));
  CHECK(expr_eq(small[1].key, key_expr("(lambda p (neg p))")));
}

TEST_CASE("violation needs both keys to evaluate and the relation to fail") {
  Interp interp(nullptr);
  Comparison le_id{Rel::Le, key_expr("(lambda p p)")};
  Comparison eq_id{Rel::Eq, key_expr("(lambda p p)")};
  CHECK(comparison_violated(le_id, Value::integer(3), Value::integer(5), interp));
  CHECK(!comparison_violated(le_id, Value::integer(5), Value::integer(3), interp));
  CHECK(!comparison_violated(le_id, Value::integer(3), Value::integer(3), interp));
  CHECK(comparison_violated(eq_id, Value::integer(3), Value::integer(5), interp));
  CHECK(!comparison_violated(eq_id, Value::integer(3), Value::integer(3), interp));
  // key failure is indeterminate
  Comparison partial{Rel::Le, key_expr("(lambda p (head p))")};
  CHECK(!comparison_violated(partial, Value::integer(3), Value::integer(5), interp));

  ThinCounterexample two;
  two.pairs.emplace_back(Value::integer(3), Value::integer(3));
  two.pairs.emplace_back(Value::integer(2), Value::integer(5));
  CHECK(falsifies(le_id, two, interp));   // second pair breaks it
  CHECK(!falsifies(le_id, int_pair(7, 7), interp));
}

TEST_CASE("candidate filter keeps comparisons falsifying enough examples") {
  std::mt19937_64 rng(11);
  std::vector<ThinCounterexample> es = {int_pair(1, 2), int_pair(0, 3), int_pair(2, 7),
                                        int_pair(1, 9)};
  std::vector<Comparison> pool = {{Rel::Le, key_expr("(lambda p p)")}};
  auto kept = candidate_comps(pool, 2, es, rng);
  REQUIRE(kept.size() == 1);  // falsifies all four, far over the half bar
  CHECK(kept[0].rel == Rel::Le);
}

TEST_CASE("candidate filter drops comparisons below the exact threshold") {
  std::mt19937_64 rng(12);
  // only the first example is violated: 1 of 6 < 1/2
  std::vector<ThinCounterexample> es = {int_pair(1, 2), int_pair(5, 3), int_pair(4, 2),
                                        int_pair(9, 1), int_pair(7, 0), int_pair(8, 8)};
  std::vector<Comparison> pool = {{Rel::Le, key_expr("(lambda p p)")}};
  CHECK(candidate_comps(pool, 2, es, rng).empty());
}

TEST_CASE("identical behavior keeps only the smallest-range key") {
  std::mt19937_64 rng(13);
  std::vector<ThinCounterexample> es = {int_pair(0, 2), int_pair(1, 3), int_pair(2, 3),
                                        int_pair(0, 1)};
  // doubling preserves order, so both falsify exactly the same examples;
  // the doubled key spans twice the range and is dropped despite coming
  // first in the pool
  std::vector<Comparison> pool = {{Rel::Le, key_expr("(lambda p (add p p))")},
                                  {Rel::Le, key_expr("(lambda p p)")}};
  auto kept = candidate_comps(pool, 2, es, rng);
  REQUIRE(kept.size() == 1);
  CHECK(expr_eq(kept[0].key, key_expr("(lambda p p)")));
}

TEST_CASE("a lone remaining slot requires falsifying every example") {
  std::mt19937_64 rng(14);
  // five of six ascending, one descending: the order key misses one example,
  // the inequality key hits all six
  std::vector<ThinCounterexample> es = {int_pair(1, 2), int_pair(0, 3), int_pair(2, 7),
                                        int_pair(1, 9), int_pair(4, 5), int_pair(9, 6)};
  std::vector<Comparison> pool = {{Rel::Le, key_expr("(lambda p p)")},
                                  {Rel::Eq, key_expr("(lambda p p)")}};
  auto kept = candidate_comps(pool, 1, es, rng);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].rel == Rel::Eq);
}

TEST_CASE("search returns the seed when there is nothing to eliminate") {
  PreorderSynthTask task;
  task.seed = {{Rel::Le, key_expr("(lambda p p)")}};
  task.rels = {Rel::Le, Rel::Eq};
  task.refresh = [](const KeywordPreorder&) { return std::vector<ThinCounterexample>{}; };
  task.cost = [](const KeywordPreorder& r) { return static_cast<int64_t>(r.comps.size()); };
  std::mt19937_64 rng(1);
  std::vector<Comparison> pool = {{Rel::Eq, key_expr("(lambda p (neg p))")}};
  auto r = best_preorder(task, pool, 2, rng);
  REQUIRE(r.has_value());
  REQUIRE(r->comps.size() == 1);
  CHECK(r->comps[0].rel == Rel::Le);
  CHECK(expr_eq(r->comps[0].key, task.seed[0].key));
}

TEST_CASE("knapsack pruning synthesis recovers the weight comparison") {
  HyloProgram prog = knapsack_program();
  std::vector<TracedCase> traced = trace_knapsacks(prog);
  PreorderSynthTask task = step1_task(prog, traced);

  // literal-free keys keep the pool compact while still covering the
  // weight/value folds
  GrammarConfig cfg;
  cfg.max_size = 8;
  cfg.int_literals = false;
  auto pool = comparison_pool(prog.solution_type, cfg, task.rels, 100000);
  REQUIRE(!pool.empty());

  std::mt19937_64 rng(7);
  auto r = best_preorder(task, pool, 2, rng);
  REQUIRE(r.has_value());
  // the scorer objective stays first
  REQUIRE(r->comps.size() == 2);
  CHECK(r->comps[0].rel == Rel::Le);
  CHECK(expr_eq(r->comps[0].key, prog.scorer));
  // sound: no counterexample survives on any traced instance
  CHECK(task.refresh(*r).empty());

  // the added comparison behaves exactly like "lighter is at least as good"
  // on the seed-level examples
  KeywordPreorder seed_only;
  seed_only.comps = task.seed;
  auto es = task.refresh(seed_only);
  REQUIRE(!es.empty());
  Comparison negw{Rel::Le,
                  key_expr("(lambda p (neg (fold (lambda (acc i) (add acc (fst i))) 0 p)))")};
  Interp interp(nullptr);
  for (const auto& e : es) CHECK(falsifies(r->comps[1], e, interp) == falsifies(negw, e, interp));

  // pruning with the synthesized preorder preserves the objective
  HyloProgram tuned = knapsack_program();
  tuned.thin = *r;
  std::vector<std::pair<int, int>> held_out = {{2, 2}, {4, 9}, {1, 3}, {3, 4}, {2, 5}};
  for (int w : {3, 5, 8}) {
    Instance i1 = knapsack_instance(prog, held_out, w);
    Instance i2 = knapsack_instance(tuned, held_out, w);
    RunResult plain = run_program(prog, i1, EngineConfig{});
    RunResult pruned = run_program(tuned, i2, EngineConfig{});
    CHECK(plain.objective == pruned.objective);
    CHECK(pruned.stats.max_set <= plain.stats.max_set);
  }
}

TEST_CASE("memo-key synthesis recovers the list-length key") {
  // suffix states of the worked knapsack instance, all with distinct
  // solution sets
  std::vector<Value> states = {
      parse_value("(list (tuple 3 3) (tuple 2 3) (tuple 1 2))"),
      parse_value("(list (tuple 2 3) (tuple 1 2))"),
      parse_value("(list (tuple 1 2))"),
      parse_value("(list)"),
  };
  std::vector<ThinCounterexample> examples;
  for (size_t i = 0; i < states.size(); ++i)
    for (size_t j = 0; j < states.size(); ++j)
      if (i != j) {
        ThinCounterexample e;
        e.pairs.emplace_back(states[i], states[j]);
        examples.push_back(std::move(e));
      }
  PreorderSynthTask task = step3_task(states, examples);

  GrammarConfig cfg;
  cfg.max_size = 6;
  auto pool = comparison_pool(Type::list(Type::tuple({Type::integer(), Type::integer()})), cfg,
                              task.rels, 500);
  std::mt19937_64 rng(3);
  auto r = best_preorder(task, pool, 2, rng);
  REQUIRE(r.has_value());
  REQUIRE(r->comps.size() == 1);
  CHECK(r->comps[0].rel == Rel::Eq);
  CHECK(expr_eq(r->comps[0].key, key_expr("(lambda p (len p))")));
  CHECK(task.cost(*r) == 4);  // one memo slot per state, the optimum
  CHECK(task.refresh(*r).empty());
}

TEST_CASE("branch and bound matches exhaustive search on small pools") {
  std::mt19937_64 gen(20260815);
  for (int round = 0; round < 20; ++round) {
    // universe of small ints; keys quantize or clip them in various ways
    std::vector<Value> states;
    size_t n_states = 6 + gen() % 6;
    for (size_t i = 0; i < n_states; ++i)
      states.push_back(Value::integer(static_cast<int64_t>(gen() % 10)));
    std::vector<Comparison> pool;
    for (int c = 1; c <= 5; ++c) {
      pool.push_back({Rel::Eq, key_expr("(lambda p (min p " + std::to_string(c) + "))")});
      pool.push_back({Rel::Eq, key_expr("(lambda p (max p " + std::to_string(c) + "))")});
    }
    pool.push_back({Rel::Eq, key_expr("(lambda p p)")});

    std::vector<ThinCounterexample> examples;
    for (size_t i = 0; i < states.size(); ++i)
      for (size_t j = i + 1; j < states.size(); ++j)
        if (!(states[i] == states[j]) && gen() % 2 == 0) {
          ThinCounterexample e;
          e.pairs.emplace_back(states[i], states[j]);
          examples.push_back(std::move(e));
        }
    if (examples.empty()) continue;
    PreorderSynthTask task = step3_task(states, examples);

    // oracle: try every subset of at most three comparisons
    int64_t oracle = std::numeric_limits<int64_t>::max();
    size_t m = pool.size();
    for (size_t a = 0; a < m; ++a)
      for (size_t b = a; b < m; ++b)
        for (size_t c = b; c < m; ++c) {
          KeywordPreorder r;
          r.comps.push_back(pool[a]);
          if (b != a) r.comps.push_back(pool[b]);
          if (c != b) r.comps.push_back(pool[c]);
          if (task.refresh(r).empty()) oracle = std::min(oracle, task.cost(r));
        }

    std::mt19937_64 rng(round);
    auto found = best_preorder(task, pool, 3, rng);
    if (oracle == std::numeric_limits<int64_t>::max()) {
      CHECK(!found.has_value());
    } else {
      REQUIRE(found.has_value());
      CHECK(task.cost(*found) == oracle);
    }
  }
}

TEST_CASE("resampling never yields an unsound preorder") {
  HyloProgram prog = knapsack_program();
  std::vector<TracedCase> traced = trace_knapsacks(prog);
  PreorderSynthTask task = step1_task(prog, traced);
  GrammarConfig cfg;
  cfg.max_size = 8;
  cfg.int_literals = false;
  auto pool = comparison_pool(prog.solution_type, cfg, task.rels, 100000);
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    std::mt19937_64 rng(seed);
    auto r = best_preorder(task, pool, 2, rng);
    REQUIRE(r.has_value());
    CHECK(expr_eq(r->comps[0].key, prog.scorer));
    CHECK(task.refresh(*r).empty());
  }
}

TEST_CASE("iterative deepening solves knapsack pruning in the first turn") {
  HyloProgram prog = knapsack_program();
  std::vector<TracedCase> traced = trace_knapsacks(prog);
  PreorderSynthTask task = step1_task(prog, traced);
  GrammarConfig cfg;
  cfg.max_size = 8;
  SynthResult res = synthesize_preorder(task, prog.solution_type, cfg, 42);
  REQUIRE(res.preorder.has_value());
  CHECK(!res.timed_out);
  CHECK(res.rounds == 1);
  CHECK(res.n_c == 2);
  CHECK(task.refresh(*res.preorder).empty());
}

TEST_CASE("iterative deepening gives up once the grammar is exhausted") {
  // a self-pair can never be violated, so no preorder is correct
  PreorderSynthTask task;
  task.rels = {Rel::Eq};
  task.refresh = [](const KeywordPreorder&) {
    return std::vector<ThinCounterexample>{int_pair(5, 5)};
  };
  task.cost = [](const KeywordPreorder& r) { return static_cast<int64_t>(r.comps.size() + 1); };
  GrammarConfig cfg;
  cfg.max_size = 3;
  SynthResult res = synthesize_preorder(task, Type::integer(), cfg, 9);
  CHECK(!res.preorder.has_value());
  CHECK(!res.timed_out);
  CHECK(res.rounds >= 1);
  CHECK(res.rounds <= 8);
}

TEST_CASE("an expired deadline reports a timeout") {
  PreorderSynthTask task;
  task.rels = {Rel::Eq};
  task.refresh = [](const KeywordPreorder&) {
    return std::vector<ThinCounterexample>{int_pair(1, 2)};
  };
  task.cost = [](const KeywordPreorder&) { return int64_t{1}; };
  task.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  SynthResult res = synthesize_preorder(task, Type::integer(), GrammarConfig{}, 5);
  CHECK(!res.preorder.has_value());
  CHECK(res.timed_out);
}
