#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "methyl/error.hpp"
#include "methyl/eval.hpp"
#include "methyl/parser.hpp"
#include "methyl/symbols.hpp"

using namespace methyl;

namespace {

// Same program as the syntax fixture: 0/1 knapsack over (weight, value)
// items, feasibility checked in the combiner.
std::string knapsack_source(const std::string& extra_sections) {
  return R"lhy(
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
)lhy" + extra_sections +
         "\n)\n";
}

Instance knapsack_instance(const HyloProgram& prog,
                           const std::vector<std::pair<int, int>>& items, int w) {
  std::string xs = "(list";
  for (auto [wi, vi] : items)
    xs += " (tuple " + std::to_string(wi) + " " + std::to_string(vi) + ")";
  xs += ")";
  return parse_instance("(instance (XS " + xs + ") (W " + std::to_string(w) + "))", prog);
}

// Independent oracle: direct subset enumeration.
int64_t brute_knapsack(const std::vector<std::pair<int, int>>& items, int w) {
  int64_t best = 0;
  for (uint32_t mask = 0; mask < (1u << items.size()); ++mask) {
    int64_t sw = 0, sv = 0;
    for (size_t i = 0; i < items.size(); ++i)
      if (mask >> i & 1) {
        sw += items[i].first;
        sv += items[i].second;
      }
    if (sw <= w) best = std::max(best, sv);
  }
  return best;
}

Value eval_str(const std::string& src) {
  Interp in(nullptr);
  Env env;
  Value out;
  REQUIRE_MESSAGE(in.eval(parse_expr(src, {}), env, out), in.why());
  return out;
}

bool eval_fails(const std::string& src) {
  Interp in(nullptr);
  Env env;
  Value out;
  return !in.eval(parse_expr(src, {}), env, out);
}

}  // namespace

TEST_CASE("operator semantics") {
  CHECK(eval_str("(add 2 3 4)") == Value::integer(9));
  CHECK(eval_str("(sub 2 5)") == Value::integer(-3));
  CHECK(eval_str("(min 4 1 3)") == Value::integer(1));
  CHECK(eval_str("(max 4 1 3)") == Value::integer(4));
  CHECK(eval_str("(neg 7)") == Value::integer(-7));
  CHECK(eval_str("(le 3 3)") == Value::boolean(true));
  CHECK(eval_str("(lt 3 3)") == Value::boolean(false));
  CHECK(eval_str("(eq (list 1 2) (list 1 2))") == Value::boolean(true));
  CHECK(eval_str("(ite (lt 1 2) 10 20)") == Value::integer(10));
  CHECK(eval_str("(len (list 4 5 6))") == Value::integer(3));
  CHECK(eval_str("(head (list 4 5))") == Value::integer(4));
  CHECK(eval_str("(tail (list 4 5))") == Value::list({Value::integer(5)}));
  CHECK(eval_str("(cons 3 (list 4))") == parse_value("(list 3 4)"));
  CHECK(eval_str("(access (list 7 8 9) 1)") == Value::integer(8));
  CHECK(eval_str("(upto 2 4)") == parse_value("(list 2 3 4)"));
  CHECK(eval_str("(upto 3 2)") == parse_value("(list)"));
  CHECK(eval_str("(match 8 (list 7 8 9))") == Value::integer(1));
  CHECK(eval_str("(get (tuple (add 1 1) 5) 1)") == Value::integer(2));
  CHECK(eval_str("(vtag (tag 2 unit))") == Value::integer(2));
  CHECK(eval_str("(vpayload (tag 2 (list 1)))") == parse_value("(list 1)"));
  CHECK(eval_str("(fold (lambda (acc x) (add acc x)) 0 (list 1 2 3))") == Value::integer(6));
  CHECK(eval_str("(tfold (lambda v v) (lambda (v a b) (add v a b)) "
                 "(node 1 (leaf 2) (node 3 (leaf 4) (leaf 5))))") == Value::integer(15));
  CHECK(eval_str("(isleaf (leaf 1))") == Value::boolean(true));
  CHECK(eval_str("(tval (node 9 (leaf 1) (leaf 2)))") == Value::integer(9));
}

TEST_CASE("partiality is soft failure, not a crash") {
  CHECK(eval_fails("(head (list))"));
  CHECK(eval_fails("(tail (list))"));
  CHECK(eval_fails("(access (list 1) 5)"));
  CHECK(eval_fails("(access (list 1) -1)"));
  CHECK(eval_fails("(match 9 (list 1 2))"));
  CHECK(eval_fails("(tlchild (leaf 1))"));
  CHECK(eval_fails("(add 1 true)"));
  CHECK(eval_fails("(get (tuple 1 2) 3)"));
  // guards evaluate lazily, so the usual guard idiom is safe
  CHECK(eval_str("(and (lt 0 (len (list))) (eq (head (list)) 1))") == Value::boolean(false));
  CHECK(eval_str("(or (eq 1 1) (eq (head (list)) 1))") == Value::boolean(true));
  CHECK(eval_str("(ite (eq 1 1) 5 (head (list)))") == Value::integer(5));
}

TEST_CASE("checked arithmetic rejects overflow") {
  CHECK(eval_fails("(mul 4611686018427387904 4)"));
  CHECK(eval_fails("(add 9223372036854775807 1)"));
  CHECK(eval_fails("(neg -9223372036854775808)"));
}

TEST_CASE("knapsack objective matches the worked example") {
  HyloProgram prog = parse_program(knapsack_source(""));
  Instance inst = knapsack_instance(prog, {{3, 3}, {2, 3}, {1, 2}}, 4);
  RunResult r = run_program(prog, inst, EngineConfig{});
  CHECK(r.has_solution);
  CHECK(r.objective == 5);  // pick items one and three
}

TEST_CASE("knapsack objective matches subset enumeration on many instances") {
  HyloProgram prog = parse_program(knapsack_source(""));
  std::vector<std::vector<std::pair<int, int>>> cases = {
      {},
      {{1, 1}},
      {{5, 10}},
      {{1, 5}, {2, 3}, {3, 9}, {2, 2}, {1, 1}},
      {{4, 4}, {4, 4}, {4, 4}},
      {{2, 7}, {3, 1}, {1, 1}, {2, 4}, {2, 6}, {1, 2}},
      {{8, 8}, {7, 2}, {6, 5}, {1, 1}, {2, 9}},
  };
  for (const auto& items : cases) {
    for (int w : {0, 1, 4, 7, 12}) {
      Instance inst = knapsack_instance(prog, items, w);
      RunResult r = run_program(prog, inst, EngineConfig{});
      CHECK(r.has_solution);
      CHECK(r.objective == brute_knapsack(items, w));
    }
  }
}

TEST_CASE("declared pruning and memo keys preserve the objective and shrink the run") {
  std::string thin_memo = R"(
  (thin (le (lambda p (sumv p))) (le (lambda p (neg (sumw p)))))
  (memo (lambda s (len s))))";
  // the helper names are still visible: defines precede the hylo form
  std::string src = knapsack_source("");
  std::string with = knapsack_source(thin_memo);
  HyloProgram plain = parse_program(src);
  HyloProgram tuned = parse_program(with);
  REQUIRE(tuned.thin.has_value());
  REQUIRE(tuned.memo_key != nullptr);

  std::vector<std::pair<int, int>> items = {{2, 7}, {3, 1}, {1, 1}, {2, 4}, {2, 6}, {1, 2}};
  for (int w : {0, 3, 6, 11}) {
    Instance i1 = knapsack_instance(plain, items, w);
    Instance i2 = knapsack_instance(tuned, items, w);
    RunResult r1 = run_program(plain, i1, EngineConfig{});
    RunResult r2 = run_program(tuned, i2, EngineConfig{});
    CHECK(r1.objective == r2.objective);
    CHECK(r2.stats.max_set <= r1.stats.max_set);
    CHECK(r2.stats.states == static_cast<int64_t>(items.size()) + 1);
  }
}

TEST_CASE("expansion enumerates the slot-wise product of sub-solutions") {
  // shape 1 + I*I: state 1 expands to the pair (0, 0); solutions of 0 are
  // {5, 7}; the four assignments produce sums {10, 12, 14}
  const char* src = R"lhy(
(hylo
  (functor (+ (c unit) (* I I)))
  (state int)
  (solution int)
  (constants (N int (range 1 1)))
  (root N)
  (psi (lambda s
    (if (eq s 0)
        (collect (tag 1 unit))
        (collect (tag 2 (tuple 0 0))))))
  (phi (lambda y
    (if (eq (vtag y) 1) (seq (collect 5) (collect 7)))
    (if (eq (vtag y) 2) (collect (add (fst (vpayload y)) (snd (vpayload y)))))))
  (scorer (lambda p p))
)
)lhy";
  HyloProgram prog = parse_program(src);
  Instance inst = parse_instance("(instance (N 1))", prog);
  EngineConfig cfg;
  cfg.trace_sets = true;
  TraceBundle trace;
  RunResult r = run_program(prog, inst, cfg, &trace);
  CHECK(r.objective == 14);
  CHECK(r.stats.expansions == 1 + 4);
  CHECK(r.stats.root_set == 3);  // {10, 12, 14}
  // stored sets are canonical (sorted, deduplicated)
  int32_t one = trace.intern(Value::integer(1));
  auto it = trace.per_state.find(one);
  REQUIRE(it != trace.per_state.end());
  std::vector<Value> got;
  for (int32_t id : it->second) got.push_back(trace.vals[static_cast<size_t>(id)]);
  CHECK(got == std::vector<Value>{Value::integer(10), Value::integer(12), Value::integer(14)});
}

TEST_CASE("cyclic state graphs are detected") {
  const char* src = R"lhy(
(hylo
  (functor (+ (c unit) I))
  (state int)
  (solution int)
  (constants (N int (range 1 9)))
  (root N)
  (psi (lambda s (collect (tag 2 s))))
  (phi (lambda y (collect 0)))
  (scorer (lambda p p))
)
)lhy";
  HyloProgram prog = parse_program(src);
  Instance inst = parse_instance("(instance (N 3))", prog);
  try {
    run_program(prog, inst, EngineConfig{});
    FAIL("expected a cycle error");
  } catch (const Error& e) {
    CHECK(e.kind == Error::Kind::Cycle);
  }
}

TEST_CASE("deep chains run on the dedicated stack") {
  const char* src = R"lhy(
(hylo
  (functor (+ (c unit) I))
  (state int)
  (solution int)
  (constants (N int (range 0 100000)))
  (root N)
  (psi (lambda s
    (if (eq s 0) (collect (tag 1 unit)) (collect (tag 2 (sub s 1))))))
  (phi (lambda y
    (if (eq (vtag y) 1) (collect 0) (collect (add 1 (vpayload y))))))
  (scorer (lambda p p))
)
)lhy";
  HyloProgram prog = parse_program(src);
  Instance inst = parse_instance("(instance (N 30000))", prog);
  RunResult r = run_program(prog, inst, EngineConfig{});
  CHECK(r.objective == 30000);
  CHECK(r.stats.states == 30001);
}

TEST_CASE("engine limits stop runaway programs") {
  HyloProgram prog = parse_program(knapsack_source(""));
  Instance inst = knapsack_instance(prog, {{1, 1}, {1, 2}, {1, 3}, {1, 4}}, 4);
  EngineConfig cfg;
  cfg.max_expansions = 3;
  CHECK_THROWS_AS(run_program(prog, inst, cfg), Error);
  cfg = EngineConfig{};
  cfg.max_states = 2;
  CHECK_THROWS_AS(run_program(prog, inst, cfg), Error);
  cfg = EngineConfig{};
  cfg.max_fuel = 50;
  CHECK_THROWS_AS(run_program(prog, inst, cfg), Error);
}

TEST_CASE("derivation groups record assignments per state and substates") {
  HyloProgram prog = parse_program(knapsack_source(""));
  Instance inst = knapsack_instance(prog, {{2, 3}, {1, 1}}, 3);
  EngineConfig cfg;
  cfg.trace_derivations = true;
  cfg.trace_sets = true;
  TraceBundle trace;
  run_program(prog, inst, cfg, &trace);

  // state [(1,1)] has two seeds: skip -> ([],) and take -> ((1,1), [])
  Value s = parse_value("(list (tuple 1 1))");
  Value sub = parse_value("(list)");
  int32_t sid = trace.intern(s);
  int32_t subid = trace.intern(sub);
  int groups_for_state = 0;
  std::set<int32_t> seeds_seen;
  for (const auto& [key, rows] : trace.groups) {
    if (key.state != sid) continue;
    ++groups_for_state;
    seeds_seen.insert(key.seed);
    REQUIRE(key.sigma.size() == 1);
    CHECK(key.sigma[0] == subid);
    REQUIRE(rows.size() == 1);  // lone sub-solution => one assignment
    for (const auto& row : rows) {
      CHECK(row.chosen.size() == 1);
      CHECK(row.outputs.size() == 1);
    }
  }
  // Distinct seeds (skip vs take) stay in distinct groups even though they
  // share the same substates.
  CHECK(groups_for_state == 2);
  CHECK(seeds_seen.size() == 2);
}

TEST_CASE("instrumentation markers fire with recorded temporaries") {
  int32_t x = Symbols::intern("x");
  auto body = Expr::apply(Op::Add, {Expr::var(x), Expr::constant(Value::integer(1))});
  auto probed = Expr::probe(7, {x}, body);
  Interp in(nullptr);
  std::vector<std::pair<int32_t, std::pair<Value, Value>>> seen;
  in.probe = [&](int32_t site, const std::vector<Value>& inputs, const Value& output) {
    seen.push_back({site, {inputs.at(0), output}});
  };
  Env env;
  env.push(x, Value::integer(41));
  Value out;
  REQUIRE(in.eval(probed, env, out));
  CHECK(out == Value::integer(42));
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].first == 7);
  CHECK(seen[0].second.first == Value::integer(41));
  CHECK(seen[0].second.second == Value::integer(42));
}
