#include <set>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "methyl/eval.hpp"
#include "methyl/incremental.hpp"
#include "methyl/parser.hpp"
#include "methyl/symbols.hpp"
#include "methyl/typecheck.hpp"

using namespace methyl;

namespace {

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

// Pruning preorder as the ranking step leaves it: score descending is enough
// only together with equal total weight.
void install_thin(HyloProgram& prog) {
  KeywordPreorder r;
  r.comps.push_back({Comparison::Rel::Le, prog.scorer});
  r.comps.push_back(
      {Comparison::Rel::Eq,
       parse_expr("(lambda p (fold (lambda (acc i) (add acc (fst i))) 0 p))", {})});
  prog.thin = r;
}

Instance knapsack_instance(const HyloProgram& prog,
                           const std::vector<std::pair<int, int>>& items, int w) {
  std::string xs = "(list";
  for (auto [wi, vi] : items)
    xs += " (tuple " + std::to_string(wi) + " " + std::to_string(vi) + ")";
  xs += ")";
  return parse_instance("(instance (XS " + xs + ") (W " + std::to_string(w) + "))", prog);
}

const std::vector<std::pair<std::vector<std::pair<int, int>>, int>>& training_cases() {
  static const std::vector<std::pair<std::vector<std::pair<int, int>>, int>> cases = {
      {{{3, 3}, {2, 3}, {1, 2}}, 4},
      {{{2, 7}, {3, 1}, {1, 1}, {2, 4}}, 5},
      {{{1, 1}, {1, 2}, {2, 2}, {3, 5}}, 3},
      {{{1, 2}, {2, 3}, {1, 1}, {3, 4}, {2, 2}}, 6},
      {{{4, 5}, {1, 1}, {2, 3}, {3, 3}, {1, 2}, {2, 4}}, 7},
  };
  return cases;
}

struct Traced {
  std::vector<Instance> insts;
  std::vector<TraceBundle> bundles;
  std::vector<LiftRun> runs;
};

Traced trace_sites(const HyloProgram& prog, const SiteExtraction& ex) {
  Traced t;
  HyloProgram ip = instrumented_program(prog, ex);
  for (const auto& [items, w] : training_cases()) t.insts.push_back(knapsack_instance(prog, items, w));
  t.bundles.resize(t.insts.size());
  for (size_t i = 0; i < t.insts.size(); ++i) {
    EngineConfig cfg;
    cfg.probe = site_recorder(t.bundles[i]);
    run_program(ip, t.insts[i], cfg, nullptr);
  }
  for (size_t i = 0; i < t.insts.size(); ++i) t.runs.push_back({&t.bundles[i], &t.insts[i]});
  return t;
}

const ExtractedSite* site_by_body(const SiteExtraction& ex, const std::string& printed) {
  for (const auto& s : ex.sites)
    if (s.body->print() == printed) return &s;
  return nullptr;
}

Value eval_with(const ExprPtr& e, int32_t sym, const Value& v, const Instance* inst = nullptr) {
  Interp in(inst);
  Env env;
  env.push(sym, v);
  Value out;
  REQUIRE_MESSAGE(in.eval(e, env, out), (e->print() + ": " + in.why()));
  return out;
}

Value call(const ExprPtr& lambda, const Value& v) {
  Interp in(nullptr);
  Value out;
  REQUIRE_MESSAGE(in.call(lambda, v, out), (lambda->print() + ": " + in.why()));
  return out;
}

Value solution_of(const std::vector<std::pair<int, int>>& items) {
  std::vector<Value> xs;
  for (auto [w, v] : items) xs.push_back(Value::tuple({Value::integer(w), Value::integer(v)}));
  return Value::list(std::move(xs));
}

int64_t objective(const HyloProgram& prog, const Instance& inst, RunStats* stats = nullptr) {
  EngineConfig cfg;
  RunResult r = run_program(prog, inst, cfg, nullptr);
  REQUIRE(r.has_solution);
  if (stats) *stats = r.stats;
  return r.objective;
}

}  // namespace

TEST_CASE("combiner extraction cuts queries, constructors, and ranking keys") {
  HyloProgram prog = knapsack_program();
  install_thin(prog);
  SiteExtraction ex = extract_solution_sites(prog);
  REQUIRE(ex.ok);
  CHECK(ex.side == RewriteSide::Solution);
  CHECK(ex.subject == prog.phi.param);

  int direct = 0, queries = 0, ctors = 0;
  for (const auto& s : ex.sites) {
    if (s.direct) ++direct;
    else if (s.kind == ExtractedSite::Kind::Query) ++queries;
    else ++ctors;
    REQUIRE(!s.temps.empty());
  }
  CHECK(direct == 2);  // scorer doubles as the first ranking key
  CHECK(queries == 3);
  CHECK(ctors == 3);
  CHECK(ex.sites.size() == 8);

  // The instrumented template prints exactly like the original body.
  CHECK(ex.probed.body->print() == prog.phi.body->print());

  const ExtractedSite* vtag = site_by_body(ex, "(vtag y)");
  REQUIRE(vtag != nullptr);
  CHECK(vtag->kind == ExtractedSite::Kind::Query);
  CHECK(vtag->output_type == Type::integer());
  CHECK(vtag->temps.size() == 1);
  CHECK(vtag->temps[0].first == prog.phi.param);

  const ExtractedSite* item = site_by_body(ex, "(get (vpayload y) 1)");
  REQUIRE(item != nullptr);
  CHECK(item->kind == ExtractedSite::Kind::Query);
  CHECK(item->output_type == Type::tuple({Type::integer(), Type::integer()}));

  const ExtractedSite* grow = site_by_body(ex, "(cons (get (vpayload y) 1) (get (vpayload y) 2))");
  REQUIRE(grow != nullptr);
  CHECK(grow->kind == ExtractedSite::Kind::Constructor);
  CHECK(grow->output_type == prog.solution_type);

  const ExtractedSite* pass = site_by_body(ex, "(vpayload y)");
  REQUIRE(pass != nullptr);
  CHECK(pass->kind == ExtractedSite::Kind::Constructor);

  int folds = 0, consts = 0;
  for (const auto& s : ex.sites) {
    if (!s.direct && s.body->kind == Expr::K::Apply && s.body->op == Op::Fold) ++folds;
    if (s.body->kind == Expr::K::Const) ++consts;
  }
  CHECK(folds == 1);   // the weight sum inside the capacity test
  CHECK(consts == 1);  // the empty-solution constructor
}

TEST_CASE("instrumented runs stay faithful and record rows per site") {
  HyloProgram prog = knapsack_program();
  install_thin(prog);
  SiteExtraction ex = extract_solution_sites(prog);
  REQUIRE(ex.ok);

  HyloProgram ip = instrumented_program(prog, ex);
  Instance inst = knapsack_instance(prog, {{3, 3}, {2, 3}, {1, 2}}, 4);
  TraceBundle bundle;
  EngineConfig cfg;
  cfg.probe = site_recorder(bundle);
  RunResult r = run_program(ip, inst, cfg, nullptr);
  REQUIRE(r.has_solution);
  CHECK(r.objective == 5);

  for (const auto& s : ex.sites) {
    INFO("site ", s.id, ": ", s.body->print());
    CHECK(bundle.sites.count(s.id));
  }

  // The capacity test runs once per in-capacity extension attempt.
  const ExtractedSite* fold = nullptr;
  for (const auto& s : ex.sites)
    if (!s.direct && s.body->kind == Expr::K::Apply && s.body->op == Op::Fold) fold = &s;
  REQUIRE(fold != nullptr);
  CHECK(bundle.sites.at(fold->id).size() == 7);
  for (const auto& row : bundle.sites.at(fold->id)) {
    REQUIRE(row.inputs.size() == 1);
    CHECK(row.inputs[0].is(Value::Kind::Tagged));
    CHECK(row.output.is(Value::Kind::Int));
  }
}

TEST_CASE("solution re-representation finds the value-weight summary") {
  HyloProgram prog = knapsack_program();
  install_thin(prog);
  SiteExtraction ex = extract_solution_sites(prog);
  REQUIRE(ex.ok);
  Traced t = trace_sites(prog, ex);

  LiftConfig cfg;
  cfg.seed = 1;
  LiftOutcome out = solve_lifting(prog, ex, t.runs, cfg);
  REQUIRE_MESSAGE(out.change.has_value(), out.why);
  const RepresentationChange& rc = *out.change;

  // Exactly the classic summary: total value (the score key) and total weight.
  REQUIRE(rc.converter.size() == 2);
  Value s = solution_of({{3, 4}, {1, 2}});  // weight 4, value 6
  CHECK(call(rc.converter[0], s) == Value::integer(6));
  CHECK(call(rc.converter[1], s) == Value::integer(4));
  CHECK(call(rc.converter[0], solution_of({})) == Value::integer(0));

  CHECK(replacements_constant_time(rc));
  for (const auto& s2 : ex.sites) REQUIRE(rc.replacements.count(s2.id));

  int32_t y = prog.phi.param;
  Value y3 = Value::tagged(
      3, Value::tuple({Value::tuple({Value::integer(9), Value::integer(7)}),
                       Value::tuple({Value::integer(4), Value::integer(6)})}));

  const ExtractedSite* vtag = site_by_body(ex, "(vtag y)");
  CHECK(eval_with(rc.replacements.at(vtag->id), y, y3) == Value::integer(3));
  CHECK(eval_with(rc.replacements.at(vtag->id), y, Value::tagged(1, Value::unit())) ==
        Value::integer(1));

  const ExtractedSite* item = site_by_body(ex, "(get (vpayload y) 1)");
  CHECK(eval_with(rc.replacements.at(item->id), y, y3) ==
        Value::tuple({Value::integer(9), Value::integer(7)}));

  const ExtractedSite* fold = nullptr;
  for (const auto& s2 : ex.sites)
    if (!s2.direct && s2.body->kind == Expr::K::Apply && s2.body->op == Op::Fold) fold = &s2;
  REQUIRE(fold != nullptr);
  CHECK(eval_with(rc.replacements.at(fold->id), y, y3) == Value::integer(6));

  const ExtractedSite* grow = site_by_body(ex, "(cons (get (vpayload y) 1) (get (vpayload y) 2))");
  CHECK(eval_with(rc.replacements.at(grow->id), y, y3) ==
        Value::tuple({Value::integer(11), Value::integer(15)}));

  const ExtractedSite* nil = nullptr;
  for (const auto& s2 : ex.sites)
    if (s2.body->kind == Expr::K::Const) nil = &s2;
  REQUIRE(nil != nullptr);
  CHECK(eval_with(rc.replacements.at(nil->id), y, Value::tagged(1, Value::unit())) ==
        Value::tuple({Value::integer(0), Value::integer(0)}));

  const ExtractedSite* pass = site_by_body(ex, "(vpayload y)");
  Value y2 = Value::tagged(2, Value::tuple({Value::integer(5), Value::integer(8)}));
  CHECK(eval_with(rc.replacements.at(pass->id), y, y2) ==
        Value::tuple({Value::integer(5), Value::integer(8)}));

  // Direct sites turn into component accesses over the new representation.
  for (const auto& s2 : ex.sites) {
    if (!s2.direct) continue;
    Value got = eval_with(rc.replacements.at(s2.id), s2.temps[0].first,
                          Value::tuple({Value::integer(11), Value::integer(15)}));
    CHECK((got == Value::integer(11) || got == Value::integer(15)));
  }
}

TEST_CASE("applying the solution change preserves objectives end to end") {
  HyloProgram prog = knapsack_program();
  install_thin(prog);
  SiteExtraction ex = extract_solution_sites(prog);
  REQUIRE(ex.ok);
  Traced t = trace_sites(prog, ex);
  LiftConfig cfg;
  cfg.seed = 1;
  LiftOutcome out = solve_lifting(prog, ex, t.runs, cfg);
  REQUIRE_MESSAGE(out.change.has_value(), out.why);

  HyloProgram prog2 = apply_representation_change(prog, ex, *out.change);
  CHECK(typecheck(prog2).empty());
  CHECK(prog2.solution_type == Type::tuple({Type::integer(), Type::integer()}));
  REQUIRE(prog2.thin.has_value());
  CHECK(prog2.thin->comps.size() == 2);

  // Objective equality on the training instances and on held-out ones.
  std::vector<std::pair<std::vector<std::pair<int, int>>, int>> cases = training_cases();
  for (int w : {3, 5, 8}) cases.push_back({{{2, 2}, {4, 9}, {1, 3}, {3, 4}, {2, 5}}, w});
  for (const auto& [items, w] : cases) {
    Instance inst = knapsack_instance(prog, items, w);
    RunStats before, after;
    int64_t a = objective(prog, inst, &before);
    int64_t b = objective(prog2, inst, &after);
    INFO("items ", items.size(), " W ", w);
    CHECK(a == b);
    CHECK(after.max_set <= before.max_set);
  }

  // Same seed, same outcome, byte for byte.
  LiftOutcome again = solve_lifting(prog, ex, t.runs, cfg);
  REQUIRE(again.change.has_value());
  CHECK(apply_representation_change(prog, ex, *again.change).print() == prog2.print());
}

TEST_CASE("generator extraction cuts the state uses of the expansion") {
  HyloProgram prog = knapsack_program();
  install_thin(prog);
  SiteExtraction ex2 = extract_solution_sites(prog);
  REQUIRE(ex2.ok);
  Traced t2 = trace_sites(prog, ex2);
  LiftConfig cfg;
  cfg.seed = 1;
  LiftOutcome out2 = solve_lifting(prog, ex2, t2.runs, cfg);
  REQUIRE(out2.change.has_value());
  HyloProgram prog3 = apply_representation_change(prog, ex2, *out2.change);
  prog3.memo_key = parse_expr("(lambda m (len m))", {});
  REQUIRE(typecheck(prog3).empty());

  SiteExtraction ex = extract_state_sites(prog3);
  REQUIRE_MESSAGE(ex.ok, ex.why);
  CHECK(ex.side == RewriteSide::State);
  CHECK(ex.subject == prog3.psi.param);
  CHECK(ex.probed.body->print() == prog3.psi.body->print());

  int direct = 0, queries = 0, ctors = 0;
  for (const auto& s : ex.sites) {
    if (s.direct) ++direct;
    else if (s.kind == ExtractedSite::Kind::Query) ++queries;
    else ++ctors;
  }
  CHECK(direct == 1);   // the memo key
  CHECK(queries == 2);  // (len xs) and (head xs)
  CHECK(ctors == 1);    // (tail xs), shared by both growing seeds
  CHECK(ex.sites.size() == 4);

  CHECK(site_by_body(ex, "(len m)") != nullptr);
  CHECK(site_by_body(ex, "(len xs)") != nullptr);
  CHECK(site_by_body(ex, "(head xs)") != nullptr);
  const ExtractedSite* tail = site_by_body(ex, "(tail xs)");
  REQUIRE(tail != nullptr);
  CHECK(tail->kind == ExtractedSite::Kind::Constructor);
  CHECK(tail->output_type == prog3.state_type);
}

TEST_CASE("state re-representation finds the suffix-length summary") {
  HyloProgram prog = knapsack_program();
  install_thin(prog);
  SiteExtraction ex2 = extract_solution_sites(prog);
  REQUIRE(ex2.ok);
  Traced t2 = trace_sites(prog, ex2);
  LiftConfig cfg;
  cfg.seed = 1;
  LiftOutcome out2 = solve_lifting(prog, ex2, t2.runs, cfg);
  REQUIRE(out2.change.has_value());
  HyloProgram prog3 = apply_representation_change(prog, ex2, *out2.change);
  prog3.memo_key = parse_expr("(lambda m (len m))", {});

  SiteExtraction ex = extract_state_sites(prog3);
  REQUIRE(ex.ok);
  Traced t = trace_sites(prog3, ex);
  LiftOutcome out = solve_lifting(prog3, ex, t.runs, cfg);
  REQUIRE_MESSAGE(out.change.has_value(), out.why);
  const RepresentationChange& rc = *out.change;

  REQUIRE(rc.converter.size() == 1);
  CHECK(call(rc.converter[0], solution_of({{1, 2}, {3, 4}})) == Value::integer(2));
  CHECK(replacements_constant_time(rc));

  int32_t xs = prog3.psi.param;
  const ExtractedSite* len = site_by_body(ex, "(len xs)");
  CHECK(eval_with(rc.replacements.at(len->id), xs, Value::tuple({Value::integer(5)})) ==
        Value::integer(5));

  const ExtractedSite* tail = site_by_body(ex, "(tail xs)");
  CHECK(eval_with(rc.replacements.at(tail->id), xs, Value::tuple({Value::integer(5)})) ==
        Value::tuple({Value::integer(4)}));

  // Looking up the next item needs the declared constants, not the state.
  Instance inst = knapsack_instance(prog3, {{3, 3}, {2, 3}, {1, 2}}, 4);
  const ExtractedSite* head = site_by_body(ex, "(head xs)");
  CHECK(eval_with(rc.replacements.at(head->id), xs, Value::tuple({Value::integer(2)}), &inst) ==
        Value::tuple({Value::integer(2), Value::integer(3)}));
  CHECK(eval_with(rc.replacements.at(head->id), xs, Value::tuple({Value::integer(3)}), &inst) ==
        Value::tuple({Value::integer(3), Value::integer(3)}));

  const ExtractedSite* memo = site_by_body(ex, "(len m)");
  CHECK(eval_with(rc.replacements.at(memo->id), memo->temps[0].first,
                  Value::tuple({Value::integer(7)})) == Value::integer(7));

  HyloProgram prog4 = apply_representation_change(prog3, ex, rc);
  CHECK(typecheck(prog4).empty());
  CHECK(prog4.state_type == Type::tuple({Type::integer()}));
  CHECK(initial_state(prog4, inst) == Value::tuple({Value::integer(3)}));

  RunStats stats;
  CHECK(objective(prog4, inst, &stats) == 5);
  CHECK(stats.states == 4);

  // Held-out instances agree with the pre-rewrite program.
  for (int w : {3, 5, 8}) {
    Instance big = knapsack_instance(prog3, {{2, 2}, {4, 9}, {1, 3}, {3, 4}, {2, 5}, {1, 1}}, w);
    CHECK(objective(prog4, big) == objective(prog3, big));
  }
}

TEST_CASE("iteration over the replaced values defeats the rewrite honestly") {
  HyloProgram prog = parse_program(R"lhy(
(hylo
  (functor (+ (c unit) I))
  (state (list int))
  (solution (list int))
  (constants (XS (list int) (size 8) (ints 0 9)))
  (root XS)
  (psi (lambda xs
    (if (eq (len xs) 0)
        (collect (tag 1 unit))
        (collect (tag 2 (tail xs))))))
  (phi (lambda y
    (if (eq (vtag y) 1) (collect nil))
    (if (eq (vtag y) 2)
        (foreach i (vpayload y) (collect (cons i (vpayload y)))))))
  (scorer (lambda p (len p)))
)
)lhy");
  REQUIRE(typecheck(prog).empty());
  SiteExtraction ex = extract_solution_sites(prog);
  CHECK(!ex.ok);
  CHECK(!ex.why.empty());

  HyloProgram prog2 = parse_program(R"lhy(
(hylo
  (functor (+ (c unit) I))
  (state (list int))
  (solution (list int))
  (constants (XS (list int) (size 8) (ints 0 9)))
  (root XS)
  (psi (lambda xs
    (if (eq (len xs) 0) (collect (tag 1 unit)))
    (foreach i xs (collect (tag 2 (tail xs))))))
  (phi (lambda y
    (if (eq (vtag y) 1) (collect nil))
    (if (eq (vtag y) 2) (collect (vpayload y)))))
  (scorer (lambda p (len p)))
)
)lhy");
  REQUIRE(typecheck(prog2).empty());
  SiteExtraction ex2 = extract_state_sites(prog2);
  CHECK(!ex2.ok);
  CHECK(!ex2.why.empty());
}
