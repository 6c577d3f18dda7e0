#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "methyl/functor.hpp"
#include "methyl/parser.hpp"
#include "methyl/typecheck.hpp"

using namespace methyl;

namespace {

// Knapsack over (weight, value) items: generate subsets by skip/take, filter
// by capacity in the combiner. A fully well-typed program.
std::string knapsack_source() {
  return R"((define sumw (lambda p (fold (lambda (acc x) (add acc (fst x))) 0 p)))
(define sumv (lambda p (fold (lambda (acc x) (add acc (snd x))) 0 p)))
(hylo
  (functor (+ (c unit) I (* (* (c int) (c int)) I)))
  (state (list (tuple int int)))
  (solution (list (tuple int int)))
  (constants (XS (list (tuple int int)) (size 8) (ints 1 9)) (W int (ints 1 40)))
  (root XS)
  (psi (lambda xs
    (if (= (len xs) 0)
        (collect (tag 1 unit))
        (seq (collect (tag 2 (tail xs)))
             (collect (tag 3 (tuple (head xs) (tail xs))))))))
  (phi (lambda y
    (if (= (vtag y) 1)
        (collect (list))
        (if (= (vtag y) 2)
            (collect (vpayload y))
            (if (le (add (sumw (snd (vpayload y))) (fst (fst (vpayload y)))) W)
                (collect (cons (fst (vpayload y)) (snd (vpayload y))))
                skip)))))
  (scorer (lambda p (sumv p))))
)";
}

Value gen_value(const Type& t, std::mt19937_64& rng, int depth) {
  auto pick = [&](uint64_t n) { return static_cast<size_t>(rng() % n); };
  switch (t.kind()) {
    case Type::Kind::Int:
      return Value::integer(static_cast<int64_t>(rng() % 19) - 9);
    case Type::Kind::Bool:
      return Value::boolean(rng() % 2 == 0);
    case Type::Kind::Unit:
      return Value::unit();
    case Type::Kind::List: {
      size_t n = depth <= 0 ? 0 : pick(3);
      std::vector<Value> xs;
      for (size_t i = 0; i < n; ++i) xs.push_back(gen_value(t.elem(), rng, depth - 1));
      return Value::list(std::move(xs));
    }
    case Type::Kind::Tree: {
      if (depth <= 0 || rng() % 2 == 0) return Value::tree_leaf(gen_value(t.elem(), rng, depth - 1));
      return Value::tree_node(gen_value(t.elem(), rng, depth - 1),
                              gen_value(t, rng, depth - 1), gen_value(t, rng, depth - 1));
    }
    case Type::Kind::Tuple: {
      std::vector<Value> xs;
      for (const Type& c : t.comps()) xs.push_back(gen_value(c, rng, depth - 1));
      return Value::tuple(std::move(xs));
    }
    case Type::Kind::Variant: {
      size_t i = pick(t.comps().size());
      return Value::tagged(static_cast<int64_t>(i + 1), gen_value(t.comps()[i], rng, depth - 1));
    }
  }
  return Value::unit();
}

Functor gen_functor(std::mt19937_64& rng, int depth) {
  uint64_t r = rng() % (depth <= 0 ? 3 : 5);
  switch (r) {
    case 0: return Functor::identity();
    case 1: return Functor::const_unit();
    case 2: return Functor::const_int();
    case 3: return Functor::product(gen_functor(rng, depth - 1), gen_functor(rng, depth - 1));
    default: return Functor::sum(gen_functor(rng, depth - 1), gen_functor(rng, depth - 1));
  }
}

// Structural mutation that may or may not leave the value well typed.
Value mutate(const Value& v, std::mt19937_64& rng) {
  switch (rng() % 4) {
    case 0:
      return Value::integer(7);
    case 1:
      return Value::boolean(true);
    case 2:
      if (v.is(Value::Kind::Tagged)) return Value::tagged(v.tag() + 1, v.payload());
      return Value::tagged(1, v);
    default:
      if (v.is(Value::Kind::Tuple) && v.size() > 0) {
        auto xs = v.elems();
        xs[rng() % xs.size()] = mutate(xs[rng() % xs.size()], rng);
        return Value::tuple(std::move(xs));
      }
      return Value::list({v});
  }
}

}  // namespace

TEST_CASE("well-typed program yields no diagnostics") {
  HyloProgram prog = parse_program(knapsack_source());
  CHECK(typecheck(prog).empty());
}

TEST_CASE("combiner collecting a non-solution is reported once") {
  std::string src = knapsack_source();
  // Collect an int where the solution type is a list of pairs.
  auto at = src.find("(collect (list))");
  REQUIRE(at != std::string::npos);
  src.replace(at, std::string("(collect (list))").size(), "(collect 1)");
  HyloProgram prog = parse_program(src);
  auto diags = typecheck(prog);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].find("combiner") != std::string::npos);
}

TEST_CASE("generator collecting an untagged value is reported") {
  std::string src = knapsack_source();
  auto at = src.find("(collect (tag 2 (tail xs)))");
  REQUIRE(at != std::string::npos);
  src.replace(at, std::string("(collect (tag 2 (tail xs)))").size(),
              "(collect (tail xs))");
  HyloProgram prog = parse_program(src);
  auto diags = typecheck(prog);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].find("generator") != std::string::npos);
}

TEST_CASE("non-integer scorer and wrong root are reported") {
  std::string src = knapsack_source();
  auto at = src.find("(scorer (lambda p (sumv p)))");
  REQUIRE(at != std::string::npos);
  src.replace(at, std::string("(scorer (lambda p (sumv p)))").size(),
              "(scorer (lambda p (= p p)))");
  auto diags = typecheck(parse_program(src));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].find("scorer") != std::string::npos);

  src = knapsack_source();
  at = src.find("(root XS)");
  REQUIRE(at != std::string::npos);
  src.replace(at, std::string("(root XS)").size(), "(root W)");
  diags = typecheck(parse_program(src));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].find("root") != std::string::npos);
}

TEST_CASE("empty list literal inhabits any list position") {
  // (collect (list)) in the combiner already exercises this; also nest it.
  std::string src = knapsack_source();
  auto at = src.find("(collect (vpayload y))");
  REQUIRE(at != std::string::npos);
  src.replace(at, std::string("(collect (vpayload y))").size(),
              "(collect (cons (tuple 1 1) (list)))");
  CHECK(typecheck(parse_program(src)).empty());
}

TEST_CASE("fold accumulator disagreement is reported") {
  std::string src = knapsack_source();
  auto at = src.find("(scorer (lambda p (sumv p)))");
  REQUIRE(at != std::string::npos);
  src.replace(at, std::string("(scorer (lambda p (sumv p)))").size(),
              "(scorer (lambda p (fold (lambda (acc x) (tuple acc 1)) 0 p)))");
  auto diags = typecheck(parse_program(src));
  CHECK(!diags.empty());
  bool mentions_fold = false;
  for (const auto& d : diags) mentions_fold = mentions_fold || d.find("fold") != std::string::npos;
  CHECK(mentions_fold);
}

TEST_CASE("mixed-variant payload widens instead of erring") {
  // vtag/vpayload on a variant whose alternatives differ: advisory Any.
  std::string src = R"((hylo
  (functor (+ (c unit) (c int)))
  (state int)
  (solution int)
  (constants (N int (ints 1 5)))
  (root N)
  (psi (lambda s (if (le s 0) (collect (tag 1 unit)) (collect (tag 2 s)))))
  (phi (lambda y (if (= (vtag y) 1) (collect 0) (collect (vtag y)))))
  (scorer (lambda p p)))
)";
  CHECK(typecheck(parse_program(src)).empty());
}

TEST_CASE("value inhabitation agrees with functor admission") {
  std::mt19937_64 rng(20240817);
  Type state = Type::list(Type::tuple({Type::integer(), Type::integer()}));
  auto slot_ok = [&](const Value& v) { return value_inhabits(v, state); };
  int checked = 0;
  for (int round = 0; round < 400; ++round) {
    Functor f = gen_functor(rng, 4);
    Type ft = f.apply(state);
    Value good = gen_value(ft, rng, 3);
    CHECK(value_inhabits(good, ft));
    CHECK(f.admits(good, slot_ok) == value_inhabits(good, ft));
    Value bad = mutate(good, rng);
    CHECK(f.admits(bad, slot_ok) == value_inhabits(bad, ft));
    ++checked;
  }
  CHECK(checked == 400);
}

TEST_CASE("value inhabitation basics") {
  Type pairs = Type::list(Type::tuple({Type::integer(), Type::integer()}));
  CHECK(value_inhabits(parse_value("(list)"), pairs));
  CHECK(value_inhabits(parse_value("(list (tuple 1 2))"), pairs));
  CHECK(!value_inhabits(parse_value("(list 1)"), pairs));
  CHECK(!value_inhabits(parse_value("1"), pairs));

  Type var = Type::variant({Type::unit(), Type::integer()});
  CHECK(value_inhabits(parse_value("(tag 1 unit)"), var));
  CHECK(value_inhabits(parse_value("(tag 2 5)"), var));
  CHECK(!value_inhabits(parse_value("(tag 2 unit)"), var));
  CHECK(!value_inhabits(parse_value("(tag 3 unit)"), var));

  Type tr = Type::tree(Type::integer());
  CHECK(value_inhabits(parse_value("(leaf 1)"), tr));
  CHECK(value_inhabits(parse_value("(node 1 (leaf 2) (leaf 3))"), tr));
  CHECK(!value_inhabits(parse_value("(node 1 (leaf 2) (leaf true))"), tr));
}
