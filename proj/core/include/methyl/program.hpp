#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "methyl/ast.hpp"
#include "methyl/functor.hpp"
#include "methyl/types.hpp"

namespace methyl {

// One comparison of a keyword preorder: a `le` or `eq` relation between the
// images of a key function (a lambda over the compared value, Int-valued).
struct Comparison {
  enum class Rel : uint8_t { Le, Eq };
  Rel rel;
  ExprPtr key;

  std::string print() const;
};

// Conjunction of comparisons. `a R b` holds iff every comparison holds between
// the key images of a and b. Empty conjunction = always true.
struct KeywordPreorder {
  std::vector<Comparison> comps;

  std::string print() const;
};

// A function whose body is a statement; its results are the values it
// collects. Used for the expansion (psi) and combination (phi) halves.
struct StmtFun {
  int32_t param = -1;
  StmtPtr body;
};

// A declared problem constant together with its sampling space: structure
// size bound and integer range for random instances, and optional scaling
// hints that pin the constant to the ladder position during benchmarking.
struct SpaceDecl {
  int32_t name = -1;
  Type type;
  int size_bound = 0;       // list length bound (structured constants)
  int64_t int_lo = 0;       // integer leaf range, inclusive
  int64_t int_hi = 0;
  int scale_size = 0;       // bench: pin length to n * scale_size (0 = off)
  int64_t scale = 0;        // bench: pin value to n * scale (0 = off)
  bool has_range = false;

  std::string print() const;
};

// An assignment of values to the declared constants, in declaration order.
struct Instance {
  std::vector<std::pair<int32_t, Value>> bindings;

  const Value* find(int32_t name) const;
  std::string print() const;
};

// A recursive enumerate-and-combine program. The expansion half maps a state
// to shaped seeds (functor applied to states); each seed is expanded
// slot-wise into every combination of sub-results, and the combination half
// maps each shaped bundle of solutions to candidate solutions. The scorer
// ranks solutions; the objective of a run is the maximum score.
//
// The structure is closed under all four transformation steps: pruning fills
// `thin`, solution re-representation rewrites solution_type/phi/scorer/thin,
// memoization fills `memo_key`, state re-representation rewrites
// state_type/psi/root/memo_key.
struct HyloProgram {
  Functor functor;
  Type state_type;
  Type solution_type;
  std::vector<SpaceDecl> constants;
  ExprPtr root;  // expression over constants; produces the initial state
  StmtFun psi;   // state -> shaped seeds (collects functor.apply(state_type))
  StmtFun phi;   // shaped solutions -> solutions
  ExprPtr scorer;  // lambda: solution -> Int
  std::optional<KeywordPreorder> thin;
  ExprPtr memo_key;  // lambda: state -> scalar tuple, or null
  bool nonlinear_ops = false;  // input used multiplication

  std::vector<int32_t> constant_names() const;
  std::string print() const;
};

}  // namespace methyl
