#pragma once

#include <optional>
#include <string>
#include <vector>

#include "methyl/ast.hpp"
#include "methyl/program.hpp"
#include "methyl/types.hpp"

namespace methyl {

// One named, typed input available to enumerated terms.
struct GrammarInput {
  int32_t name = 0;
  Type type;
};

// Which operator tier a consumer may draw from. The constant tier admits
// only O(1) operators (arithmetic, comparisons, connectives, direct
// accessors); the polynomial tier adds structure traversal: tail, match,
// fold over lists and trees.
enum class Tier : uint8_t { Constant, Polynomial };

struct GrammarConfig {
  int max_size = 12;          // enumeration size cap per term
  int max_terms = 200000;     // total stored terms cap per enumerator
  bool nonlinear = false;     // admit mul
  bool int_literals = true;   // include {-1,0,1,2} and NEG_INF terminals
  int fold_body_size = 5;     // size cap for fold/tfold lambda bodies
  int fold_body_terms = 512;  // count cap for fold/tfold lambda bodies
};

// Size-ordered, type-directed, canonicalized term enumeration.
//
// Size metric: every terminal counts 1, including component access paths
// rooted at an input (x, x.1, x.2.1, ...); every operator application adds
// 1 plus its operands; a fold counts its keyword, its lambda, the lambda
// body, the initial accumulator, and the list. Terms are produced in
// nondecreasing size, deterministically, with no two terms surviving
// canonicalization (commutative-operand sorting, rejection of all-constant
// applications and of identity patterns like x+0, x-x, min(x,x)).
class TermEnum {
 public:
  struct Typed {
    ExprPtr term;
    Type type;
    int size = 0;
  };

  TermEnum(std::vector<GrammarInput> inputs, std::vector<GrammarInput> globals,
           GrammarConfig cfg, Tier tier);

  // Every stored term, in emission order (size ascending, deterministic
  // tiebreak by construction order).
  const std::vector<Typed>& all() const { return emitted_; }

  // The stored terms of one type, in emission order.
  std::vector<ExprPtr> of_type(const Type& want) const;

  // True if the max_terms cap stopped enumeration early.
  bool truncated() const { return full_; }

 private:
  class Builder;
  std::vector<Typed> emitted_;
  bool full_ = false;
};

// Evaluates `term` once per row, binding names[i] to row[i]; `instance`
// (optional) resolves problem constants. A per-row evaluation failure
// (head of empty list, index out of range, missing match) yields an empty
// slot rather than an error.
std::vector<std::optional<Value>> evaluate_batch(const ExprPtr& term,
                                                 const std::vector<int32_t>& names,
                                                 const std::vector<std::vector<Value>>& rows,
                                                 const Instance* instance);

}  // namespace methyl
