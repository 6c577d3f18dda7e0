#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "methyl/program.hpp"

namespace methyl {

// Structural type analysis over a whole program. Returns one human-readable
// diagnostic per violation of the declared state/solution typing: the
// generator must collect F-structures over states, the combiner must consume
// F-structures over solutions and collect solutions, the scorer must map
// solutions to integers, the root must inhabit the state type, and pruning
// keys must be integer-valued. Empty result means the program is well typed.
//
// The analysis is advisory: unknown element types (empty list literals,
// payload extraction from mixed variants) widen to "any" rather than erring,
// so it never rejects a program the evaluator would run.
std::vector<std::string> typecheck(const HyloProgram& prog);

// Does `v` structurally inhabit `t`? Empty lists inhabit every list type;
// variant types are inhabited by tagged values whose tag selects an
// alternative the payload inhabits. Set values inhabit no declared type
// (solution sets exist only at the meta level).
bool value_inhabits(const Value& v, const Type& t);

// Infers the type of `e` with the given variable bindings in scope and the
// program's constants resolvable. Returns nothing when the type cannot be
// pinned to a concrete declared form (unknown element types, tagged values
// whose variant is not determined by context, or ill-typed expressions).
std::optional<Type> infer_expr_type(const ExprPtr& e,
                                    const std::vector<std::pair<int32_t, Type>>& bindings,
                                    const HyloProgram& prog);

}  // namespace methyl
