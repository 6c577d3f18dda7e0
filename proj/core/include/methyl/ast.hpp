#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "methyl/value.hpp"

namespace methyl {

// Built-in operators. Guards (`and`, `or`, `ite`) evaluate lazily; everything
// else is strict. `Probe` is an internal instrumentation marker: it never
// appears in source text and is erased before a program is printed.
enum class Op : uint8_t {
  Add, Sub, Mul, Neg, Min, Max,
  Lt, Le, Gt, Ge, Eq, Ne,
  And, Or, Not, Ite,
  MkTuple,
  Len, Head, Tail, Cons, Idx, Upto, MkList, Match,
  TVal, TLeft, TRight, IsLeaf, TLeaf, TNode,
  VTag, VPayload, MkTag,
  Fold, TFold,
  Probe,
};

struct OpInfo {
  const char* name;
  int min_arity;        // -1 entries never parse (internal)
  int max_arity;        // -1 = unbounded
  bool commutative;
  bool nonlinear;       // participates in synthesis only when enabled
  bool const_tier;      // constant-time synthesis grammar
  bool poly_tier;       // polynomial-time synthesis grammar
};

const OpInfo& op_info(Op op);
// Lookup by source spelling; returns false if unknown.
bool op_by_name(const std::string& name, Op& out);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class K : uint8_t { Var, Const, Lambda, Apply, Access };

  K kind;
  Op op = Op::Add;            // Apply
  int32_t sym = -1;           // Var name, Lambda param, Probe site id
  int32_t index = 0;          // Access component, 1-based
  Value cval;                 // Const
  std::vector<ExprPtr> kids;  // Apply args, Lambda [body], Access [base]
  std::vector<int32_t> temps; // Probe: temporaries in scope, in binding order

  static ExprPtr var(int32_t sym);
  static ExprPtr constant(Value v);
  static ExprPtr lambda(int32_t param, ExprPtr body);
  static ExprPtr apply(Op op, std::vector<ExprPtr> args);
  static ExprPtr access(ExprPtr base, int32_t index);
  static ExprPtr probe(int32_t site, std::vector<int32_t> temps, ExprPtr original);

  static int compare(const Expr& a, const Expr& b);
  std::string print() const;
  // Node count; access counts as one node on top of its base.
  int size() const;
};

inline bool expr_eq(const ExprPtr& a, const ExprPtr& b) {
  return a == b || (a && b && Expr::compare(*a, *b) == 0);
}

// Does `e` mention any of the given variables freely?
bool mentions(const ExprPtr& e, const std::vector<int32_t>& vars);
// Capture-naive substitution; program variables are unique by construction.
ExprPtr substitute(const ExprPtr& e, const std::map<int32_t, ExprPtr>& map);

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct Stmt {
  enum class K : uint8_t { Skip, Seq, If, Collect, Foreach };

  K kind;
  ExprPtr e;          // If condition, Collect expression, Foreach source
  StmtPtr a, b;       // Seq first/second, If then/else, Foreach body = a
  int32_t binder = -1;

  static StmtPtr skip();
  static StmtPtr seq(StmtPtr first, StmtPtr second);
  static StmtPtr cond(ExprPtr c, StmtPtr then_s, StmtPtr else_s);
  static StmtPtr collect(ExprPtr e);
  static StmtPtr foreach(int32_t binder, ExprPtr source, StmtPtr body);

  static int compare(const Stmt& a, const Stmt& b);
  std::string print() const;
};

inline bool stmt_eq(const StmtPtr& a, const StmtPtr& b) {
  return a == b || (a && b && Stmt::compare(*a, *b) == 0);
}

StmtPtr substitute_stmt(const StmtPtr& s, const std::map<int32_t, ExprPtr>& map);

// Fresh variable names for desugaring and rewriting. Scoped to its owner (a
// parse or a transformation run) rather than global so that repeated runs in
// one process produce identical names. Names already present in the input are
// registered via avoid() and skipped, so re-parsing printed output is safe.
class NameGen {
 public:
  explicit NameGen(std::string prefix) : prefix_(std::move(prefix)) {}
  void avoid(int32_t sym) { avoid_.insert(sym); }
  int32_t fresh();

 private:
  std::string prefix_;
  int n_ = 0;
  std::set<int32_t> avoid_;
};

// All symbols appearing in an expression/statement (vars, binders).
void collect_syms(const ExprPtr& e, std::set<int32_t>& out);
void collect_syms_stmt(const StmtPtr& s, std::set<int32_t>& out);

}  // namespace methyl
