#include "methyl/typecheck.hpp"

#include <utility>

#include "methyl/ast.hpp"
#include "methyl/functor.hpp"
#include "methyl/symbols.hpp"

namespace methyl {
namespace {

// Inferred types: the declared forms plus Any (unknown, e.g. the element
// type of an empty list) and Branch (a tagged value whose variant is not yet
// pinned down — one known alternative at a known tag).
struct TI {
  enum class K : uint8_t { Any, Int, Bool, Unit, List, Tree, Tuple, Variant, Branch };
  K k = K::Any;
  int tag = 0;              // Branch only, 1-based
  std::vector<TI> comps;    // List/Tree/Branch: 1; Tuple/Variant: n

  static TI any() { return {}; }
  static TI mk(K kind, std::vector<TI> comps = {}) {
    TI t;
    t.k = kind;
    t.comps = std::move(comps);
    return t;
  }
  static TI branch(int tag, TI payload) {
    TI t;
    t.k = K::Branch;
    t.tag = tag;
    t.comps.push_back(std::move(payload));
    return t;
  }
  bool is(K kind) const { return k == kind; }
  std::string print() const;
};

std::string TI::print() const {
  switch (k) {
    case K::Any: return "?";
    case K::Int: return "int";
    case K::Bool: return "bool";
    case K::Unit: return "unit";
    case K::List: return "(list " + comps[0].print() + ")";
    case K::Tree: return "(tree " + comps[0].print() + ")";
    case K::Tuple:
    case K::Variant: {
      std::string s = k == K::Tuple ? "(tuple" : "(variant";
      for (const TI& c : comps) s += " " + c.print();
      return s + ")";
    }
    case K::Branch:
      return "(variant-branch " + std::to_string(tag) + " " + comps[0].print() + ")";
  }
  return "?";
}

TI from_type(const Type& t) {
  switch (t.kind()) {
    case Type::Kind::Int: return TI::mk(TI::K::Int);
    case Type::Kind::Bool: return TI::mk(TI::K::Bool);
    case Type::Kind::Unit: return TI::mk(TI::K::Unit);
    case Type::Kind::List: return TI::mk(TI::K::List, {from_type(t.elem())});
    case Type::Kind::Tree: return TI::mk(TI::K::Tree, {from_type(t.elem())});
    case Type::Kind::Tuple:
    case Type::Kind::Variant: {
      std::vector<TI> cs;
      cs.reserve(t.comps().size());
      for (const Type& c : t.comps()) cs.push_back(from_type(c));
      return TI::mk(t.kind() == Type::Kind::Tuple ? TI::K::Tuple : TI::K::Variant,
                    std::move(cs));
    }
  }
  return TI::any();
}

// Would a value of inferred type `have` be accepted where `want` is
// expected? Any on either side is permissive.
bool fits(const TI& have, const TI& want) {
  if (have.is(TI::K::Any) || want.is(TI::K::Any)) return true;
  if (have.is(TI::K::Branch) && want.is(TI::K::Variant)) {
    if (have.tag < 1 || have.tag > static_cast<int>(want.comps.size())) return false;
    return fits(have.comps[0], want.comps[have.tag - 1]);
  }
  if (have.k != want.k) return false;
  switch (have.k) {
    case TI::K::Int:
    case TI::K::Bool:
    case TI::K::Unit:
      return true;
    case TI::K::List:
    case TI::K::Tree:
      return fits(have.comps[0], want.comps[0]);
    case TI::K::Branch:
      return have.tag == want.tag && fits(have.comps[0], want.comps[0]);
    case TI::K::Tuple:
    case TI::K::Variant: {
      if (have.comps.size() != want.comps.size()) return false;
      for (size_t i = 0; i < have.comps.size(); ++i)
        if (!fits(have.comps[i], want.comps[i])) return false;
      return true;
    }
    case TI::K::Any:
      return true;
  }
  return false;
}

// Either side acceptable for the other: used where two operands must agree
// (comparison, branch arms, list element extension).
bool agree(const TI& a, const TI& b) { return fits(a, b) || fits(b, a); }

// Common shape of two inferred types; widens to Any where they disagree.
TI join(const TI& a, const TI& b) {
  if (a.is(TI::K::Any)) return b;
  if (b.is(TI::K::Any)) return a;
  if (a.k != b.k) return TI::any();
  switch (a.k) {
    case TI::K::Int:
    case TI::K::Bool:
    case TI::K::Unit:
      return a;
    case TI::K::List:
    case TI::K::Tree:
      return TI::mk(a.k, {join(a.comps[0], b.comps[0])});
    case TI::K::Branch:
      if (a.tag != b.tag) return TI::any();
      return TI::branch(a.tag, join(a.comps[0], b.comps[0]));
    case TI::K::Tuple:
    case TI::K::Variant: {
      if (a.comps.size() != b.comps.size()) return TI::any();
      std::vector<TI> cs;
      cs.reserve(a.comps.size());
      for (size_t i = 0; i < a.comps.size(); ++i) cs.push_back(join(a.comps[i], b.comps[i]));
      return TI::mk(a.k, std::move(cs));
    }
    case TI::K::Any:
      return TI::any();
  }
  return TI::any();
}

TI type_of_value(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Unit: return TI::mk(TI::K::Unit);
    case Value::Kind::Bool: return TI::mk(TI::K::Bool);
    case Value::Kind::Int: return TI::mk(TI::K::Int);
    case Value::Kind::List: {
      TI e = TI::any();
      for (const Value& x : v.elems()) e = join(e, type_of_value(x));
      return TI::mk(TI::K::List, {e});
    }
    case Value::Kind::Tuple: {
      std::vector<TI> cs;
      cs.reserve(v.size());
      for (const Value& x : v.elems()) cs.push_back(type_of_value(x));
      return TI::mk(TI::K::Tuple, std::move(cs));
    }
    case Value::Kind::Tagged:
      return TI::branch(static_cast<int>(v.tag()), type_of_value(v.payload()));
    case Value::Kind::Tree: {
      if (v.tree_is_leaf()) return TI::mk(TI::K::Tree, {type_of_value(v.tree_value())});
      TI l = type_of_value(v.tree_left());
      TI r = type_of_value(v.tree_right());
      TI e = join(type_of_value(v.tree_value()),
                  join(l.is(TI::K::Tree) ? l.comps[0] : TI::any(),
                       r.is(TI::K::Tree) ? r.comps[0] : TI::any()));
      return TI::mk(TI::K::Tree, {std::move(e)});
    }
    case Value::Kind::Set:
      return TI::any();
  }
  return TI::any();
}

// Concrete Type for a fully pinned-down TI; nothing where it is still open
// (Any anywhere, or a tagged value whose enclosing variant is unknown).
std::optional<Type> ti_to_type(const TI& t) {
  switch (t.k) {
    case TI::K::Int: return Type::integer();
    case TI::K::Bool: return Type::boolean();
    case TI::K::Unit: return Type::unit();
    case TI::K::List:
    case TI::K::Tree: {
      auto e = ti_to_type(t.comps[0]);
      if (!e) return std::nullopt;
      return t.k == TI::K::List ? Type::list(*e) : Type::tree(*e);
    }
    case TI::K::Tuple:
    case TI::K::Variant: {
      std::vector<Type> cs;
      cs.reserve(t.comps.size());
      for (const TI& c : t.comps) {
        auto ct = ti_to_type(c);
        if (!ct) return std::nullopt;
        cs.push_back(*ct);
      }
      return t.k == TI::K::Tuple ? Type::tuple(std::move(cs)) : Type::variant(std::move(cs));
    }
    case TI::K::Any:
    case TI::K::Branch:
      return std::nullopt;
  }
  return std::nullopt;
}

class Checker {
 public:
  explicit Checker(const HyloProgram& prog) : prog_(prog) {}

  std::optional<Type> infer_concrete(const ExprPtr& e,
                                     const std::vector<std::pair<int32_t, Type>>& bindings) {
    env_.clear();
    for (const auto& [sym, t] : bindings) env_.emplace_back(sym, from_type(t));
    return ti_to_type(infer(e));
  }

  std::vector<std::string> run() {
    TI state = from_type(prog_.state_type);
    TI solution = from_type(prog_.solution_type);
    TI f_state = from_type(prog_.functor.apply(prog_.state_type));
    TI f_solution = from_type(prog_.functor.apply(prog_.solution_type));

    where_ = "root";
    TI rt = infer(prog_.root);
    if (!fits(rt, state))
      diag("initial state has type " + rt.print() + ", expected " + state.print(),
           prog_.root);

    where_ = "generator";
    with(prog_.psi.param, state, [&] { check_stmt(prog_.psi.body, f_state); });

    where_ = "combiner";
    with(prog_.phi.param, f_solution, [&] { check_stmt(prog_.phi.body, solution); });

    where_ = "scorer";
    TI score = infer_call(prog_.scorer, solution);
    if (!fits(score, TI::mk(TI::K::Int)))
      diag("scorer yields " + score.print() + ", expected int", prog_.scorer);

    if (prog_.thin) {
      where_ = "pruning key";
      for (const Comparison& c : prog_.thin->comps) {
        TI kt = infer_call(c.key, solution);
        if (!fits(kt, TI::mk(TI::K::Int)))
          diag("key yields " + kt.print() + ", expected int", c.key);
      }
    }
    if (prog_.memo_key) {
      where_ = "memo key";
      infer_call(prog_.memo_key, state);
    }
    return std::move(diags_);
  }

 private:
  void diag(const std::string& msg, const ExprPtr& at) {
    diags_.push_back(where_ + ": " + msg + " in " + at->print());
  }
  void diag(const std::string& msg, const StmtPtr& at) {
    diags_.push_back(where_ + ": " + msg + " in " + at->print());
  }

  template <typename Fn>
  void with(int32_t sym, TI t, Fn fn) {
    env_.emplace_back(sym, std::move(t));
    fn();
    env_.pop_back();
  }

  const TI* lookup(int32_t sym) const {
    for (auto it = env_.rbegin(); it != env_.rend(); ++it)
      if (it->first == sym) return &it->second;
    return nullptr;
  }

  TI infer_call(const ExprPtr& lam, const TI& arg) {
    if (lam->kind != Expr::K::Lambda) {
      diag("expected a one-argument function", lam);
      return TI::any();
    }
    TI out;
    with(lam->sym, arg, [&] { out = infer(lam->kids[0]); });
    return out;
  }

  void check_stmt(const StmtPtr& s, const TI& want_collect) {
    switch (s->kind) {
      case Stmt::K::Skip:
        return;
      case Stmt::K::Seq:
        check_stmt(s->a, want_collect);
        check_stmt(s->b, want_collect);
        return;
      case Stmt::K::If: {
        TI c = infer(s->e);
        if (!fits(c, TI::mk(TI::K::Bool)))
          diag("condition has type " + c.print() + ", expected bool", s->e);
        check_stmt(s->a, want_collect);
        check_stmt(s->b, want_collect);
        return;
      }
      case Stmt::K::Collect: {
        TI v = infer(s->e);
        if (!fits(v, want_collect))
          diag("collected value has type " + v.print() + ", expected " + want_collect.print(),
               s->e);
        return;
      }
      case Stmt::K::Foreach: {
        TI src = infer(s->e);
        TI elem = TI::any();
        if (src.is(TI::K::List))
          elem = src.comps[0];
        else if (!src.is(TI::K::Any))
          diag("iteration source has type " + src.print() + ", expected a list", s->e);
        with(s->binder, elem, [&] { check_stmt(s->a, want_collect); });
        return;
      }
    }
  }

  TI expect(const ExprPtr& ctx, const TI& have, TI::K want, const char* what) {
    if (!have.is(TI::K::Any) && !have.is(want))
      diag(std::string(what) + " has type " + have.print(), ctx);
    return have;
  }

  TI infer(const ExprPtr& e) {
    switch (e->kind) {
      case Expr::K::Var: {
        if (const TI* t = lookup(e->sym)) return *t;
        for (const SpaceDecl& d : prog_.constants)
          if (d.name == e->sym) return from_type(d.type);
        diag("unbound variable " + Symbols::name(e->sym), e);
        return TI::any();
      }
      case Expr::K::Const:
        return type_of_value(e->cval);
      case Expr::K::Lambda:
        diag("function value outside a call position", e);
        return TI::any();
      case Expr::K::Access: {
        TI base = infer(e->kids[0]);
        if (base.is(TI::K::Any)) return TI::any();
        if (!base.is(TI::K::Tuple)) {
          diag("component access on non-tuple of type " + base.print(), e);
          return TI::any();
        }
        // Access indices are 1-based, matching the surface `get`.
        if (e->index < 1 || e->index > static_cast<int32_t>(base.comps.size())) {
          diag("tuple has " + std::to_string(base.comps.size()) + " components", e);
          return TI::any();
        }
        return base.comps[e->index - 1];
      }
      case Expr::K::Apply:
        return infer_apply(e);
    }
    return TI::any();
  }

  TI infer_apply(const ExprPtr& e) {
    const TI ti_int = TI::mk(TI::K::Int);
    const TI ti_bool = TI::mk(TI::K::Bool);
    if (e->op == Op::Probe) return infer(e->kids[0]);
    if (e->op == Op::Fold) return infer_fold(e);
    if (e->op == Op::TFold) return infer_tfold(e);

    std::vector<TI> k;
    k.reserve(e->kids.size());
    for (const ExprPtr& c : e->kids) k.push_back(infer(c));

    auto list_elem = [&](const TI& t, const ExprPtr& at) -> TI {
      if (t.is(TI::K::Any)) return TI::any();
      if (t.is(TI::K::List)) return t.comps[0];
      diag("expected a list, got " + t.print(), at);
      return TI::any();
    };

    switch (e->op) {
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Neg:
      case Op::Min:
      case Op::Max:
        for (size_t i = 0; i < k.size(); ++i)
          expect(e->kids[i], k[i], TI::K::Int, "arithmetic operand");
        return ti_int;
      case Op::Lt:
      case Op::Le:
      case Op::Gt:
      case Op::Ge:
        for (size_t i = 0; i < k.size(); ++i)
          expect(e->kids[i], k[i], TI::K::Int, "comparison operand");
        return ti_bool;
      case Op::Eq:
      case Op::Ne:
        if (!agree(k[0], k[1]))
          diag("comparing " + k[0].print() + " with " + k[1].print(), e);
        return ti_bool;
      case Op::And:
      case Op::Or:
      case Op::Not:
        for (size_t i = 0; i < k.size(); ++i)
          expect(e->kids[i], k[i], TI::K::Bool, "logical operand");
        return ti_bool;
      case Op::Ite: {
        expect(e->kids[0], k[0], TI::K::Bool, "condition");
        if (!agree(k[1], k[2]))
          diag("branches have types " + k[1].print() + " and " + k[2].print(), e);
        return join(k[1], k[2]);
      }
      case Op::MkTuple:
        return TI::mk(TI::K::Tuple, std::move(k));
      case Op::Len:
        list_elem(k[0], e->kids[0]);
        return ti_int;
      case Op::Head:
        return list_elem(k[0], e->kids[0]);
      case Op::Tail:
        list_elem(k[0], e->kids[0]);
        return k[0].is(TI::K::List) ? k[0] : TI::mk(TI::K::List, {TI::any()});
      case Op::Cons: {
        TI elem = list_elem(k[1], e->kids[1]);
        if (!agree(k[0], elem))
          diag("prepending " + k[0].print() + " onto a list of " + elem.print(), e);
        return TI::mk(TI::K::List, {join(k[0], elem)});
      }
      case Op::Idx:
        expect(e->kids[1], k[1], TI::K::Int, "index");
        return list_elem(k[0], e->kids[0]);
      case Op::Upto:
        expect(e->kids[0], k[0], TI::K::Int, "bound");
        expect(e->kids[1], k[1], TI::K::Int, "bound");
        return TI::mk(TI::K::List, {ti_int});
      case Op::MkList: {
        TI elem = TI::any();
        for (size_t i = 0; i < k.size(); ++i) {
          if (!agree(elem, k[i]))
            diag("list elements have types " + elem.print() + " and " + k[i].print(),
                 e->kids[i]);
          elem = join(elem, k[i]);
        }
        return TI::mk(TI::K::List, {std::move(elem)});
      }
      case Op::Match: {
        TI elem = list_elem(k[1], e->kids[1]);
        if (!agree(k[0], elem))
          diag("searching for " + k[0].print() + " in a list of " + elem.print(), e);
        return ti_int;
      }
      case Op::TVal: {
        TI t = expect(e->kids[0], k[0], TI::K::Tree, "tree operand");
        return t.is(TI::K::Tree) ? t.comps[0] : TI::any();
      }
      case Op::TLeft:
      case Op::TRight: {
        TI t = expect(e->kids[0], k[0], TI::K::Tree, "tree operand");
        return t.is(TI::K::Tree) ? t : TI::mk(TI::K::Tree, {TI::any()});
      }
      case Op::IsLeaf:
        expect(e->kids[0], k[0], TI::K::Tree, "tree operand");
        return ti_bool;
      case Op::TLeaf:
        return TI::mk(TI::K::Tree, {k[0]});
      case Op::TNode: {
        TI le = k[1].is(TI::K::Tree) ? k[1].comps[0] : TI::any();
        TI re = k[2].is(TI::K::Tree) ? k[2].comps[0] : TI::any();
        expect(e->kids[1], k[1], TI::K::Tree, "subtree");
        expect(e->kids[2], k[2], TI::K::Tree, "subtree");
        return TI::mk(TI::K::Tree, {join(k[0], join(le, re))});
      }
      case Op::VTag:
        if (!k[0].is(TI::K::Any) && !k[0].is(TI::K::Variant) && !k[0].is(TI::K::Branch))
          diag("tag of non-variant of type " + k[0].print(), e);
        return ti_int;
      case Op::VPayload: {
        if (k[0].is(TI::K::Branch)) return k[0].comps[0];
        if (k[0].is(TI::K::Variant)) {
          // Payload of an unresolved variant: precise only when every
          // alternative agrees; otherwise unknown.
          TI p = k[0].comps.empty() ? TI::any() : k[0].comps[0];
          for (size_t i = 1; i < k[0].comps.size(); ++i) {
            if (!agree(p, k[0].comps[i])) return TI::any();
            p = join(p, k[0].comps[i]);
          }
          return p;
        }
        if (!k[0].is(TI::K::Any))
          diag("payload of non-variant of type " + k[0].print(), e);
        return TI::any();
      }
      case Op::MkTag: {
        const ExprPtr& tk = e->kids[0];
        if (tk->kind != Expr::K::Const || !tk->cval.is(Value::Kind::Int) ||
            tk->cval.as_int() < 1) {
          diag("tag index must be a positive integer constant", e);
          return TI::any();
        }
        return TI::branch(static_cast<int>(tk->cval.as_int()), std::move(k[1]));
      }
      default:
        return TI::any();
    }
  }

  TI infer_fold(const ExprPtr& e) {
    TI lt = infer(e->kids[2]);
    TI elem = TI::any();
    if (lt.is(TI::K::List))
      elem = lt.comps[0];
    else if (!lt.is(TI::K::Any))
      diag("folding over non-list of type " + lt.print(), e->kids[2]);
    TI acc = infer(e->kids[1]);
    TI step = infer_call(e->kids[0], TI::mk(TI::K::Tuple, {acc, elem}));
    if (!agree(step, acc))
      diag("fold step yields " + step.print() + " but the accumulator is " + acc.print(), e);
    return join(acc, step);
  }

  TI infer_tfold(const ExprPtr& e) {
    TI tt = infer(e->kids[2]);
    TI elem = TI::any();
    if (tt.is(TI::K::Tree))
      elem = tt.comps[0];
    else if (!tt.is(TI::K::Any))
      diag("folding over non-tree of type " + tt.print(), e->kids[2]);
    TI leaf = infer_call(e->kids[0], elem);
    TI node = infer_call(e->kids[1], TI::mk(TI::K::Tuple, {elem, leaf, leaf}));
    if (!agree(node, leaf))
      diag("node case yields " + node.print() + " but the leaf case yields " + leaf.print(),
           e);
    return join(leaf, node);
  }

  const HyloProgram& prog_;
  std::string where_;
  std::vector<std::pair<int32_t, TI>> env_;
  std::vector<std::string> diags_;
};

}  // namespace

std::vector<std::string> typecheck(const HyloProgram& prog) {
  return Checker(prog).run();
}

std::optional<Type> infer_expr_type(const ExprPtr& e,
                                    const std::vector<std::pair<int32_t, Type>>& bindings,
                                    const HyloProgram& prog) {
  return Checker(prog).infer_concrete(e, bindings);
}

bool value_inhabits(const Value& v, const Type& t) {
  switch (t.kind()) {
    case Type::Kind::Int:
      return v.is(Value::Kind::Int);
    case Type::Kind::Bool:
      return v.is(Value::Kind::Bool);
    case Type::Kind::Unit:
      return v.is(Value::Kind::Unit);
    case Type::Kind::List: {
      if (!v.is(Value::Kind::List)) return false;
      for (const Value& x : v.elems())
        if (!value_inhabits(x, t.elem())) return false;
      return true;
    }
    case Type::Kind::Tree: {
      if (!v.is(Value::Kind::Tree)) return false;
      if (!value_inhabits(v.tree_value(), t.elem())) return false;
      if (v.tree_is_leaf()) return true;
      return value_inhabits(v.tree_left(), t) && value_inhabits(v.tree_right(), t);
    }
    case Type::Kind::Tuple: {
      if (!v.is(Value::Kind::Tuple) || v.size() != t.comps().size()) return false;
      for (size_t i = 0; i < v.size(); ++i)
        if (!value_inhabits(v.elems()[i], t.comps()[i])) return false;
      return true;
    }
    case Type::Kind::Variant: {
      if (!v.is(Value::Kind::Tagged)) return false;
      int64_t tag = v.tag();
      if (tag < 1 || tag > static_cast<int64_t>(t.comps().size())) return false;
      return value_inhabits(v.payload(), t.comps()[static_cast<size_t>(tag - 1)]);
    }
  }
  return false;
}

}  // namespace methyl
