#include "methyl/grammar.hpp"

#include <map>
#include <set>
#include <utility>

#include "methyl/eval.hpp"
#include "methyl/symbols.hpp"

namespace methyl {

namespace {

bool is_const_int(const ExprPtr& e, int64_t v) {
  return e->kind == Expr::K::Const && e->cval.is(Value::Kind::Int) && e->cval.as_int() == v;
}

// Canonical construction: returns nothing when the application folds to a
// constant, duplicates a smaller term, or is the unsorted twin of a
// commutative application.
ExprPtr make_canon(Op op, std::vector<ExprPtr> kids) {
  bool all_const = true;
  for (const ExprPtr& k : kids) all_const = all_const && k->kind == Expr::K::Const;
  if (all_const) return nullptr;  // the constant pool is fixed up front

  const OpInfo& oi = op_info(op);
  if (oi.commutative && kids.size() == 2 && Expr::compare(*kids[0], *kids[1]) > 0)
    std::swap(kids[0], kids[1]);
  bool dup = kids.size() >= 2 && Expr::compare(*kids[0], *kids[1]) == 0;

  switch (op) {
    case Op::Add:
      if (is_const_int(kids[0], 0) || is_const_int(kids[1], 0)) return nullptr;
      break;
    case Op::Sub:
      if (dup || is_const_int(kids[1], 0) || is_const_int(kids[0], 0)) return nullptr;
      break;
    case Op::Mul:
      for (const ExprPtr& k : kids)
        if (is_const_int(k, 0) || is_const_int(k, 1)) return nullptr;
      break;
    case Op::Neg:
      if (kids[0]->kind == Expr::K::Apply && kids[0]->op == Op::Neg) return nullptr;
      break;
    case Op::Min:
    case Op::Max:
    case Op::And:
    case Op::Or:
    case Op::Eq:
    case Op::Lt:
    case Op::Le:
      if (dup) return nullptr;
      break;
    case Op::Not:
      if (kids[0]->kind == Expr::K::Apply && kids[0]->op == Op::Not) return nullptr;
      break;
    case Op::Ite:
      if (Expr::compare(*kids[1], *kids[2]) == 0) return nullptr;
      break;
    default:
      break;
  }
  return Expr::apply(op, std::move(kids));
}

}  // namespace

class TermEnum::Builder {
 public:
  Builder(TermEnum& out, std::vector<GrammarInput> inputs, std::vector<GrammarInput> globals,
          GrammarConfig cfg, Tier tier)
      : out_(out), inputs_(std::move(inputs)), globals_(std::move(globals)),
        cfg_(cfg), tier_(tier) {}

  void build() {
    by_size_.assign(static_cast<size_t>(cfg_.max_size) + 1, {});
    seed_terminals();
    if (tier_ == Tier::Polynomial) seed_folds();
    for (int s = 2; s <= cfg_.max_size && !out_.full_; ++s) grow(s);
  }

 private:
  using Layer = std::map<Type, std::vector<ExprPtr>>;

  void add(int size, const Type& t, ExprPtr e) {
    if (!e || out_.full_) return;
    if (!seen_.insert(e->print()).second) return;
    by_size_[static_cast<size_t>(size)][t].push_back(e);
    out_.emitted_.push_back({std::move(e), t, size});
    if (static_cast<int>(out_.emitted_.size()) >= cfg_.max_terms) out_.full_ = true;
  }

  // An input and its transitive tuple components, each a size-1 terminal.
  void add_terminal_closure(const ExprPtr& base, const Type& t) {
    add(1, t, base);
    if (t.is(Type::Kind::Tuple)) {
      const auto& comps = t.comps();
      for (size_t i = 0; i < comps.size(); ++i)
        add_terminal_closure(Expr::access(base, static_cast<int32_t>(i) + 1), comps[i]);
    }
  }

  void seed_terminals() {
    for (const GrammarInput& in : inputs_) add_terminal_closure(Expr::var(in.name), in.type);
    for (const GrammarInput& g : globals_) add_terminal_closure(Expr::var(g.name), g.type);
    if (cfg_.int_literals) {
      for (int64_t v : {-1, 0, 1, 2})
        add(1, Type::integer(), Expr::constant(Value::integer(v)));
      add(1, Type::integer(), Expr::constant(Value::integer(kNegInf)));
    }
  }

  const std::vector<ExprPtr>* terms(int size, const Type& t) const {
    const Layer& layer = by_size_[static_cast<size_t>(size)];
    auto it = layer.find(t);
    return it == layer.end() ? nullptr : &it->second;
  }

  std::vector<std::pair<Type, std::vector<ExprPtr>>> snapshot(int size) const {
    std::vector<std::pair<Type, std::vector<ExprPtr>>> out;
    for (const auto& [t, es] : by_size_[static_cast<size_t>(size)]) out.emplace_back(t, es);
    return out;
  }

  bool admits(Op op) const {
    const OpInfo& oi = op_info(op);
    if (op == Op::Mul && !cfg_.nonlinear) return false;
    return tier_ == Tier::Constant ? oi.const_tier : oi.const_tier || oi.poly_tier;
  }

  void grow(int s) {
    grow_unary(s);
    grow_binary(s);
    grow_ite(s);
    if (tier_ == Tier::Polynomial) grow_match(s);
    flush_pending(s);
  }

  void grow_unary(int s) {
    // One operand of size s-1.
    for (const auto& [t, es] : snapshot(s - 1)) {
      for (const ExprPtr& e : es) {
        if (out_.full_) return;
        if (t.is(Type::Kind::Int) && admits(Op::Neg)) add(s, t, make_canon(Op::Neg, {e}));
        if (t.is(Type::Kind::Bool) && admits(Op::Not)) add(s, t, make_canon(Op::Not, {e}));
        if (t.is(Type::Kind::List)) {
          if (admits(Op::Len)) add(s, Type::integer(), make_canon(Op::Len, {e}));
          if (admits(Op::Head)) add(s, t.elem(), make_canon(Op::Head, {e}));
          if (admits(Op::Tail)) add(s, t, make_canon(Op::Tail, {e}));
        }
        if (t.is(Type::Kind::Tree)) {
          if (admits(Op::TVal)) add(s, t.elem(), make_canon(Op::TVal, {e}));
          if (admits(Op::TLeft)) add(s, t, make_canon(Op::TLeft, {e}));
          if (admits(Op::TRight)) add(s, t, make_canon(Op::TRight, {e}));
          if (admits(Op::IsLeaf)) add(s, Type::boolean(), make_canon(Op::IsLeaf, {e}));
        }
        if (t.is(Type::Kind::Tuple)) {
          const auto& comps = t.comps();
          for (size_t i = 0; i < comps.size(); ++i)
            add(s, comps[i], Expr::access(e, static_cast<int32_t>(i) + 1));
        }
      }
    }
  }

  void grow_binary(int s) {
    const Type ti = Type::integer();
    const Type tb = Type::boolean();
    for (int ls = 1; ls <= s - 2; ++ls) {
      int rs = s - 1 - ls;
      // Int x Int.
      const auto* li = terms(ls, ti);
      const auto* ri = terms(rs, ti);
      if (li && ri) {
        for (const ExprPtr& a : *li) {
          for (const ExprPtr& b : *ri) {
            if (out_.full_) return;
            for (Op op : {Op::Add, Op::Sub, Op::Mul, Op::Min, Op::Max})
              if (admits(op)) add(s, ti, make_canon(op, {a, b}));
            for (Op op : {Op::Lt, Op::Le, Op::Eq})
              if (admits(op)) add(s, tb, make_canon(op, {a, b}));
          }
        }
      }
      // Bool x Bool.
      const auto* lb = terms(ls, tb);
      const auto* rb = terms(rs, tb);
      if (lb && rb) {
        for (const ExprPtr& a : *lb) {
          for (const ExprPtr& b : *rb) {
            if (out_.full_) return;
            for (Op op : {Op::And, Op::Or})
              if (admits(op)) add(s, tb, make_canon(op, {a, b}));
          }
        }
      }
      // List(E) x Int indexing.
      if (admits(Op::Idx) && ri) {
        for (const auto& [t, es] : snapshot(ls)) {
          if (!t.is(Type::Kind::List)) continue;
          for (const ExprPtr& a : es)
            for (const ExprPtr& b : *ri) {
              if (out_.full_) return;
              add(s, t.elem(), make_canon(Op::Idx, {a, b}));
            }
        }
      }
    }
  }

  void grow_ite(int s) {
    if (!admits(Op::Ite)) return;
    const Type ti = Type::integer();
    const Type tb = Type::boolean();
    for (int cs = 1; cs <= s - 3; ++cs) {
      const auto* cond = terms(cs, tb);
      if (!cond) continue;
      for (int as = 1; as <= s - 2 - cs; ++as) {
        int bs = s - 1 - cs - as;
        const auto* ta = terms(as, ti);
        const auto* tbv = terms(bs, ti);
        if (!ta || !tbv) continue;
        for (const ExprPtr& c : *cond)
          for (const ExprPtr& a : *ta)
            for (const ExprPtr& b : *tbv) {
              if (out_.full_) return;
              add(s, ti, make_canon(Op::Ite, {c, a, b}));
            }
      }
    }
  }

  void grow_match(int s) {
    if (!admits(Op::Match)) return;
    // Needle of size s-2, haystack a size-1 list terminal of matching elems.
    for (const auto& [t, es] : snapshot(1)) {
      if (!t.is(Type::Kind::List)) continue;
      const auto* needles = terms(s - 2, t.elem());
      if (!needles) continue;
      for (const ExprPtr& n : *needles)
        for (const ExprPtr& h : es) {
          if (out_.full_) return;
          add(s, Type::integer(), make_canon(Op::Match, {n, h}));
        }
    }
  }

  // Folds are assembled once from nested constant-tier body enumerations and
  // parked until layer growth reaches their size.
  void seed_folds() {
    NameGen gen("q");
    for (const GrammarInput& in : inputs_) gen.avoid(in.name);
    for (const GrammarInput& g : globals_) gen.avoid(g.name);

    GrammarConfig body_cfg = cfg_;
    body_cfg.max_size = cfg_.fold_body_size;
    body_cfg.max_terms = cfg_.fold_body_terms;

    std::vector<ExprPtr> inits;
    inits.push_back(Expr::constant(Value::integer(0)));
    inits.push_back(Expr::constant(Value::integer(1)));
    for (const GrammarInput& g : globals_)
      if (g.type.is(Type::Kind::Int)) inits.push_back(Expr::var(g.name));

    auto body_terms = [&](const Type& param_type, int32_t param) {
      TermEnum nested({{param, param_type}}, globals_, body_cfg, Tier::Constant);
      std::vector<std::pair<ExprPtr, int>> out;
      for (const Typed& t : nested.all())
        if (t.type.is(Type::Kind::Int)) out.emplace_back(t.term, t.size);
      return out;
    };

    for (const GrammarInput& in : inputs_) {
      if (in.type.is(Type::Kind::List)) {
        int32_t p = gen.fresh();
        auto bodies = body_terms(Type::tuple({Type::integer(), in.type.elem()}), p);
        for (const auto& [body, bsize] : bodies) {
          if (!mentions(body, {p})) continue;  // a fold ignoring its input is no fold
          for (const ExprPtr& init : inits) {
            int total = bsize + 4;  // fold + lambda + body + init + list
            if (total > cfg_.max_size) continue;
            pending_[total].push_back(
                Expr::apply(Op::Fold, {Expr::lambda(p, body), init, Expr::var(in.name)}));
          }
        }
      }
      if (in.type.is(Type::Kind::Tree)) {
        int32_t pl = gen.fresh();
        int32_t pn = gen.fresh();
        auto leaves = body_terms(in.type.elem(), pl);
        auto nodes = body_terms(
            Type::tuple({in.type.elem(), Type::integer(), Type::integer()}), pn);
        for (const auto& [leaf, lsize] : leaves) {
          for (const auto& [node, nsize] : nodes) {
            if (!mentions(node, {pn})) continue;
            int total = lsize + nsize + 4;  // tfold + two lambdas + bodies + tree
            if (total > cfg_.max_size) continue;
            pending_[total].push_back(Expr::apply(
                Op::TFold, {Expr::lambda(pl, leaf), Expr::lambda(pn, node), Expr::var(in.name)}));
          }
        }
      }
    }
  }

  void flush_pending(int s) {
    auto it = pending_.find(s);
    if (it == pending_.end()) return;
    for (ExprPtr& e : it->second) {
      if (out_.full_) return;
      add(s, Type::integer(), std::move(e));
    }
    pending_.erase(it);
  }

  TermEnum& out_;
  std::vector<GrammarInput> inputs_;
  std::vector<GrammarInput> globals_;
  GrammarConfig cfg_;
  Tier tier_;
  std::vector<Layer> by_size_;
  std::map<int, std::vector<ExprPtr>> pending_;
  std::set<std::string> seen_;
};

TermEnum::TermEnum(std::vector<GrammarInput> inputs, std::vector<GrammarInput> globals,
                   GrammarConfig cfg, Tier tier) {
  Builder(*this, std::move(inputs), std::move(globals), cfg, tier).build();
}

std::vector<ExprPtr> TermEnum::of_type(const Type& want) const {
  std::vector<ExprPtr> out;
  for (const Typed& t : emitted_)
    if (t.type == want) out.push_back(t.term);
  return out;
}

std::vector<std::optional<Value>> evaluate_batch(const ExprPtr& term,
                                                 const std::vector<int32_t>& names,
                                                 const std::vector<std::vector<Value>>& rows,
                                                 const Instance* instance) {
  Interp in(instance);
  std::vector<std::optional<Value>> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    Env env;
    for (size_t i = 0; i < names.size() && i < row.size(); ++i) env.push(names[i], row[i]);
    Value v;
    if (in.eval(term, env, v))
      out.emplace_back(std::move(v));
    else
      out.emplace_back(std::nullopt);
  }
  return out;
}

}  // namespace methyl
