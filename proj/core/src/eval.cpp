#include "methyl/eval.hpp"

#include <pthread.h>

#include <algorithm>

#include "methyl/error.hpp"
#include "methyl/symbols.hpp"
#include "methyl/thinning.hpp"

namespace methyl {

namespace {

bool add_ck(int64_t a, int64_t b, int64_t& out) { return !__builtin_add_overflow(a, b, &out); }
bool sub_ck(int64_t a, int64_t b, int64_t& out) { return !__builtin_sub_overflow(a, b, &out); }
bool mul_ck(int64_t a, int64_t b, int64_t& out) { return !__builtin_mul_overflow(a, b, &out); }

constexpr int64_t kMaxUpto = 1'000'000;

}  // namespace

Interp::Interp(const Instance* inst) : inst_(inst) {}

bool Interp::call(const ExprPtr& lambda, const Value& arg, Value& out) {
  if (!lambda || lambda->kind != Expr::K::Lambda) return miss("expected a lambda");
  Env env;
  env.push(lambda->sym, arg);
  return eval(lambda->kids[0], env, out);
}

bool Interp::eval(const ExprPtr& e, Env& env, Value& out) {
  if (max_fuel && ++fuel_used > max_fuel)
    fail(Error::Kind::Limit, "evaluation budget exhausted");
  switch (e->kind) {
    case Expr::K::Var: {
      if (const Value* v = env.find(e->sym)) {
        out = *v;
        return true;
      }
      if (inst_) {
        if (const Value* v = inst_->find(e->sym)) {
          out = *v;
          return true;
        }
      }
      return miss("unbound variable: " + Symbols::name(e->sym));
    }
    case Expr::K::Const:
      out = e->cval;
      return true;
    case Expr::K::Lambda:
      return miss("lambda outside call position");
    case Expr::K::Access: {
      Value base;
      if (!eval(e->kids[0], env, base)) return false;
      if (!base.is(Value::Kind::Tuple)) return miss("component access on non-tuple");
      if (e->index < 1 || e->index > static_cast<int32_t>(base.size()))
        return miss("component index out of range");
      out = base.elems()[e->index - 1];
      return true;
    }
    case Expr::K::Apply:
      break;
  }

  // Lazy forms first.
  switch (e->op) {
    case Op::And:
    case Op::Or: {
      bool want_true = e->op == Op::And;
      for (const auto& k : e->kids) {
        Value v;
        if (!eval(k, env, v)) return false;
        if (!v.is(Value::Kind::Bool)) return miss("guard expects booleans");
        if (v.as_bool() != want_true) {
          out = Value::boolean(!want_true);
          return true;
        }
      }
      out = Value::boolean(want_true);
      return true;
    }
    case Op::Ite: {
      Value c;
      if (!eval(e->kids[0], env, c)) return false;
      if (!c.is(Value::Kind::Bool)) return miss("condition must be boolean");
      return eval(e->kids[c.as_bool() ? 1 : 2], env, out);
    }
    case Op::Fold: {
      const ExprPtr& lam = e->kids[0];
      if (lam->kind != Expr::K::Lambda) return miss("fold expects a lambda");
      Value acc, xs;
      if (!eval(e->kids[1], env, acc)) return false;
      if (!eval(e->kids[2], env, xs)) return false;
      if (!xs.is(Value::Kind::List)) return miss("fold expects a list");
      size_t m = env.mark();
      for (const Value& x : xs.elems()) {
        env.push(lam->sym, Value::tuple({acc, x}));
        bool ok = eval(lam->kids[0], env, acc);
        env.rewind(m);
        if (!ok) return false;
      }
      out = acc;
      return true;
    }
    case Op::TFold: {
      const ExprPtr& leaf_fn = e->kids[0];
      const ExprPtr& node_fn = e->kids[1];
      if (leaf_fn->kind != Expr::K::Lambda || node_fn->kind != Expr::K::Lambda)
        return miss("tfold expects lambdas");
      Value t;
      if (!eval(e->kids[2], env, t)) return false;
      if (!t.is(Value::Kind::Tree)) return miss("tfold expects a tree");
      // explicit recursion; tree depth is bounded by engine limits
      std::function<bool(const Value&, Value&)> go = [&](const Value& tr, Value& res) -> bool {
        size_t m = env.mark();
        bool ok;
        if (tr.tree_is_leaf()) {
          env.push(leaf_fn->sym, tr.tree_value());
          ok = eval(leaf_fn->kids[0], env, res);
        } else {
          Value la, ra;
          if (!go(tr.tree_left(), la) || !go(tr.tree_right(), ra)) return false;
          env.push(node_fn->sym, Value::tuple({tr.tree_value(), la, ra}));
          ok = eval(node_fn->kids[0], env, res);
        }
        env.rewind(m);
        return ok;
      };
      return go(t, out);
    }
    case Op::Probe: {
      if (!eval(e->kids[0], env, out)) return false;
      if (probe) {
        std::vector<Value> inputs;
        inputs.reserve(e->temps.size());
        for (int32_t sym : e->temps) {
          const Value* v = env.find(sym);
          if (!v && inst_) v = inst_->find(sym);
          if (!v) return miss("recorded temporary is not in scope");
          inputs.push_back(*v);
        }
        probe(e->sym, inputs, out);
      }
      return true;
    }
    default:
      break;
  }
  return apply_op(*e, env, out);
}

bool Interp::apply_op(const Expr& e, Env& env, Value& out) {
  std::vector<Value> a(e.kids.size());
  for (size_t i = 0; i < e.kids.size(); ++i)
    if (!eval(e.kids[i], env, a[i])) return false;

  auto ints = [&](size_t upto) {
    for (size_t i = 0; i < upto; ++i)
      if (!a[i].is(Value::Kind::Int)) return false;
    return true;
  };

  switch (e.op) {
    case Op::Add:
    case Op::Mul:
    case Op::Min:
    case Op::Max: {
      if (!ints(a.size())) return miss("arithmetic expects integers");
      int64_t acc = a[0].as_int();
      for (size_t i = 1; i < a.size(); ++i) {
        int64_t x = a[i].as_int();
        bool ok = true;
        switch (e.op) {
          case Op::Add: ok = add_ck(acc, x, acc); break;
          case Op::Mul: ok = mul_ck(acc, x, acc); break;
          case Op::Min: acc = std::min(acc, x); break;
          default: acc = std::max(acc, x); break;
        }
        if (!ok) return miss("integer overflow");
      }
      out = Value::integer(acc);
      return true;
    }
    case Op::Sub: {
      if (!ints(2)) return miss("arithmetic expects integers");
      int64_t r;
      if (!sub_ck(a[0].as_int(), a[1].as_int(), r)) return miss("integer overflow");
      out = Value::integer(r);
      return true;
    }
    case Op::Neg: {
      if (!ints(1)) return miss("arithmetic expects integers");
      int64_t r;
      if (!sub_ck(0, a[0].as_int(), r)) return miss("integer overflow");
      out = Value::integer(r);
      return true;
    }
    case Op::Lt:
    case Op::Le:
    case Op::Gt:
    case Op::Ge: {
      if (!ints(2)) return miss("comparison expects integers");
      int64_t x = a[0].as_int(), y = a[1].as_int();
      bool r = e.op == Op::Lt ? x < y : e.op == Op::Le ? x <= y : e.op == Op::Gt ? x > y : x >= y;
      out = Value::boolean(r);
      return true;
    }
    case Op::Eq:
      out = Value::boolean(a[0] == a[1]);
      return true;
    case Op::Ne:
      out = Value::boolean(a[0] != a[1]);
      return true;
    case Op::Not:
      if (!a[0].is(Value::Kind::Bool)) return miss("not expects a boolean");
      out = Value::boolean(!a[0].as_bool());
      return true;
    case Op::MkTuple:
      out = Value::tuple(std::move(a));
      return true;
    case Op::MkList:
      out = Value::list(std::move(a));
      return true;
    case Op::Cons: {
      if (!a[1].is(Value::Kind::List)) return miss("cons expects a list");
      std::vector<Value> xs;
      xs.reserve(a[1].size() + 1);
      xs.push_back(std::move(a[0]));
      for (const Value& v : a[1].elems()) xs.push_back(v);
      out = Value::list(std::move(xs));
      return true;
    }
    case Op::Len:
      if (!a[0].is(Value::Kind::List)) return miss("len expects a list");
      out = Value::integer(static_cast<int64_t>(a[0].size()));
      return true;
    case Op::Head:
      if (!a[0].is(Value::Kind::List)) return miss("head expects a list");
      if (a[0].size() == 0) return miss("head of empty list");
      out = a[0].elems()[0];
      return true;
    case Op::Tail: {
      if (!a[0].is(Value::Kind::List)) return miss("tail expects a list");
      if (a[0].size() == 0) return miss("tail of empty list");
      std::vector<Value> xs(a[0].elems().begin() + 1, a[0].elems().end());
      out = Value::list(std::move(xs));
      return true;
    }
    case Op::Idx: {
      if (!a[0].is(Value::Kind::List) || !a[1].is(Value::Kind::Int))
        return miss("access expects a list and an index");
      int64_t i = a[1].as_int();
      if (i < 0 || i >= static_cast<int64_t>(a[0].size()))
        return miss("list index out of range");
      out = a[0].elems()[static_cast<size_t>(i)];
      return true;
    }
    case Op::Upto: {
      if (!ints(2)) return miss("upto expects integers");
      int64_t lo = a[0].as_int(), hi = a[1].as_int();
      if (hi - lo + 1 > kMaxUpto) return miss("upto range too large");
      std::vector<Value> xs;
      for (int64_t v = lo; v <= hi; ++v) xs.push_back(Value::integer(v));
      out = Value::list(std::move(xs));
      return true;
    }
    case Op::Match: {
      if (!a[1].is(Value::Kind::List)) return miss("match expects a list");
      const auto& xs = a[1].elems();
      for (size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] == a[0]) {
          out = Value::integer(static_cast<int64_t>(i));
          return true;
        }
      }
      return miss("match found no occurrence");
    }
    case Op::TVal:
      if (!a[0].is(Value::Kind::Tree)) return miss("tval expects a tree");
      out = a[0].tree_value();
      return true;
    case Op::TLeft:
    case Op::TRight:
      if (!a[0].is(Value::Kind::Tree)) return miss("child access expects a tree");
      if (a[0].tree_is_leaf()) return miss("child access on a leaf");
      out = e.op == Op::TLeft ? a[0].tree_left() : a[0].tree_right();
      return true;
    case Op::IsLeaf:
      if (!a[0].is(Value::Kind::Tree)) return miss("isleaf expects a tree");
      out = Value::boolean(a[0].tree_is_leaf());
      return true;
    case Op::TLeaf:
      out = Value::tree_leaf(std::move(a[0]));
      return true;
    case Op::TNode:
      if (!a[1].is(Value::Kind::Tree) || !a[2].is(Value::Kind::Tree))
        return miss("node expects two subtrees");
      out = Value::tree_node(std::move(a[0]), std::move(a[1]), std::move(a[2]));
      return true;
    case Op::VTag:
      if (!a[0].is(Value::Kind::Tagged)) return miss("vtag expects a tagged value");
      out = Value::integer(a[0].tag());
      return true;
    case Op::VPayload:
      if (!a[0].is(Value::Kind::Tagged)) return miss("vpayload expects a tagged value");
      out = a[0].payload();
      return true;
    case Op::MkTag: {
      if (!a[0].is(Value::Kind::Int) || a[0].as_int() < 1) return miss("bad tag index");
      out = Value::tagged(static_cast<int>(a[0].as_int()), std::move(a[1]));
      return true;
    }
    default:
      return miss("operator cannot be applied here");
  }
}

bool Interp::exec(const StmtPtr& s, Env& env, std::vector<Value>& out) {
  switch (s->kind) {
    case Stmt::K::Skip:
      return true;
    case Stmt::K::Seq:
      return exec(s->a, env, out) && exec(s->b, env, out);
    case Stmt::K::If: {
      Value c;
      if (!eval(s->e, env, c)) return false;
      if (!c.is(Value::Kind::Bool)) return miss("condition must be boolean");
      return exec(c.as_bool() ? s->a : s->b, env, out);
    }
    case Stmt::K::Collect: {
      Value v;
      if (!eval(s->e, env, v)) return false;
      out.push_back(std::move(v));
      return true;
    }
    case Stmt::K::Foreach: {
      Value src;
      if (!eval(s->e, env, src)) return false;
      if (!src.is(Value::Kind::List) && !src.is(Value::Kind::Set))
        return miss("foreach expects a list or set");
      size_t m = env.mark();
      for (const Value& x : src.elems()) {
        env.push(s->binder, x);
        bool ok = exec(s->a, env, out);
        env.rewind(m);
        if (!ok) return false;
      }
      return true;
    }
  }
  return true;
}

int32_t TraceBundle::intern(const Value& v) {
  auto it = ids.find(v);
  if (it != ids.end()) return it->second;
  int32_t id = static_cast<int32_t>(vals.size());
  vals.push_back(v);
  ids.emplace(v, id);
  return id;
}

namespace {

class Engine {
 public:
  Engine(const HyloProgram& prog, const Instance& inst, const EngineConfig& cfg,
         TraceBundle* trace)
      : prog_(prog), cfg_(cfg), trace_(trace), interp_(&inst) {
    interp_.probe = cfg.probe;
    interp_.max_fuel = cfg.max_fuel;
  }

  RunResult run() {
    Env env;
    Value s0;
    if (!interp_.eval(prog_.root, env, s0))
      fail(Error::Kind::Eval, "initial state failed: " + interp_.why());
    const std::vector<Value>& roots = run_state(s0);

    RunResult res;
    res.stats = stats_;
    res.stats.states = static_cast<int64_t>(memo_.size());
    res.stats.root_set = static_cast<int64_t>(roots.size());
    for (const Value& sol : roots) {
      Value sc;
      if (!interp_.call(prog_.scorer, sol, sc))
        fail(Error::Kind::Eval, "scorer failed: " + interp_.why());
      if (!sc.is(Value::Kind::Int)) fail(Error::Kind::Eval, "scorer must produce an integer");
      if (!res.has_solution || sc.as_int() > res.objective) {
        res.has_solution = true;
        res.objective = sc.as_int();
      }
    }
    return res;
  }

 private:
  struct Entry {
    bool done = false;
    std::vector<Value> sols;
  };

  void check_deadline() {
    if (cfg_.deadline.time_since_epoch().count() == 0) return;
    if ((++tick_ & 1023) != 0) return;
    if (std::chrono::steady_clock::now() > cfg_.deadline)
      fail(Error::Kind::Limit, "deadline exceeded");
  }

  Value state_key(const Value& s) {
    if (!prog_.memo_key) return s;
    Value k;
    if (!interp_.call(prog_.memo_key, s, k))
      fail(Error::Kind::Eval, "memo key failed: " + interp_.why());
    return k;
  }

  const std::vector<Value>& run_state(const Value& s) {
    check_deadline();
    Value key = state_key(s);
    auto it = memo_.find(key);
    if (it != memo_.end()) {
      if (!it->second.done) fail(Error::Kind::Cycle, "cyclic state graph");
      return it->second.sols;
    }
    if (static_cast<int64_t>(memo_.size()) >= cfg_.max_states)
      fail(Error::Kind::Limit, "too many states");
    memo_.emplace(key, Entry{});  // marks in-progress; cycles find it above
    if (++depth_ > cfg_.max_depth) fail(Error::Kind::Limit, "recursion too deep");

    std::vector<Value> seeds;
    {
      Env env;
      env.push(prog_.psi.param, s);
      if (!interp_.exec(prog_.psi.body, env, seeds))
        fail(Error::Kind::Eval, "expansion failed: " + interp_.why());
    }

    int32_t sid = trace_ ? trace_->intern(s) : -1;
    std::vector<Value> acc;
    for (const Value& seed : seeds) {
      check_deadline();
      std::vector<Value> slots;
      prog_.functor.collect_slots(seed, slots);
      std::vector<const std::vector<Value>*> sets;
      sets.reserve(slots.size());
      for (const Value& sub : slots) sets.push_back(&run_state(sub));

      bool empty_product = false;
      for (const auto* set : sets) empty_product = empty_product || set->empty();
      if (empty_product) continue;

      TraceBundle::Derivation* row = nullptr;
      std::vector<TraceBundle::Derivation>* rows = nullptr;
      if (trace_ && cfg_.trace_derivations) {
        TraceBundle::GroupKey gk;
        gk.state = sid;
        gk.seed = trace_->intern(seed);
        for (const Value& sub : slots) gk.sigma.push_back(trace_->intern(sub));
        rows = &trace_->groups[gk];
      }

      // Odometer over one choice per slot; zero slots means one iteration.
      std::vector<size_t> ix(slots.size(), 0);
      std::vector<Value> choice(slots.size());
      while (true) {
        check_deadline();
        if (++stats_.expansions > cfg_.max_expansions)
          fail(Error::Kind::Limit, "too many expansions");
        for (size_t i = 0; i < slots.size(); ++i) choice[i] = (*sets[i])[ix[i]];
        size_t pos = 0;
        Value shaped = prog_.functor.replace_slots(seed, choice, pos);
        std::vector<Value> outs;
        {
          Env env;
          env.push(prog_.phi.param, shaped);
          if (!interp_.exec(prog_.phi.body, env, outs))
            fail(Error::Kind::Eval, "combination failed: " + interp_.why());
        }
        if (rows) {
          rows->emplace_back();
          row = &rows->back();
          for (const Value& c : choice) row->chosen.push_back(trace_->intern(c));
          for (const Value& o : outs) row->outputs.push_back(trace_->intern(o));
        }
        for (Value& o : outs) acc.push_back(std::move(o));
        if (static_cast<int64_t>(acc.size()) > cfg_.max_state_set)
          fail(Error::Kind::Limit, "solution set too large");

        size_t d = 0;
        for (; d < ix.size(); ++d) {
          if (++ix[d] < sets[d]->size()) break;
          ix[d] = 0;
        }
        if (d == ix.size()) break;  // odometer wrapped (or no slots)
      }
    }

    canonicalize_set(acc);
    if (cfg_.use_thin && prog_.thin && !prog_.thin->comps.empty())
      acc = thin_set(*prog_.thin, acc, interp_);

    if (trace_) {
      trace_->state_order.push_back(sid);
      if (cfg_.trace_sets) {
        auto& stored = trace_->per_state[sid];
        for (const Value& v : acc) stored.push_back(trace_->intern(v));
      }
    }

    Entry& ent = memo_.find(key)->second;
    ent.sols = std::move(acc);
    ent.done = true;
    stats_.max_set = std::max(stats_.max_set, static_cast<int64_t>(ent.sols.size()));
    --depth_;
    return ent.sols;
  }

  const HyloProgram& prog_;
  const EngineConfig& cfg_;
  TraceBundle* trace_;
  Interp interp_;
  RunStats stats_;
  std::unordered_map<Value, Entry, ValueHash> memo_;
  int64_t depth_ = 0;
  uint64_t tick_ = 0;
};

}  // namespace

RunResult run_program(const HyloProgram& prog, const Instance& inst, const EngineConfig& cfg,
                      TraceBundle* trace) {
  RunResult out;
  call_with_stack(size_t(256) << 20, [&] {
    Engine eng(prog, inst, cfg, trace);
    out = eng.run();
  });
  return out;
}

Value initial_state(const HyloProgram& prog, const Instance& inst) {
  Interp interp(&inst);
  Env env;
  Value s0;
  if (!interp.eval(prog.root, env, s0))
    fail(Error::Kind::Eval, "initial state failed: " + interp.why());
  return s0;
}

void call_with_stack(size_t stack_bytes, const std::function<void()>& fn) {
  struct Ctx {
    const std::function<void()>* fn;
    std::exception_ptr ep;
  } ctx{&fn, nullptr};

  pthread_attr_t attr;
  pthread_attr_init(&attr);
  pthread_attr_setstacksize(&attr, stack_bytes);
  auto tramp = [](void* p) -> void* {
    auto* c = static_cast<Ctx*>(p);
    try {
      (*c->fn)();
    } catch (...) {
      c->ep = std::current_exception();
    }
    return nullptr;
  };
  pthread_t tid;
  int rc = pthread_create(&tid, &attr, tramp, &ctx);
  pthread_attr_destroy(&attr);
  if (rc != 0) fail(Error::Kind::Eval, "could not start evaluation thread");
  pthread_join(tid, nullptr);
  if (ctx.ep) std::rethrow_exception(ctx.ep);
}

}  // namespace methyl
