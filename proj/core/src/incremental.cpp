#include "methyl/incremental.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "methyl/grammar.hpp"
#include "methyl/symbols.hpp"
#include "methyl/typecheck.hpp"

namespace methyl {

namespace {

bool deadline_passed(const std::chrono::steady_clock::time_point& d) {
  return d != std::chrono::steady_clock::time_point{} && std::chrono::steady_clock::now() > d;
}

// Does the expression traverse structure anywhere in the given variables?
// Constant-time accessors (head, len, idx) are fine; fold/tail and friends
// over a replaced value would reintroduce the cost the rewrite removes.
bool traverses(const ExprPtr& e, const std::vector<int32_t>& vars) {
  if (!e) return false;
  if (e->kind == Expr::K::Apply) {
    switch (e->op) {
      case Op::Fold:
      case Op::TFold:
      case Op::Tail:
      case Op::Match:
      case Op::Upto:
        if (mentions(e, vars)) return true;
        break;
      default:
        break;
    }
  }
  for (const ExprPtr& k : e->kids)
    if (traverses(k, vars)) return true;
  return false;
}

bool has_poly_op(const ExprPtr& e) {
  if (!e) return false;
  if (e->kind == Expr::K::Apply) {
    switch (e->op) {
      case Op::Fold:
      case Op::TFold:
      case Op::Tail:
      case Op::Match:
      case Op::Upto:
        return true;
      default:
        break;
    }
  }
  for (const ExprPtr& k : e->kids)
    if (has_poly_op(k)) return true;
  return false;
}

void collect_probe_ids(const ExprPtr& e, std::set<int32_t>& out) {
  if (!e) return;
  if (e->kind == Expr::K::Apply && e->op == Op::Probe) out.insert(e->sym);
  for (const ExprPtr& k : e->kids) collect_probe_ids(k, out);
}

void collect_probe_ids_stmt(const StmtPtr& s, std::set<int32_t>& out) {
  if (!s) return;
  collect_probe_ids(s->e, out);
  collect_probe_ids_stmt(s->a, out);
  collect_probe_ids_stmt(s->b, out);
}

// ---------------------------------------------------------------------------
// Site extraction
// ---------------------------------------------------------------------------

class Extractor {
 public:
  Extractor(const HyloProgram& prog, RewriteSide side) : prog_(prog) {
    out_.side = side;
    if (side == RewriteSide::Solution) {
      replaced_ = prog.solution_type;
      subject_ = prog.phi.param;
      subject_type_ = prog.functor.apply(prog.solution_type);
    } else {
      replaced_ = prog.state_type;
      subject_ = prog.psi.param;
      subject_type_ = prog.state_type;
    }
    out_.subject = subject_;
  }

  SiteExtraction run() {
    if (out_.side == RewriteSide::Solution) {
      add_direct(prog_.scorer, "scorer");
      if (prog_.thin)
        for (const Comparison& c : prog_.thin->comps) add_direct(c.key, "pruning key");
      out_.probed = {subject_, walk(prog_.phi.body)};
    } else {
      if (prog_.memo_key) add_direct(prog_.memo_key, "memo key");
      out_.probed = {subject_, walk(prog_.psi.body)};
    }
    if (!failed_) prune_unreferenced();
    out_.ok = !failed_;
    return std::move(out_);
  }

 private:
  void fail(const std::string& why) {
    if (!failed_) {
      failed_ = true;
      out_.why = why;
    }
  }

  bool touching(const ExprPtr& e) const { return mentions(e, {subject_}); }

  Type narrowed_subject_type() const {
    if (narrow_tag_ == 0 || !subject_type_.is(Type::Kind::Variant)) return subject_type_;
    return Type::variant({subject_type_.comps()[static_cast<size_t>(narrow_tag_ - 1)]});
  }

  std::optional<Type> type_of(const ExprPtr& e) const {
    std::vector<std::pair<int32_t, Type>> binds;
    binds.emplace_back(subject_, narrowed_subject_type());
    for (const auto& b : binders_) binds.push_back(b);
    return infer_expr_type(e, binds, prog_);
  }

  std::vector<std::pair<int32_t, Type>> site_temps(const ExprPtr& body) const {
    std::vector<std::pair<int32_t, Type>> t;
    t.emplace_back(subject_, subject_type_);
    for (const auto& [sym, ty] : binders_)
      if (mentions(body, {sym})) t.emplace_back(sym, ty);
    return t;
  }

  int32_t intern_site(ExtractedSite::Kind kind, const ExprPtr& body, bool direct, Type out_type,
                      std::vector<std::pair<int32_t, Type>> temps) {
    for (const ExtractedSite& s : out_.sites) {
      if (s.kind != kind || s.direct != direct || s.temps.size() != temps.size()) continue;
      bool same = expr_eq(s.body, body);
      for (size_t i = 0; same && i < temps.size(); ++i) same = s.temps[i].first == temps[i].first;
      if (same) return s.id;
    }
    ExtractedSite s;
    s.kind = kind;
    s.id = static_cast<int32_t>(out_.sites.size());
    s.body = body;
    s.temps = std::move(temps);
    s.direct = direct;
    s.output_type = std::move(out_type);
    out_.sites.push_back(std::move(s));
    return out_.sites.back().id;
  }

  ExprPtr probe_of(int32_t id, const ExprPtr& body) const {
    std::vector<int32_t> syms;
    for (const auto& [sym, ty] : out_.sites[static_cast<size_t>(id)].temps) syms.push_back(sym);
    return Expr::probe(id, std::move(syms), body);
  }

  void add_direct(const ExprPtr& lambda, const char* what) {
    if (!lambda || lambda->kind != Expr::K::Lambda) return;
    const ExprPtr& body = lambda->kids[0];
    std::optional<Type> t =
        infer_expr_type(body, {{lambda->sym, replaced_}}, prog_);
    if (!t || !t->is_scalar_tuple()) {
      fail(std::string("cannot type the ") + what + " against the replaced values");
      return;
    }
    intern_site(ExtractedSite::Kind::Query, body, true, *t, {{lambda->sym, replaced_}});
  }

  // Rewrites an expression whose context needs a concrete (non-replaced)
  // value: every minimal scalar-valued subexpression that still touches the
  // subject becomes a query probe. Returns nullptr when the replaced value
  // itself escapes (no scalar ancestor below this node).
  ExprPtr resolve(const ExprPtr& e, std::vector<int32_t>& locals) {
    if (failed_) return e;
    if (!touching(e)) return e;
    if (e->kind == Expr::K::Var) return nullptr;

    bool infected = false;
    ExprPtr rebuilt;
    switch (e->kind) {
      case Expr::K::Lambda: {
        locals.push_back(e->sym);
        ExprPtr b = resolve(e->kids[0], locals);
        locals.pop_back();
        if (!b)
          infected = true;
        else
          rebuilt = b == e->kids[0] ? e : Expr::lambda(e->sym, b);
        break;
      }
      case Expr::K::Access: {
        ExprPtr b = resolve(e->kids[0], locals);
        if (!b)
          infected = true;
        else
          rebuilt = b == e->kids[0] ? e : Expr::access(b, e->index);
        break;
      }
      case Expr::K::Apply: {
        std::vector<ExprPtr> kids;
        kids.reserve(e->kids.size());
        bool changed = false;
        for (const ExprPtr& k : e->kids) {
          ExprPtr k2 = resolve(k, locals);
          if (!k2) {
            infected = true;
            break;
          }
          changed = changed || k2 != k;
          kids.push_back(k2);
        }
        if (!infected) rebuilt = changed ? Expr::apply(e->op, std::move(kids)) : e;
        break;
      }
      default:
        return nullptr;
    }
    if (!infected) return rebuilt;

    // A child carries the replaced value; cut here if this node is scalar
    // and closed over the surrounding program variables.
    std::optional<Type> t = type_of(e);
    if (t && t->is_scalar_tuple() && !mentions(e, locals)) {
      auto temps = site_temps(e);
      int32_t id = intern_site(ExtractedSite::Kind::Query, e, false, *t, std::move(temps));
      return probe_of(id, e);
    }
    return nullptr;
  }

  ExprPtr resolve_full(const ExprPtr& e, const char* what) {
    std::vector<int32_t> locals;
    ExprPtr r = resolve(e, locals);
    if (!r) {
      fail(std::string(what) + " hands the replaced values around whole: " + e->print());
      return e;
    }
    return r;
  }

  // (eq (vtag subject) K) in either operand order; 0 when it is not one.
  int match_tag_test(const ExprPtr& e) const {
    if (e->kind != Expr::K::Apply || e->op != Op::Eq || e->kids.size() != 2) return 0;
    for (int i = 0; i < 2; ++i) {
      const ExprPtr& a = e->kids[static_cast<size_t>(i)];
      const ExprPtr& b = e->kids[static_cast<size_t>(1 - i)];
      if (a->kind == Expr::K::Apply && a->op == Op::VTag && a->kids[0]->kind == Expr::K::Var &&
          a->kids[0]->sym == subject_ && b->kind == Expr::K::Const &&
          b->cval.is(Value::Kind::Int) && b->cval.as_int() >= 1)
        return static_cast<int>(b->cval.as_int());
    }
    return 0;
  }

  StmtPtr walk(const StmtPtr& s) {
    if (failed_ || !s) return s;
    switch (s->kind) {
      case Stmt::K::Skip:
        return s;
      case Stmt::K::Seq:
        return Stmt::seq(walk(s->a), walk(s->b));
      case Stmt::K::If: {
        ExprPtr c = resolve_full(s->e, "a branch condition");
        int tag = match_tag_test(s->e);
        int saved = narrow_tag_;
        if (tag > 0) narrow_tag_ = tag;
        StmtPtr then_s = walk(s->a);
        narrow_tag_ = saved;
        StmtPtr else_s = walk(s->b);
        return Stmt::cond(c, then_s, else_s);
      }
      case Stmt::K::Collect: {
        if (out_.side == RewriteSide::Solution) {
          auto temps = site_temps(s->e);
          int32_t id = intern_site(ExtractedSite::Kind::Constructor, s->e, false, replaced_,
                                   std::move(temps));
          return Stmt::collect(probe_of(id, s->e));
        }
        return Stmt::collect(decompose_seed(s->e, prog_.functor));
      }
      case Stmt::K::Foreach: {
        if (!touching(s->e)) {
          std::optional<Type> st = type_of(s->e);
          if (!st || !st->is(Type::Kind::List)) {
            fail("cannot type the iteration source " + s->e->print());
            return s;
          }
          binders_.emplace_back(s->binder, st->elem());
          StmtPtr body = walk(s->a);
          binders_.pop_back();
          return Stmt::foreach(s->binder, s->e, body);
        }
        std::vector<int32_t> locals;
        ExprPtr src = resolve(s->e, locals);
        if (!src) {
          fail("the body iterates over the replaced values: " + s->e->print());
          return s;
        }
        std::optional<Type> st = type_of(s->e);
        if (!st || !st->is(Type::Kind::List)) {
          fail("cannot type the iteration source " + s->e->print());
          return s;
        }
        binders_.emplace_back(s->binder, st->elem());
        StmtPtr body = walk(s->a);
        binders_.pop_back();
        return Stmt::foreach(s->binder, src, body);
      }
    }
    return s;
  }

  // A collected seed is shaped by the functor: identity positions become
  // constructor sites, scalar constant positions become queries, and the
  // product/sum skeleton must be spelled out so the parts are visible.
  ExprPtr decompose_seed(const ExprPtr& e, const Functor& f) {
    if (failed_) return e;
    // Shapes without replaced positions carry plain data: no cut needed
    // unless the data itself is computed from the subject.
    if (f.islot_count() == 0) return touching(e) ? resolve_full(e, "a seed component") : e;
    switch (f.kind()) {
      case Functor::Kind::Identity: {
        auto temps = site_temps(e);
        int32_t id =
            intern_site(ExtractedSite::Kind::Constructor, e, false, replaced_, std::move(temps));
        return probe_of(id, e);
      }
      case Functor::Kind::ConstUnit:
      case Functor::Kind::ConstInt:
        return e;  // unreachable: no replaced positions
      case Functor::Kind::Product: {
        ExprPtr l, r;
        if (e->kind == Expr::K::Apply && e->op == Op::MkTuple && e->kids.size() == 2) {
          l = e->kids[0];
          r = e->kids[1];
        } else if (e->kind == Expr::K::Const && e->cval.is(Value::Kind::Tuple) &&
                   e->cval.elems().size() == 2) {
          l = Expr::constant(e->cval.elems()[0]);
          r = Expr::constant(e->cval.elems()[1]);
        } else {
          fail("the expansion builds a shaped seed opaquely: " + e->print());
          return e;
        }
        return Expr::apply(Op::MkTuple,
                           {decompose_seed(l, f.left()), decompose_seed(r, f.right())});
      }
      case Functor::Kind::Sum: {
        int64_t tag = 0;
        ExprPtr payload;
        if (e->kind == Expr::K::Apply && e->op == Op::MkTag &&
            e->kids[0]->kind == Expr::K::Const && e->kids[0]->cval.is(Value::Kind::Int)) {
          tag = e->kids[0]->cval.as_int();
          payload = e->kids[1];
        } else if (e->kind == Expr::K::Const && e->cval.is(Value::Kind::Tagged)) {
          tag = e->cval.tag();
          payload = Expr::constant(e->cval.payload());
        } else {
          fail("the expansion builds a seed with an unresolved tag: " + e->print());
          return e;
        }
        std::vector<Functor> alts = f.summands();
        if (tag < 1 || tag > static_cast<int64_t>(alts.size())) {
          fail("seed tag out of range: " + e->print());
          return e;
        }
        ExprPtr inner = decompose_seed(payload, alts[static_cast<size_t>(tag - 1)]);
        return Expr::apply(Op::MkTag, {Expr::constant(Value::integer(tag)), inner});
      }
    }
    return e;
  }

  // Cuts made below a node that was later swallowed whole leave sites with
  // no marker in the template; drop them.
  void prune_unreferenced() {
    std::set<int32_t> used;
    collect_probe_ids_stmt(out_.probed.body, used);
    std::vector<ExtractedSite> kept;
    for (ExtractedSite& s : out_.sites)
      if (s.direct || used.count(s.id)) kept.push_back(std::move(s));
    out_.sites = std::move(kept);
  }

  const HyloProgram& prog_;
  Type replaced_;
  int32_t subject_ = -1;
  Type subject_type_;
  int narrow_tag_ = 0;
  std::vector<std::pair<int32_t, Type>> binders_;
  SiteExtraction out_;
  bool failed_ = false;
};

ExprPtr probe_direct_lambda(const ExprPtr& lambda, const SiteExtraction& ex) {
  if (!lambda || lambda->kind != Expr::K::Lambda) return lambda;
  for (const ExtractedSite& s : ex.sites) {
    if (!s.direct || s.temps.empty() || s.temps[0].first != lambda->sym) continue;
    if (!expr_eq(s.body, lambda->kids[0])) continue;
    return Expr::lambda(lambda->sym, Expr::probe(s.id, {lambda->sym}, lambda->kids[0]));
  }
  return lambda;
}

// ---------------------------------------------------------------------------
// Lifting
// ---------------------------------------------------------------------------

struct SiteRows {
  // Deduplicated observations: (inputs..., output) plus the run they came
  // from, because synthesized terms may read the run's declared constants.
  struct Row {
    std::vector<Value> inputs;
    Value output;
    size_t run;
  };
  std::vector<Row> full;
  std::vector<size_t> sample;  // indices into full used during search
};

class Lifter {
 public:
  Lifter(const HyloProgram& prog, const SiteExtraction& ex, const std::vector<LiftRun>& runs,
         const LiftConfig& cfg)
      : prog_(prog), ex_(ex), runs_(runs), cfg_(cfg), gen_("lift") {
    std::set<int32_t> syms;
    collect_syms_stmt(ex.probed.body, syms);
    for (const ExtractedSite& s : ex.sites) collect_syms(s.body, syms);
    for (const SpaceDecl& d : prog.constants) syms.insert(d.name);
    for (int32_t s : syms) gen_.avoid(s);
  }

  LiftOutcome run() {
    LiftOutcome out;
    gather_rows();
    if (!seed_converter()) {
      out.why = why_;
      return out;
    }
    for (const ExtractedSite& s : ex_.sites) {
      if (s.direct || s.kind != ExtractedSite::Kind::Query) continue;
      if (!solve_query(s)) {
        out.timed_out = timed_out_;
        out.why = why_;
        return out;
      }
    }
    if (!solve_constructors()) {
      out.timed_out = timed_out_;
      out.why = why_;
      return out;
    }
    if (!replay()) {
      out.why = why_;
      return out;
    }
    RepresentationChange rc;
    rc.converter = comps_;
    rc.replacements = replacements_;
    out.change = std::move(rc);
    return out;
  }

 private:
  bool give_up(const ExtractedSite& s, const std::string& why) {
    why_ = "site " + std::to_string(s.id) + " (" + s.body->print() + "): " + why;
    return false;
  }

  bool out_of_time() {
    if (deadline_passed(cfg_.deadline)) {
      timed_out_ = true;
      why_ = "ran out of time";
      return true;
    }
    return false;
  }

  Value consts_of(size_t run) const {
    std::vector<Value> vs;
    for (const auto& [name, v] : runs_[run].instance->bindings) vs.push_back(v);
    return Value::tuple(std::move(vs));
  }

  void gather_rows() {
    std::mt19937_64 rng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
    for (const ExtractedSite& s : ex_.sites) {
      SiteRows& sr = rows_[s.id];
      std::set<Value> seen;
      for (size_t r = 0; r < runs_.size(); ++r) {
        auto it = runs_[r].bundle->sites.find(s.id);
        if (it == runs_[r].bundle->sites.end()) continue;
        for (const TraceBundle::SiteRow& row : it->second) {
          Value key = Value::tuple({Value::tuple(row.inputs), row.output, consts_of(r)});
          if (!seen.insert(key).second) continue;
          sr.full.push_back({row.inputs, row.output, r});
        }
      }
      sr.sample.resize(sr.full.size());
      for (size_t i = 0; i < sr.sample.size(); ++i) sr.sample[i] = i;
      if (sr.sample.size() > static_cast<size_t>(cfg_.max_examples)) {
        std::vector<size_t> picked;
        std::sample(sr.sample.begin(), sr.sample.end(), std::back_inserter(picked),
                    static_cast<size_t>(cfg_.max_examples), rng);
        sr.sample = std::move(picked);
      }
      // The universe of replaced values drives component admissibility.
      for (const SiteRows::Row& row : sr.full) {
        if (s.direct) {
          note_replaced(row.inputs[0], row.run);
        } else if (s.kind == ExtractedSite::Kind::Constructor) {
          note_replaced(row.output, row.run);
          note_subject_slots(row.inputs[0], row.run);
        } else {
          note_subject_slots(row.inputs[0], row.run);
        }
      }
    }
  }

  void note_subject_slots(const Value& subject, size_t run) {
    if (ex_.side == RewriteSide::State) {
      note_replaced(subject, run);
      return;
    }
    std::vector<Value> slots;
    prog_.functor.collect_slots(subject, slots);
    for (const Value& v : slots) note_replaced(v, run);
  }

  void note_replaced(const Value& v, size_t run) {
    Value key = Value::tuple({v, consts_of(run)});
    if (universe_seen_.insert(key).second) universe_.push_back({v, run});
  }

  // --- converter components ---

  std::optional<Value> apply_comp(size_t j, const Value& v, size_t run) {
    Value key = Value::tuple({v, Value::integer(static_cast<int64_t>(run))});
    auto& cache = comp_cache_[j];
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    Interp in(runs_[run].instance);
    Value out;
    if (!in.call(comps_[j], v, out)) return std::nullopt;
    cache.emplace(std::move(key), out);
    return out;
  }

  // Output of a lambda on every universe entry; nullopt when partial.
  std::optional<std::vector<Value>> signature(const ExprPtr& lambda) {
    std::vector<Value> sig;
    sig.reserve(universe_.size());
    for (const auto& [v, run] : universe_) {
      Interp in(runs_[run].instance);
      Value out;
      if (!in.call(lambda, v, out)) return std::nullopt;
      sig.push_back(out);
    }
    return sig;
  }

  std::optional<size_t> comp_matching(const std::vector<Value>& sig) {
    for (size_t j = 0; j < comps_.size(); ++j) {
      bool same = true;
      for (size_t i = 0; same && i < universe_.size(); ++i) {
        auto got = apply_comp(j, universe_[i].first, universe_[i].second);
        same = got && *got == sig[i];
      }
      if (same) return j;
    }
    return std::nullopt;
  }

  size_t add_comp(const ExprPtr& lambda) {
    comps_.push_back(lambda);
    comp_cache_.emplace_back();
    return comps_.size() - 1;
  }

  bool seed_converter() {
    for (const ExtractedSite& s : ex_.sites) {
      if (!s.direct) continue;
      int32_t param = s.temps[0].first;
      std::vector<ExprPtr> parts;
      if (s.body->kind == Expr::K::Apply && s.body->op == Op::MkTuple) {
        parts = s.body->kids;
      } else if (s.output_type.is(Type::Kind::Tuple)) {
        for (size_t i = 0; i < s.output_type.comps().size(); ++i)
          parts.push_back(Expr::access(s.body, static_cast<int32_t>(i) + 1));
      } else {
        parts.push_back(s.body);
      }
      std::vector<size_t> slots;
      for (const ExprPtr& part : parts) {
        ExprPtr lambda = Expr::lambda(param, part);
        auto sig = signature(lambda);
        if (!sig) return give_up(s, "partial on an observed value");
        if (auto j = comp_matching(*sig)) {
          slots.push_back(*j);
        } else {
          slots.push_back(add_comp(lambda));
        }
      }
      ExprPtr subj = Expr::var(param);
      ExprPtr repl;
      if (parts.size() == 1 && !s.output_type.is(Type::Kind::Tuple)) {
        repl = Expr::access(subj, static_cast<int32_t>(slots[0]) + 1);
      } else {
        std::vector<ExprPtr> accs;
        for (size_t j : slots) accs.push_back(Expr::access(subj, static_cast<int32_t>(j) + 1));
        repl = Expr::apply(Op::MkTuple, std::move(accs));
      }
      replacements_[s.id] = repl;
    }
    return true;
  }

  std::optional<Value> convert(const Value& v, size_t run) {
    std::vector<Value> parts;
    parts.reserve(comps_.size());
    for (size_t j = 0; j < comps_.size(); ++j) {
      auto c = apply_comp(j, v, run);
      if (!c) return std::nullopt;
      parts.push_back(*c);
    }
    return Value::tuple(std::move(parts));
  }

  std::optional<Value> transform_subject(const ExtractedSite& s, const Value& subject,
                                         size_t run) {
    if (s.direct || ex_.side == RewriteSide::State) return convert(subject, run);
    bool bad = false;
    Value out = prog_.functor.map_slots(subject, [&](const Value& slot) {
      auto c = convert(slot, run);
      if (!c) {
        bad = true;
        return Value::unit();
      }
      return *c;
    });
    if (bad) return std::nullopt;
    return out;
  }

  // --- views ---

  struct View {
    std::vector<GrammarInput> inputs;
    std::vector<GrammarInput> globals;
    std::vector<int32_t> names;             // inputs then globals, row order
    std::vector<std::vector<Value>> rows;   // one per sampled example
    std::vector<Value> keys;                // determinism fingerprints
    std::map<int32_t, ExprPtr> back;        // fresh column -> original access
    bool ok = false;
    std::string why;
  };

  // Scalar columns visible to a constant-time fragment at this site: the
  // transformed subject decomposed along the functor (solution side) or the
  // converter tuple itself (state side), the recorded temporaries, and the
  // declared constants (structured ones both whole and via their length).
  View build_view(const ExtractedSite& s) {
    View v;
    const std::vector<SiteRows::Row>& full = rows_[s.id].full;
    const std::vector<size_t>& sample = rows_[s.id].sample;

    std::vector<std::pair<ExprPtr, Type>> cols;  // access expr over real vars
    if (ex_.side == RewriteSide::State || s.direct) {
      ExprPtr subj = Expr::var(s.temps[0].first);
      for (size_t j = 0; j < comps_.size(); ++j)
        cols.emplace_back(Expr::access(subj, static_cast<int32_t>(j) + 1), Type::integer());
    } else {
      int tag = 0;
      if (prog_.functor.is(Functor::Kind::Sum)) {
        std::set<int64_t> tags;
        for (size_t i : sample) tags.insert(full[i].inputs[0].tag());
        if (tags.size() > 1) {
          v.why = "examples span several seed shapes";
          return v;
        }
        tag = tags.empty() ? 1 : static_cast<int>(*tags.begin());
      }
      ExprPtr root = Expr::var(s.temps[0].first);
      Functor shape = prog_.functor;
      if (prog_.functor.is(Functor::Kind::Sum)) {
        root = Expr::apply(Op::VPayload, {root});
        std::vector<Functor> alts = prog_.functor.summands();
        if (tag < 1 || tag > static_cast<int>(alts.size())) {
          v.why = "observed seed tag out of range";
          return v;
        }
        shape = alts[static_cast<size_t>(tag - 1)];
      }
      walk_shape(shape, root, cols);
    }

    for (const auto& [expr, t] : cols) {
      int32_t sym = gen_.fresh();
      v.inputs.push_back({sym, t});
      v.back.emplace(sym, expr);
    }
    for (size_t i = 1; i < s.temps.size(); ++i) v.inputs.push_back({s.temps[i].first, s.temps[i].second});
    for (const SpaceDecl& d : prog_.constants) {
      if (d.type.is_scalar_tuple()) {
        v.inputs.push_back({d.name, d.type});
      } else {
        v.globals.push_back({d.name, d.type});
        if (d.type.is(Type::Kind::List)) {
          int32_t sym = gen_.fresh();
          v.inputs.push_back({sym, Type::integer()});
          v.back.emplace(sym, Expr::apply(Op::Len, {Expr::var(d.name)}));
        }
      }
    }
    for (const GrammarInput& g : v.inputs) v.names.push_back(g.name);
    for (const GrammarInput& g : v.globals) v.names.push_back(g.name);

    for (size_t i : sample) {
      const SiteRows::Row& row = full[i];
      auto tsub = transform_subject(s, row.inputs[0], row.run);
      if (!tsub) {
        v.why = "a recorded value falls outside the summary";
        return v;
      }
      std::vector<Value> out;
      Env env;
      env.push(s.temps[0].first, *tsub);
      for (size_t k = 1; k < s.temps.size(); ++k) env.push(s.temps[k].first, row.inputs[k]);
      Interp in(runs_[row.run].instance);
      for (const auto& [sym, expr] : v.back) {
        Value cv;
        if (!in.eval(expr, env, cv)) {
          v.why = "cannot project a recorded value: " + in.why();
          return v;
        }
        (void)sym;
        out.push_back(cv);
      }
      // columns were emitted in map order of `back`; realign to inputs order
      std::map<int32_t, Value> by_sym;
      size_t bi = 0;
      for (const auto& [sym, expr] : v.back) by_sym.emplace(sym, out[bi++]);
      std::vector<Value> rowv;
      for (const GrammarInput& g : v.inputs) {
        auto it = by_sym.find(g.name);
        if (it != by_sym.end()) {
          rowv.push_back(it->second);
          continue;
        }
        bool found = false;
        for (size_t k = 1; k < s.temps.size(); ++k)
          if (s.temps[k].first == g.name) {
            rowv.push_back(row.inputs[k]);
            found = true;
            break;
          }
        if (!found) {
          const Value* cv = runs_[row.run].instance->find(g.name);
          if (!cv) {
            v.why = "missing constant in the traced instance";
            return v;
          }
          rowv.push_back(*cv);
        }
      }
      for (const GrammarInput& g : v.globals) {
        const Value* cv = runs_[row.run].instance->find(g.name);
        if (!cv) {
          v.why = "missing constant in the traced instance";
          return v;
        }
        rowv.push_back(*cv);
      }
      v.keys.push_back(Value::tuple(rowv));
      v.rows.push_back(std::move(rowv));
    }
    v.ok = true;
    return v;
  }

  void walk_shape(const Functor& f, const ExprPtr& at,
                  std::vector<std::pair<ExprPtr, Type>>& cols) {
    switch (f.kind()) {
      case Functor::Kind::Identity:
        for (size_t j = 0; j < comps_.size(); ++j)
          cols.emplace_back(Expr::access(at, static_cast<int32_t>(j) + 1), Type::integer());
        return;
      case Functor::Kind::ConstUnit:
        return;
      case Functor::Kind::ConstInt:
        cols.emplace_back(at, Type::integer());
        return;
      case Functor::Kind::Product:
        walk_shape(f.left(), Expr::access(at, 1), cols);
        walk_shape(f.right(), Expr::access(at, 2), cols);
        return;
      case Functor::Kind::Sum:
        // sums below the top level do not arise from parsed functors
        return;
    }
  }

  bool deterministic(const View& v, const std::vector<Value>& targets) {
    std::map<Value, Value> seen;
    for (size_t i = 0; i < v.keys.size(); ++i) {
      auto [it, fresh] = seen.emplace(v.keys[i], targets[i]);
      if (!fresh && !(it->second == targets[i])) return false;
    }
    return true;
  }

  // Smallest enumerated constant-time term matching every target row.
  std::optional<ExprPtr> scan(const View& v, const Type& want,
                              const std::vector<Value>& targets, bool& hit_deadline) {
    TermEnum terms(v.inputs, v.globals, cfg_.grammar, Tier::Constant);
    int step = 0;
    for (const TermEnum::Typed& t : terms.all()) {
      if (++step % 512 == 0 && out_of_time()) {
        hit_deadline = true;
        return std::nullopt;
      }
      if (!(t.type == want)) continue;
      std::vector<std::optional<Value>> got = evaluate_batch(t.term, v.names, v.rows, nullptr);
      bool all = true;
      for (size_t i = 0; all && i < targets.size(); ++i) all = got[i] && *got[i] == targets[i];
      if (all) return substitute(t.term, v.back);
    }
    return std::nullopt;
  }

  // --- fresh components ---

  const std::vector<ExprPtr>& component_pool() {
    if (pool_built_) return pool_;
    pool_built_ = true;
    pool_param_ = gen_.fresh();
    std::vector<GrammarInput> globals;
    for (const SpaceDecl& d : prog_.constants) globals.push_back({d.name, d.type});
    Type replaced = ex_.side == RewriteSide::Solution ? prog_.solution_type : prog_.state_type;
    TermEnum terms({{pool_param_, replaced}}, globals, cfg_.grammar, Tier::Polynomial);
    for (const TermEnum::Typed& t : terms.all()) {
      if (!(t.type == Type::integer())) continue;
      if (!mentions(t.term, {pool_param_})) continue;
      pool_.push_back(t.term);
    }
    return pool_;
  }

  template <typename Retry>
  bool try_extend(const ExtractedSite& s, const Retry& retry) {
    if (extras_ >= cfg_.max_extras) return false;
    std::set<std::vector<Value>> tried;
    for (size_t j = 0; j < comps_.size(); ++j) {
      std::vector<Value> sig;
      bool total = true;
      for (const auto& [v, run] : universe_) {
        auto got = apply_comp(j, v, run);
        if (!got) {
          total = false;
          break;
        }
        sig.push_back(*got);
      }
      if (total) tried.insert(std::move(sig));
    }
    int considered = 0;
    for (const ExprPtr& body : component_pool()) {
      if (out_of_time()) return false;
      ExprPtr lambda = Expr::lambda(pool_param_, body);
      auto sig = signature(lambda);
      if (!sig || !tried.insert(*sig).second) continue;
      if (++considered > 64) break;
      size_t j = add_comp(lambda);
      (void)j;
      if (retry()) {
        ++extras_;
        return true;
      }
      comps_.pop_back();
      comp_cache_.pop_back();
    }
    return false;
  }

  // --- per-site solving ---

  bool pass_through(const ExtractedSite& s) {
    std::vector<int32_t> subj = {s.temps[0].first};
    if (traverses(s.body, subj)) return false;
    const std::vector<SiteRows::Row>& full = rows_[s.id].full;
    for (size_t i : rows_[s.id].sample) {
      const SiteRows::Row& row = full[i];
      auto tsub = transform_subject(s, row.inputs[0], row.run);
      if (!tsub) return false;
      Env env;
      env.push(s.temps[0].first, *tsub);
      for (size_t k = 1; k < s.temps.size(); ++k) env.push(s.temps[k].first, row.inputs[k]);
      Interp in(runs_[row.run].instance);
      Value out;
      if (!in.eval(s.body, env, out)) return false;
      Value want = row.output;
      if (s.kind == ExtractedSite::Kind::Constructor) {
        auto conv = convert(row.output, row.run);
        if (!conv) return false;
        want = *conv;
      }
      if (!(out == want)) return false;
    }
    return true;
  }

  std::vector<Type> output_parts(const ExtractedSite& s) {
    if (s.kind == ExtractedSite::Kind::Constructor)
      return std::vector<Type>(comps_.size(), Type::integer());
    if (s.output_type.is(Type::Kind::Tuple)) return s.output_type.comps();
    return {s.output_type};
  }

  std::optional<Value> target_of(const ExtractedSite& s, const SiteRows::Row& row, size_t part,
                                 size_t nparts) {
    if (s.kind == ExtractedSite::Kind::Constructor) {
      auto c = apply_comp(part, row.output, row.run);
      if (!c) return std::nullopt;
      return *c;
    }
    if (nparts == 1) return row.output;
    return row.output.elems()[part];
  }

  // Synthesize the site against the current converter. On success the
  // replacement is recorded.
  bool synthesize(const ExtractedSite& s) {
    View v = build_view(s);
    if (!v.ok) return false;
    std::vector<Type> parts = output_parts(s);
    const std::vector<SiteRows::Row>& full = rows_[s.id].full;
    std::vector<ExprPtr> terms;
    for (size_t p = 0; p < parts.size(); ++p) {
      std::vector<Value> targets;
      for (size_t i : rows_[s.id].sample) {
        auto t = target_of(s, full[i], p, parts.size());
        if (!t) return false;
        targets.push_back(*t);
      }
      if (!deterministic(v, targets)) return false;
      bool hit_deadline = false;
      auto term = scan(v, parts[p], targets, hit_deadline);
      if (!term) return false;
      terms.push_back(*term);
    }
    ExprPtr repl;
    if (s.kind == ExtractedSite::Kind::Query && !s.output_type.is(Type::Kind::Tuple))
      repl = terms[0];
    else
      repl = Expr::apply(Op::MkTuple, std::move(terms));
    replacements_[s.id] = repl;
    return true;
  }

  bool solve_query(const ExtractedSite& s) {
    if (pass_through(s)) {
      replacements_[s.id] = s.body;
      return true;
    }
    if (synthesize(s)) return true;
    if (timed_out_) return false;
    if (try_extend(s, [&] { return synthesize(s); })) return true;
    if (timed_out_) return false;
    return give_up(s, "no constant-time form over the summary matches the recorded examples");
  }

  bool solve_constructors() {
    // New components enlarge every constructor's target tuple, so iterate
    // until the component list stops growing.
    while (true) {
      size_t before = comps_.size();
      for (const ExtractedSite& s : ex_.sites) {
        if (s.direct || s.kind != ExtractedSite::Kind::Constructor) continue;
        if (pass_through(s)) {
          replacements_[s.id] = s.body;
          continue;
        }
        if (synthesize(s)) continue;
        if (timed_out_) return false;
        if (try_extend(s, [&] { return synthesize(s); })) break;
        if (timed_out_) return false;
        return give_up(s, "no constant-time builder over the summary matches the recorded examples");
      }
      if (comps_.size() == before) return true;
    }
  }

  bool replay() {
    for (const ExtractedSite& s : ex_.sites) {
      const ExprPtr& repl = replacements_.at(s.id);
      for (const SiteRows::Row& row : rows_[s.id].full) {
        auto tsub = transform_subject(s, row.inputs[0], row.run);
        if (!tsub) return give_up(s, "a recorded value falls outside the summary");
        Env env;
        env.push(s.temps[0].first, *tsub);
        for (size_t k = 1; k < s.temps.size(); ++k) env.push(s.temps[k].first, row.inputs[k]);
        Interp in(runs_[row.run].instance);
        Value out;
        if (!in.eval(repl, env, out))
          return give_up(s, "replacement fails on a recorded example: " + in.why());
        Value want = row.output;
        if (s.kind == ExtractedSite::Kind::Constructor) {
          auto conv = convert(row.output, row.run);
          if (!conv) return give_up(s, "a recorded value falls outside the summary");
          want = *conv;
        }
        if (!(out == want))
          return give_up(s, "replacement disagrees on a held-back example");
      }
    }
    return true;
  }

  const HyloProgram& prog_;
  const SiteExtraction& ex_;
  const std::vector<LiftRun>& runs_;
  const LiftConfig& cfg_;
  NameGen gen_;

  std::map<int32_t, SiteRows> rows_;
  std::vector<std::pair<Value, size_t>> universe_;
  std::set<Value> universe_seen_;
  std::vector<ExprPtr> comps_;
  std::vector<std::map<Value, Value>> comp_cache_;
  std::map<int32_t, ExprPtr> replacements_;
  std::vector<ExprPtr> pool_;
  bool pool_built_ = false;
  int32_t pool_param_ = -1;
  int extras_ = 0;
  bool timed_out_ = false;
  std::string why_;
};

ExprPtr splice_expr(const ExprPtr& e, const std::map<int32_t, ExprPtr>& repl) {
  if (!e) return e;
  if (e->kind == Expr::K::Apply && e->op == Op::Probe) return repl.at(e->sym);
  if (e->kids.empty()) return e;
  std::vector<ExprPtr> kids;
  kids.reserve(e->kids.size());
  bool changed = false;
  for (const ExprPtr& k : e->kids) {
    ExprPtr k2 = splice_expr(k, repl);
    changed = changed || k2 != k;
    kids.push_back(k2);
  }
  if (!changed) return e;
  switch (e->kind) {
    case Expr::K::Lambda:
      return Expr::lambda(e->sym, kids[0]);
    case Expr::K::Access:
      return Expr::access(kids[0], e->index);
    case Expr::K::Apply:
      return Expr::apply(e->op, std::move(kids));
    default:
      return e;
  }
}

StmtPtr splice_stmt(const StmtPtr& s, const std::map<int32_t, ExprPtr>& repl) {
  if (!s) return s;
  switch (s->kind) {
    case Stmt::K::Skip:
      return s;
    case Stmt::K::Seq:
      return Stmt::seq(splice_stmt(s->a, repl), splice_stmt(s->b, repl));
    case Stmt::K::If:
      return Stmt::cond(splice_expr(s->e, repl), splice_stmt(s->a, repl), splice_stmt(s->b, repl));
    case Stmt::K::Collect:
      return Stmt::collect(splice_expr(s->e, repl));
    case Stmt::K::Foreach:
      return Stmt::foreach(s->binder, splice_expr(s->e, repl), splice_stmt(s->a, repl));
  }
  return s;
}

ExprPtr direct_replacement(const ExprPtr& lambda, const SiteExtraction& ex,
                           const RepresentationChange& rc) {
  if (!lambda || lambda->kind != Expr::K::Lambda) return lambda;
  for (const ExtractedSite& s : ex.sites) {
    if (!s.direct || s.temps.empty() || s.temps[0].first != lambda->sym) continue;
    if (!expr_eq(s.body, lambda->kids[0])) continue;
    auto it = rc.replacements.find(s.id);
    if (it == rc.replacements.end()) break;
    return Expr::lambda(lambda->sym, it->second);
  }
  return lambda;
}

}  // namespace

const ExtractedSite* SiteExtraction::find(int32_t id) const {
  for (const ExtractedSite& s : sites)
    if (s.id == id) return &s;
  return nullptr;
}

SiteExtraction extract_solution_sites(const HyloProgram& prog) {
  return Extractor(prog, RewriteSide::Solution).run();
}

SiteExtraction extract_state_sites(const HyloProgram& prog) {
  return Extractor(prog, RewriteSide::State).run();
}

HyloProgram instrumented_program(const HyloProgram& prog, const SiteExtraction& ex) {
  HyloProgram out = prog;
  if (!ex.ok) return out;
  if (ex.side == RewriteSide::Solution) {
    out.phi.body = ex.probed.body;
    out.scorer = probe_direct_lambda(prog.scorer, ex);
    if (out.thin) {
      KeywordPreorder r = *out.thin;
      for (Comparison& c : r.comps) c.key = probe_direct_lambda(c.key, ex);
      out.thin = std::move(r);
    }
  } else {
    out.psi.body = ex.probed.body;
    if (out.memo_key) out.memo_key = probe_direct_lambda(prog.memo_key, ex);
  }
  return out;
}

ProbeHook site_recorder(TraceBundle& bundle) {
  return [&bundle](int32_t site, const std::vector<Value>& inputs, const Value& output) {
    bundle.sites[site].push_back({inputs, output});
  };
}

LiftOutcome solve_lifting(const HyloProgram& prog, const SiteExtraction& ex,
                          const std::vector<LiftRun>& runs, const LiftConfig& cfg) {
  if (!ex.ok) {
    LiftOutcome out;
    out.why = "extraction failed: " + ex.why;
    return out;
  }
  return Lifter(prog, ex, runs, cfg).run();
}

HyloProgram apply_representation_change(const HyloProgram& prog, const SiteExtraction& ex,
                                        const RepresentationChange& rc) {
  HyloProgram out = prog;
  Type conv = Type::tuple(std::vector<Type>(rc.converter.size(), Type::integer()));
  if (ex.side == RewriteSide::Solution) {
    out.solution_type = conv;
    out.phi.body = splice_stmt(ex.probed.body, rc.replacements);
    out.scorer = direct_replacement(prog.scorer, ex, rc);
    if (out.thin) {
      KeywordPreorder r = *out.thin;
      for (Comparison& c : r.comps) c.key = direct_replacement(c.key, ex, rc);
      out.thin = std::move(r);
    }
  } else {
    out.state_type = conv;
    out.psi.body = splice_stmt(ex.probed.body, rc.replacements);
    std::vector<ExprPtr> parts;
    for (const ExprPtr& comp : rc.converter)
      parts.push_back(substitute(comp->kids[0], {{comp->sym, prog.root}}));
    out.root = Expr::apply(Op::MkTuple, std::move(parts));
    if (out.memo_key) out.memo_key = direct_replacement(prog.memo_key, ex, rc);
  }
  return out;
}

bool replacements_constant_time(const RepresentationChange& rc) {
  for (const auto& [id, e] : rc.replacements)
    if (has_poly_op(e)) return false;
  return true;
}

}  // namespace methyl
