#include "methyl/ast.hpp"

#include <array>
#include <sstream>
#include <unordered_map>

#include "methyl/error.hpp"
#include "methyl/symbols.hpp"

namespace methyl {

namespace {

// Indexed by Op. Keep in sync with the enum order.
constexpr std::array<OpInfo, 36> kOps = {{
    // name       min max  comm  nonlin const poly
    {"add", 2, -1, true, false, true, true},
    {"sub", 2, 2, false, false, true, true},
    {"mul", 2, -1, true, true, true, true},
    {"neg", 1, 1, false, false, true, true},
    {"min", 2, -1, true, false, true, true},
    {"max", 2, -1, true, false, true, true},
    {"lt", 2, 2, false, false, true, true},
    {"le", 2, 2, false, false, true, true},
    {"gt", 2, 2, false, false, false, false},
    {"ge", 2, 2, false, false, false, false},
    {"eq", 2, 2, true, false, true, true},
    {"ne", 2, 2, true, false, false, false},
    {"and", 2, -1, true, false, true, true},
    {"or", 2, -1, true, false, true, true},
    {"not", 1, 1, false, false, true, true},
    {"ite", 3, 3, false, false, true, true},
    {"tuple", 2, -1, false, false, false, false},
    {"len", 1, 1, false, false, true, true},
    {"head", 1, 1, false, false, true, true},
    {"tail", 1, 1, false, false, false, true},
    {"cons", 2, 2, false, false, false, false},
    {"access", 2, 2, false, false, true, true},
    {"upto", 2, 2, false, false, false, false},
    {"list", 0, -1, false, false, false, false},
    {"match", 2, 2, false, false, false, true},
    {"tval", 1, 1, false, false, true, true},
    {"tlchild", 1, 1, false, false, true, true},
    {"trchild", 1, 1, false, false, true, true},
    {"isleaf", 1, 1, false, false, true, true},
    {"leaf", 1, 1, false, false, false, false},
    {"node", 3, 3, false, false, false, false},
    {"vtag", 1, 1, false, false, true, true},
    {"vpayload", 1, 1, false, false, true, true},
    {"tag", 2, 2, false, false, false, false},
    {"fold", 3, 3, false, false, false, true},
    {"tfold", 3, 3, false, false, false, true},
}};

const std::unordered_map<std::string, Op>& name_table() {
  static const std::unordered_map<std::string, Op> table = [] {
    std::unordered_map<std::string, Op> t;
    for (size_t i = 0; i < kOps.size(); ++i) t.emplace(kOps[i].name, static_cast<Op>(i));
    t.emplace("+", Op::Add);
    t.emplace("-", Op::Sub);
    t.emplace("*", Op::Mul);
    t.emplace("<", Op::Lt);
    t.emplace("<=", Op::Le);
    t.emplace(">", Op::Gt);
    t.emplace(">=", Op::Ge);
    t.emplace("=", Op::Eq);
    t.emplace("!=", Op::Ne);
    return t;
  }();
  return table;
}

}  // namespace

const OpInfo& op_info(Op op) {
  auto i = static_cast<size_t>(op);
  if (i < kOps.size()) return kOps[i];
  static const OpInfo probe = {"probe", -1, -1, false, false, false, false};
  return probe;
}

bool op_by_name(const std::string& name, Op& out) {
  auto it = name_table().find(name);
  if (it == name_table().end()) return false;
  out = it->second;
  return true;
}

ExprPtr Expr::var(int32_t sym) {
  auto e = std::make_shared<Expr>();
  e->kind = K::Var;
  e->sym = sym;
  return e;
}

ExprPtr Expr::constant(Value v) {
  auto e = std::make_shared<Expr>();
  e->kind = K::Const;
  e->cval = std::move(v);
  return e;
}

ExprPtr Expr::lambda(int32_t param, ExprPtr body) {
  auto e = std::make_shared<Expr>();
  e->kind = K::Lambda;
  e->sym = param;
  e->kids.push_back(std::move(body));
  return e;
}

ExprPtr Expr::apply(Op op, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = K::Apply;
  e->op = op;
  e->kids = std::move(args);
  return e;
}

ExprPtr Expr::access(ExprPtr base, int32_t index) {
  // Project syntactic tuples away immediately; inlining relies on this to
  // keep bodies small, and it is a pure simplification.
  if (base && index >= 1) {
    if (base->kind == K::Apply && base->op == Op::MkTuple &&
        index <= static_cast<int32_t>(base->kids.size()))
      return base->kids[index - 1];
    if (base->kind == K::Const && base->cval.is(Value::Kind::Tuple) &&
        index <= static_cast<int32_t>(base->cval.size()))
      return constant(base->cval.elems()[index - 1]);
  }
  auto e = std::make_shared<Expr>();
  e->kind = K::Access;
  e->index = index;
  e->kids.push_back(std::move(base));
  return e;
}

ExprPtr Expr::probe(int32_t site, std::vector<int32_t> temps, ExprPtr original) {
  auto e = std::make_shared<Expr>();
  e->kind = K::Apply;
  e->op = Op::Probe;
  e->sym = site;
  e->temps = std::move(temps);
  e->kids.push_back(std::move(original));
  return e;
}

int Expr::compare(const Expr& a, const Expr& b) {
  if (&a == &b) return 0;
  if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
  switch (a.kind) {
    case K::Var:
      return a.sym < b.sym ? -1 : (a.sym > b.sym ? 1 : 0);
    case K::Const:
      return Value::compare(a.cval, b.cval);
    case K::Lambda:
      if (a.sym != b.sym) return a.sym < b.sym ? -1 : 1;
      return compare(*a.kids[0], *b.kids[0]);
    case K::Access:
      if (a.index != b.index) return a.index < b.index ? -1 : 1;
      return compare(*a.kids[0], *b.kids[0]);
    case K::Apply: {
      if (a.op != b.op) return a.op < b.op ? -1 : 1;
      if (a.sym != b.sym) return a.sym < b.sym ? -1 : 1;
      if (a.kids.size() != b.kids.size()) return a.kids.size() < b.kids.size() ? -1 : 1;
      for (size_t i = 0; i < a.kids.size(); ++i) {
        int c = compare(*a.kids[i], *b.kids[i]);
        if (c != 0) return c;
      }
      return 0;
    }
  }
  return 0;
}

namespace {

void print_expr(const Expr& e, std::ostream& os) {
  switch (e.kind) {
    case Expr::K::Var:
      os << Symbols::name(e.sym);
      return;
    case Expr::K::Const:
      os << e.cval.print();
      return;
    case Expr::K::Lambda:
      os << "(lambda " << Symbols::name(e.sym) << " ";
      print_expr(*e.kids[0], os);
      os << ")";
      return;
    case Expr::K::Access:
      os << "(get ";
      print_expr(*e.kids[0], os);
      os << " " << e.index << ")";
      return;
    case Expr::K::Apply: {
      if (e.op == Op::Probe) {  // instrumentation is print-transparent
        print_expr(*e.kids[0], os);
        return;
      }
      os << "(" << op_info(e.op).name;
      for (const auto& k : e.kids) {
        os << " ";
        print_expr(*k, os);
      }
      os << ")";
      return;
    }
  }
}

}  // namespace

std::string Expr::print() const {
  std::ostringstream os;
  print_expr(*this, os);
  return os.str();
}

int Expr::size() const {
  switch (kind) {
    case K::Var:
    case K::Const:
      return 1;
    case K::Lambda:
    case K::Access:
      return 1 + kids[0]->size();
    case K::Apply: {
      if (op == Op::Probe) return kids[0]->size();
      int n = 1;
      for (const auto& k : kids) n += k->size();
      return n;
    }
  }
  return 1;
}

bool mentions(const ExprPtr& e, const std::vector<int32_t>& vars) {
  if (!e) return false;
  switch (e->kind) {
    case Expr::K::Var:
      for (int32_t v : vars)
        if (v == e->sym) return true;
      return false;
    case Expr::K::Const:
      return false;
    case Expr::K::Lambda: {
      std::vector<int32_t> inner;
      inner.reserve(vars.size());
      for (int32_t v : vars)
        if (v != e->sym) inner.push_back(v);
      return !inner.empty() && mentions(e->kids[0], inner);
    }
    default:
      for (const auto& k : e->kids)
        if (mentions(k, vars)) return true;
      return false;
  }
}

ExprPtr substitute(const ExprPtr& e, const std::map<int32_t, ExprPtr>& map) {
  if (!e || map.empty()) return e;
  switch (e->kind) {
    case Expr::K::Var: {
      auto it = map.find(e->sym);
      return it == map.end() ? e : it->second;
    }
    case Expr::K::Const:
      return e;
    case Expr::K::Lambda: {
      if (map.count(e->sym)) {
        auto inner = map;
        inner.erase(e->sym);
        auto body = substitute(e->kids[0], inner);
        return body == e->kids[0] ? e : Expr::lambda(e->sym, body);
      }
      auto body = substitute(e->kids[0], map);
      return body == e->kids[0] ? e : Expr::lambda(e->sym, body);
    }
    case Expr::K::Access: {
      auto base = substitute(e->kids[0], map);
      return base == e->kids[0] ? e : Expr::access(base, e->index);
    }
    case Expr::K::Apply: {
      std::vector<ExprPtr> kids;
      kids.reserve(e->kids.size());
      bool changed = false;
      for (const auto& k : e->kids) {
        kids.push_back(substitute(k, map));
        changed = changed || kids.back() != k;
      }
      if (!changed) return e;
      if (e->op == Op::Probe) return Expr::probe(e->sym, e->temps, kids[0]);
      return Expr::apply(e->op, std::move(kids));
    }
  }
  return e;
}

StmtPtr Stmt::skip() {
  auto s = std::make_shared<Stmt>();
  s->kind = K::Skip;
  return s;
}

StmtPtr Stmt::seq(StmtPtr first, StmtPtr second) {
  auto s = std::make_shared<Stmt>();
  s->kind = K::Seq;
  s->a = std::move(first);
  s->b = std::move(second);
  return s;
}

StmtPtr Stmt::cond(ExprPtr c, StmtPtr then_s, StmtPtr else_s) {
  auto s = std::make_shared<Stmt>();
  s->kind = K::If;
  s->e = std::move(c);
  s->a = std::move(then_s);
  s->b = else_s ? std::move(else_s) : skip();
  return s;
}

StmtPtr Stmt::collect(ExprPtr e) {
  auto s = std::make_shared<Stmt>();
  s->kind = K::Collect;
  s->e = std::move(e);
  return s;
}

StmtPtr Stmt::foreach(int32_t binder, ExprPtr source, StmtPtr body) {
  auto s = std::make_shared<Stmt>();
  s->kind = K::Foreach;
  s->binder = binder;
  s->e = std::move(source);
  s->a = std::move(body);
  return s;
}

int Stmt::compare(const Stmt& x, const Stmt& y) {
  if (&x == &y) return 0;
  if (x.kind != y.kind) return x.kind < y.kind ? -1 : 1;
  auto cmp_e = [](const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return 0;
    if (!a || !b) return a ? 1 : -1;
    return Expr::compare(*a, *b);
  };
  auto cmp_s = [](const StmtPtr& a, const StmtPtr& b) {
    if (a == b) return 0;
    if (!a || !b) return a ? 1 : -1;
    return compare(*a, *b);
  };
  if (x.binder != y.binder) return x.binder < y.binder ? -1 : 1;
  if (int c = cmp_e(x.e, y.e)) return c;
  if (int c = cmp_s(x.a, y.a)) return c;
  return cmp_s(x.b, y.b);
}

namespace {

void print_stmt(const Stmt& s, std::ostream& os) {
  switch (s.kind) {
    case Stmt::K::Skip:
      os << "(skip)";
      return;
    case Stmt::K::Seq: {
      os << "(seq";
      const Stmt* cur = &s;
      // Flatten the right spine only so printing round-trips exactly.
      while (true) {
        os << " ";
        print_stmt(*cur->a, os);
        if (cur->b->kind == Stmt::K::Seq) {
          cur = cur->b.get();
        } else {
          os << " ";
          print_stmt(*cur->b, os);
          break;
        }
      }
      os << ")";
      return;
    }
    case Stmt::K::If:
      os << "(if " << s.e->print() << " ";
      print_stmt(*s.a, os);
      if (s.b->kind != Stmt::K::Skip) {
        os << " ";
        print_stmt(*s.b, os);
      }
      os << ")";
      return;
    case Stmt::K::Collect:
      os << "(collect " << s.e->print() << ")";
      return;
    case Stmt::K::Foreach:
      os << "(foreach " << Symbols::name(s.binder) << " " << s.e->print() << " ";
      print_stmt(*s.a, os);
      os << ")";
      return;
  }
}

}  // namespace

std::string Stmt::print() const {
  std::ostringstream os;
  print_stmt(*this, os);
  return os.str();
}

int32_t NameGen::fresh() {
  while (true) {
    int32_t sym = Symbols::intern(prefix_ + "$" + std::to_string(n_++));
    if (!avoid_.count(sym)) return sym;
  }
}

void collect_syms(const ExprPtr& e, std::set<int32_t>& out) {
  if (!e) return;
  if (e->kind == Expr::K::Var || e->kind == Expr::K::Lambda) out.insert(e->sym);
  for (const auto& k : e->kids) collect_syms(k, out);
}

void collect_syms_stmt(const StmtPtr& s, std::set<int32_t>& out) {
  if (!s) return;
  if (s->kind == Stmt::K::Foreach) out.insert(s->binder);
  collect_syms(s->e, out);
  collect_syms_stmt(s->a, out);
  collect_syms_stmt(s->b, out);
}

StmtPtr substitute_stmt(const StmtPtr& s, const std::map<int32_t, ExprPtr>& map) {
  if (!s || map.empty()) return s;
  switch (s->kind) {
    case Stmt::K::Skip:
      return s;
    case Stmt::K::Seq: {
      auto a = substitute_stmt(s->a, map);
      auto b = substitute_stmt(s->b, map);
      return (a == s->a && b == s->b) ? s : Stmt::seq(a, b);
    }
    case Stmt::K::If: {
      auto c = substitute(s->e, map);
      auto a = substitute_stmt(s->a, map);
      auto b = substitute_stmt(s->b, map);
      return (c == s->e && a == s->a && b == s->b) ? s : Stmt::cond(c, a, b);
    }
    case Stmt::K::Collect: {
      auto e = substitute(s->e, map);
      return e == s->e ? s : Stmt::collect(e);
    }
    case Stmt::K::Foreach: {
      auto src = substitute(s->e, map);
      auto inner = map;
      inner.erase(s->binder);
      auto body = substitute_stmt(s->a, inner);
      return (src == s->e && body == s->a) ? s : Stmt::foreach(s->binder, src, body);
    }
  }
  return s;
}

}  // namespace methyl
