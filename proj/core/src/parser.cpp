#include "methyl/parser.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "methyl/error.hpp"
#include "methyl/symbols.hpp"

namespace methyl {

namespace {

// ---------------------------------------------------------------- s-exprs

struct Sexp {
  enum class K : uint8_t { Atom, List };
  K kind;
  std::string atom;
  std::vector<Sexp> items;
  int line = 0, col = 0;

  bool is_list(size_t min_items) const { return kind == K::List && items.size() >= min_items; }
  bool is_atom(const char* s) const { return kind == K::Atom && atom == s; }
};

[[noreturn]] void perr(const Sexp& at, const std::string& msg) {
  fail(Error::Kind::Parse, msg, at.line, at.col);
}

struct Lexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;

  explicit Lexer(const std::string& s) : src(s) {}

  void advance() {
    if (pos < src.size() && src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skip_blank() {
    while (pos < src.size()) {
      char c = src[pos];
      if (c == ';') {
        while (pos < src.size() && src[pos] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }

  bool at_end() {
    skip_blank();
    return pos >= src.size();
  }

  Sexp read() {
    skip_blank();
    if (pos >= src.size()) fail(Error::Kind::Parse, "unexpected end of input", line, col);
    char c = src[pos];
    Sexp s;
    s.line = line;
    s.col = col;
    if (c == '(') {
      advance();
      s.kind = Sexp::K::List;
      while (true) {
        skip_blank();
        if (pos >= src.size()) fail(Error::Kind::Parse, "missing ')'", s.line, s.col);
        if (src[pos] == ')') {
          advance();
          return s;
        }
        s.items.push_back(read());
      }
    }
    if (c == ')') fail(Error::Kind::Parse, "unexpected ')'", line, col);
    s.kind = Sexp::K::Atom;
    while (pos < src.size()) {
      char a = src[pos];
      if (std::isspace(static_cast<unsigned char>(a)) || a == '(' || a == ')' || a == ';') break;
      s.atom.push_back(a);
      advance();
    }
    return s;
  }
};

bool atom_int(const Sexp& s, int64_t& out) {
  if (s.kind != Sexp::K::Atom || s.atom.empty()) return false;
  size_t i = s.atom[0] == '-' ? 1 : 0;
  if (i >= s.atom.size()) return false;
  for (size_t j = i; j < s.atom.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(s.atom[j]))) return false;
  try {
    out = std::stoll(s.atom);
  } catch (...) {
    fail(Error::Kind::Parse, "integer out of range: " + s.atom, s.line, s.col);
  }
  return true;
}

int64_t need_int(const Sexp& s, const char* what) {
  int64_t v;
  if (!atom_int(s, v)) perr(s, std::string("expected integer ") + what);
  return v;
}

int32_t need_name(const Sexp& s, const char* what) {
  int64_t dummy;
  if (s.kind != Sexp::K::Atom || atom_int(s, dummy))
    perr(s, std::string("expected name ") + what);
  return Symbols::intern(s.atom);
}

// ---------------------------------------------------------------- values

Value parse_value_sexp(const Sexp& s) {
  if (s.kind == Sexp::K::Atom) {
    int64_t n;
    if (atom_int(s, n)) return Value::integer(n);
    if (s.atom == "true") return Value::boolean(true);
    if (s.atom == "false") return Value::boolean(false);
    if (s.atom == "unit") return Value::unit();
    if (s.atom == "neg_inf") return Value::integer(kNegInf);
    perr(s, "unknown value literal: " + s.atom);
  }
  if (s.items.empty() || s.items[0].kind != Sexp::K::Atom)
    perr(s, "expected value form");
  const std::string& head = s.items[0].atom;
  auto rest = [&](size_t from) {
    std::vector<Value> vs;
    for (size_t i = from; i < s.items.size(); ++i) vs.push_back(parse_value_sexp(s.items[i]));
    return vs;
  };
  if (head == "list") return Value::list(rest(1));
  if (head == "tuple") {
    if (s.items.size() < 3) perr(s, "tuple needs at least two components");
    return Value::tuple(rest(1));
  }
  if (head == "set") return Value::set(rest(1));
  if (head == "tag") {
    if (s.items.size() != 3) perr(s, "tag needs an index and a payload");
    return Value::tagged(static_cast<int>(need_int(s.items[1], "tag index")),
                         parse_value_sexp(s.items[2]));
  }
  if (head == "leaf") {
    if (s.items.size() != 2) perr(s, "leaf needs one value");
    return Value::tree_leaf(parse_value_sexp(s.items[1]));
  }
  if (head == "node") {
    if (s.items.size() != 4) perr(s, "node needs a value and two subtrees");
    return Value::tree_node(parse_value_sexp(s.items[1]), parse_value_sexp(s.items[2]),
                            parse_value_sexp(s.items[3]));
  }
  perr(s, "unknown value form: " + head);
}

// ---------------------------------------------------------------- types

Type parse_type_sexp(const Sexp& s) {
  if (s.kind == Sexp::K::Atom) {
    if (s.atom == "int") return Type::integer();
    if (s.atom == "bool") return Type::boolean();
    if (s.atom == "unit") return Type::unit();
    perr(s, "unknown type: " + s.atom);
  }
  if (s.items.empty() || s.items[0].kind != Sexp::K::Atom) perr(s, "expected type form");
  const std::string& head = s.items[0].atom;
  if (head == "list" && s.items.size() == 2) return Type::list(parse_type_sexp(s.items[1]));
  if (head == "tree" && s.items.size() == 2) return Type::tree(parse_type_sexp(s.items[1]));
  if (head == "tuple" || head == "variant") {
    if (s.items.size() < 3) perr(s, head + " type needs at least two components");
    std::vector<Type> comps;
    for (size_t i = 1; i < s.items.size(); ++i) comps.push_back(parse_type_sexp(s.items[i]));
    return head == "tuple" ? Type::tuple(std::move(comps)) : Type::variant(std::move(comps));
  }
  perr(s, "unknown type form: " + head);
}

// ---------------------------------------------------------------- functors

Functor parse_functor_sexp(const Sexp& s) {
  if (s.is_atom("I")) return Functor::identity();
  if (s.kind != Sexp::K::List || s.items.empty() || s.items[0].kind != Sexp::K::Atom)
    perr(s, "expected shape form");
  const std::string& head = s.items[0].atom;
  if (head == "c" && s.items.size() == 2) {
    if (s.items[1].is_atom("unit")) return Functor::const_unit();
    if (s.items[1].is_atom("int")) return Functor::const_int();
    perr(s.items[1], "constant shape must be unit or int");
  }
  if (head == "*" || head == "+") {
    if (s.items.size() < 3) perr(s, "shape " + head + " needs at least two operands");
    // n-ary surface form, right-nested internally
    Functor acc = parse_functor_sexp(s.items.back());
    for (size_t i = s.items.size() - 2; i >= 1; --i) {
      Functor left = parse_functor_sexp(s.items[i]);
      acc = head == "*" ? Functor::product(left, acc) : Functor::sum(left, acc);
    }
    return acc;
  }
  perr(s, "unknown shape form: " + head);
}

// ---------------------------------------------------------------- exprs

struct Ctx {
  std::vector<int32_t> scope;
  std::map<int32_t, ExprPtr> defines;
  std::set<int32_t> constants;
  NameGen gen{"a"};
  bool saw_mul = false;

  bool bound(int32_t sym) const {
    for (auto it = scope.rbegin(); it != scope.rend(); ++it)
      if (*it == sym) return true;
    return false;
  }
};

bool all_const(const std::vector<ExprPtr>& kids) {
  for (const auto& k : kids)
    if (k->kind != Expr::K::Const) return false;
  return true;
}

// Fold constructor applications over literal arguments into literals so that
// printed constants re-parse to the same tree.
ExprPtr make_apply(Op op, std::vector<ExprPtr> kids, const Sexp& at) {
  const OpInfo& arity = op_info(op);
  int n_args = static_cast<int>(kids.size());
  if (n_args < arity.min_arity || (arity.max_arity >= 0 && n_args > arity.max_arity))
    perr(at, std::string(arity.name) + ": wrong number of arguments");
  if (all_const(kids)) {
    auto vals = [&] {
      std::vector<Value> vs;
      vs.reserve(kids.size());
      for (const auto& k : kids) vs.push_back(k->cval);
      return vs;
    };
    switch (op) {
      case Op::MkTuple:
        return Expr::constant(Value::tuple(vals()));
      case Op::MkList:
        return Expr::constant(Value::list(vals()));
      case Op::TLeaf:
        return Expr::constant(Value::tree_leaf(kids[0]->cval));
      case Op::TNode:
        if (kids[1]->cval.is(Value::Kind::Tree) && kids[2]->cval.is(Value::Kind::Tree))
          return Expr::constant(
              Value::tree_node(kids[0]->cval, kids[1]->cval, kids[2]->cval));
        break;
      case Op::MkTag:
        if (kids[0]->cval.is(Value::Kind::Int))
          return Expr::constant(
              Value::tagged(static_cast<int>(kids[0]->cval.as_int()), kids[1]->cval));
        break;
      case Op::Cons:
        if (kids[1]->cval.is(Value::Kind::List)) {
          std::vector<Value> vs;
          vs.push_back(kids[0]->cval);
          for (const auto& e : kids[1]->cval.elems()) vs.push_back(e);
          return Expr::constant(Value::list(std::move(vs)));
        }
        break;
      default:
        break;
    }
  }
  return Expr::apply(op, std::move(kids));
}

ExprPtr parse_expr_sexp(const Sexp& s, Ctx& cx);

ExprPtr parse_lambda(const Sexp& s, Ctx& cx) {
  if (s.items.size() != 3) perr(s, "lambda needs parameters and one body expression");
  const Sexp& ps = s.items[1];
  std::vector<int32_t> params;
  if (ps.kind == Sexp::K::Atom) {
    params.push_back(need_name(ps, "as parameter"));
  } else {
    for (const auto& p : ps.items) params.push_back(need_name(p, "as parameter"));
    if (params.empty()) perr(ps, "lambda needs at least one parameter");
  }
  for (int32_t p : params) cx.scope.push_back(p);
  ExprPtr body = parse_expr_sexp(s.items[2], cx);
  cx.scope.resize(cx.scope.size() - params.size());
  if (params.size() == 1) return Expr::lambda(params[0], body);
  // Multi-parameter surface form: one tuple-typed parameter underneath.
  int32_t t = cx.gen.fresh();
  std::map<int32_t, ExprPtr> sub;
  for (size_t i = 0; i < params.size(); ++i)
    sub.emplace(params[i], Expr::access(Expr::var(t), static_cast<int32_t>(i + 1)));
  return Expr::lambda(t, substitute(body, sub));
}

ExprPtr parse_expr_sexp(const Sexp& s, Ctx& cx) {
  if (s.kind == Sexp::K::Atom) {
    int64_t n;
    if (atom_int(s, n)) return Expr::constant(Value::integer(n));
    if (s.atom == "true") return Expr::constant(Value::boolean(true));
    if (s.atom == "false") return Expr::constant(Value::boolean(false));
    if (s.atom == "unit") return Expr::constant(Value::unit());
    if (s.atom == "neg_inf") return Expr::constant(Value::integer(kNegInf));
    if (s.atom == "nil") return Expr::constant(Value::list({}));
    int32_t sym = Symbols::intern(s.atom);
    if (cx.bound(sym)) return Expr::var(sym);
    auto def = cx.defines.find(sym);
    if (def != cx.defines.end()) return def->second;
    if (cx.constants.count(sym)) return Expr::var(sym);
    perr(s, "unbound name: " + s.atom);
  }
  if (s.items.empty()) perr(s, "empty form");
  if (s.items[0].kind != Sexp::K::Atom) perr(s.items[0], "expected operator");
  const std::string& head = s.items[0].atom;

  if (head == "lambda") return parse_lambda(s, cx);
  if (head == "get") {
    if (s.items.size() != 3) perr(s, "get needs a tuple and a component index");
    ExprPtr base = parse_expr_sexp(s.items[1], cx);
    int64_t i = need_int(s.items[2], "component index");
    if (i < 1) perr(s.items[2], "component index is 1-based");
    return Expr::access(base, static_cast<int32_t>(i));
  }
  if (head == "fst" || head == "snd") {
    if (s.items.size() != 2) perr(s, head + " needs one argument");
    return Expr::access(parse_expr_sexp(s.items[1], cx), head == "fst" ? 1 : 2);
  }
  if (head == "tag") {
    if (s.items.size() != 3) perr(s, "tag needs an index and a payload");
    int64_t i = need_int(s.items[1], "tag index");
    if (i < 1) perr(s.items[1], "tag index is 1-based");
    std::vector<ExprPtr> kids;
    kids.push_back(Expr::constant(Value::integer(i)));
    kids.push_back(parse_expr_sexp(s.items[2], cx));
    return make_apply(Op::MkTag, std::move(kids), s);
  }

  Op op;
  if (op_by_name(head, op)) {
    if (op == Op::Mul) cx.saw_mul = true;
    std::vector<ExprPtr> kids;
    kids.reserve(s.items.size() - 1);
    for (size_t i = 1; i < s.items.size(); ++i) kids.push_back(parse_expr_sexp(s.items[i], cx));
    return make_apply(op, std::move(kids), s);
  }

  // Application of a defined function: inline its body.
  int32_t sym = Symbols::intern(head);
  auto def = cx.defines.find(sym);
  if (def != cx.defines.end()) {
    if (s.items.size() < 2) perr(s, head + " needs an argument");
    std::vector<ExprPtr> args;
    for (size_t i = 1; i < s.items.size(); ++i) args.push_back(parse_expr_sexp(s.items[i], cx));
    ExprPtr arg = args.size() == 1 ? args[0] : make_apply(Op::MkTuple, args, s);
    const Expr& fn = *def->second;
    return substitute(fn.kids[0], {{fn.sym, arg}});
  }
  perr(s, "unknown operator: " + head);
}

// ---------------------------------------------------------------- stmts

StmtPtr parse_stmt_sexp(const Sexp& s, Ctx& cx);

StmtPtr parse_stmt_block(const Sexp& at, const std::vector<Sexp>& items, size_t from, Ctx& cx) {
  (void)at;
  if (from >= items.size()) return Stmt::skip();
  // Parse in source order (generated names stay deterministic), nest rightward.
  std::vector<StmtPtr> parts;
  for (size_t i = from; i < items.size(); ++i) parts.push_back(parse_stmt_sexp(items[i], cx));
  StmtPtr out = parts.back();
  for (size_t i = parts.size() - 1; i-- > 0;) out = Stmt::seq(parts[i], out);
  return out;
}

StmtPtr parse_stmt_sexp(const Sexp& s, Ctx& cx) {
  if (s.kind == Sexp::K::Atom && s.atom == "skip") return Stmt::skip();
  if (s.kind != Sexp::K::List || s.items.empty() || s.items[0].kind != Sexp::K::Atom)
    perr(s, "expected statement form");
  const std::string& head = s.items[0].atom;
  if (head == "skip") {
    if (s.items.size() != 1) perr(s, "skip takes no arguments");
    return Stmt::skip();
  }
  if (head == "seq") {
    return parse_stmt_block(s, s.items, 1, cx);
  }
  if (head == "if") {
    if (s.items.size() != 3 && s.items.size() != 4) perr(s, "if needs a condition and one or two branches");
    ExprPtr c = parse_expr_sexp(s.items[1], cx);
    StmtPtr t = parse_stmt_sexp(s.items[2], cx);
    StmtPtr e = s.items.size() == 4 ? parse_stmt_sexp(s.items[3], cx) : Stmt::skip();
    return Stmt::cond(c, t, e);
  }
  if (head == "collect") {
    if (s.items.size() != 2) perr(s, "collect needs one expression");
    return Stmt::collect(parse_expr_sexp(s.items[1], cx));
  }
  if (head == "foreach") {
    if (s.items.size() < 4) perr(s, "foreach needs a binder, a source, and a body");
    int32_t binder = need_name(s.items[1], "as loop binder");
    ExprPtr src = parse_expr_sexp(s.items[2], cx);
    cx.scope.push_back(binder);
    StmtPtr body = parse_stmt_block(s, s.items, 3, cx);
    cx.scope.pop_back();
    return Stmt::foreach(binder, src, body);
  }
  perr(s, "unknown statement form: " + head);
}

// ---------------------------------------------------------------- program

StmtFun parse_stmt_fun(const Sexp& s, Ctx& cx, const char* what) {
  if (!s.is_list(3) || !s.items[0].is_atom("lambda"))
    perr(s, std::string(what) + " must be (lambda NAME STATEMENT...)");
  int32_t param = need_name(s.items[1], "as parameter");
  cx.scope.push_back(param);
  StmtPtr body = parse_stmt_block(s, s.items, 2, cx);
  cx.scope.pop_back();
  StmtFun f;
  f.param = param;
  f.body = body;
  return f;
}

ExprPtr parse_unary_lambda(const Sexp& s, Ctx& cx, const char* what) {
  ExprPtr e = parse_expr_sexp(s, cx);
  if (e->kind != Expr::K::Lambda) perr(s, std::string(what) + " must be a lambda");
  return e;
}

SpaceDecl parse_space_decl(const Sexp& s, Ctx& cx) {
  if (!s.is_list(2)) perr(s, "constant declaration needs a name and a type");
  SpaceDecl d;
  d.name = need_name(s.items[0], "as constant name");
  d.type = parse_type_sexp(s.items[1]);
  bool saw_size = false;
  for (size_t i = 2; i < s.items.size(); ++i) {
    const Sexp& a = s.items[i];
    if (!a.is_list(2) || a.items[0].kind != Sexp::K::Atom) perr(a, "expected attribute");
    const std::string& key = a.items[0].atom;
    if (key == "size" && a.items.size() == 2) {
      d.size_bound = static_cast<int>(need_int(a.items[1], "size bound"));
      saw_size = true;
    } else if ((key == "ints" || key == "range") && a.items.size() == 3) {
      d.int_lo = need_int(a.items[1], "range low");
      d.int_hi = need_int(a.items[2], "range high");
      if (d.int_lo > d.int_hi) perr(a, "empty range");
      d.has_range = true;
    } else if (key == "scale-size" && a.items.size() == 2) {
      d.scale_size = static_cast<int>(need_int(a.items[1], "scale factor"));
    } else if (key == "scale" && a.items.size() == 2) {
      d.scale = need_int(a.items[1], "scale factor");
    } else {
      perr(a, "unknown attribute: " + key);
    }
  }
  if (d.type.is(Type::Kind::Int)) {
    if (!d.has_range) perr(s, "integer constant needs (range LO HI)");
  } else if (d.type.is(Type::Kind::List) || d.type.is(Type::Kind::Tree)) {
    if (!saw_size) perr(s, "structured constant needs (size N)");
    if (!d.has_range) perr(s, "structured constant needs (ints LO HI)");
    if (d.size_bound < 1) perr(s, "size bound must be positive");
  } else {
    perr(s, "constants must be integers, lists, or trees");
  }
  if (cx.constants.count(d.name) || cx.defines.count(d.name))
    perr(s, "duplicate name: " + Symbols::name(d.name));
  cx.constants.insert(d.name);
  return d;
}

// Generated names must avoid every spelling in the source.
void register_atoms(const std::string& source, NameGen& gen) {
  Lexer scan(source);
  while (!scan.at_end()) {
    Sexp s = scan.read();
    std::vector<const Sexp*> stack = {&s};
    while (!stack.empty()) {
      const Sexp* cur = stack.back();
      stack.pop_back();
      if (cur->kind == Sexp::K::Atom) {
        gen.avoid(Symbols::intern(cur->atom));
      } else {
        for (const auto& it : cur->items) stack.push_back(&it);
      }
    }
  }
}

}  // namespace

HyloProgram parse_program(const std::string& source) {
  Lexer lex(source);
  std::vector<Sexp> top;
  while (!lex.at_end()) top.push_back(lex.read());
  if (top.empty()) fail(Error::Kind::Parse, "empty program", 1, 1);

  Ctx cx;
  register_atoms(source, cx.gen);

  size_t i = 0;
  for (; i < top.size(); ++i) {
    const Sexp& s = top[i];
    if (s.is_list(1) && s.items[0].is_atom("define")) {
      if (s.items.size() != 3) perr(s, "define needs a name and a lambda");
      int32_t name = need_name(s.items[1], "to define");
      Op dummy;
      if (op_by_name(s.items[1].atom, dummy) || cx.defines.count(name))
        perr(s.items[1], "name already in use: " + s.items[1].atom);
      cx.defines.emplace(name, parse_unary_lambda(s.items[2], cx, "define body"));
      continue;
    }
    break;
  }
  if (i + 1 != top.size() || !top[i].is_list(1) || !top[i].items[0].is_atom("hylo"))
    fail(Error::Kind::Parse, "expected defines followed by one (hylo ...) form", 1, 1);

  const Sexp& hy = top[i];
  HyloProgram prog;
  bool saw_functor = false, saw_state = false, saw_solution = false, saw_constants = false,
       saw_root = false, saw_psi = false, saw_phi = false, saw_scorer = false;
  const Sexp* root_form = nullptr;
  const Sexp* psi_form = nullptr;
  const Sexp* phi_form = nullptr;
  const Sexp* scorer_form = nullptr;
  const Sexp* thin_form = nullptr;
  const Sexp* memo_form = nullptr;

  for (size_t k = 1; k < hy.items.size(); ++k) {
    const Sexp& sec = hy.items[k];
    if (!sec.is_list(1) || sec.items[0].kind != Sexp::K::Atom) perr(sec, "expected section");
    const std::string& name = sec.items[0].atom;
    auto once = [&](bool& flag) {
      if (flag) perr(sec, "duplicate section: " + name);
      flag = true;
    };
    if (name == "functor" && sec.items.size() == 2) {
      once(saw_functor);
      prog.functor = parse_functor_sexp(sec.items[1]);
    } else if (name == "state" && sec.items.size() == 2) {
      once(saw_state);
      prog.state_type = parse_type_sexp(sec.items[1]);
    } else if (name == "solution" && sec.items.size() == 2) {
      once(saw_solution);
      prog.solution_type = parse_type_sexp(sec.items[1]);
    } else if (name == "constants") {
      once(saw_constants);
      for (size_t j = 1; j < sec.items.size(); ++j)
        prog.constants.push_back(parse_space_decl(sec.items[j], cx));
    } else if (name == "root" && sec.items.size() == 2) {
      once(saw_root);
      root_form = &sec.items[1];
    } else if (name == "psi" && sec.items.size() == 2) {
      once(saw_psi);
      psi_form = &sec.items[1];
    } else if (name == "phi" && sec.items.size() == 2) {
      once(saw_phi);
      phi_form = &sec.items[1];
    } else if (name == "scorer" && sec.items.size() == 2) {
      once(saw_scorer);
      scorer_form = &sec.items[1];
    } else if (name == "thin") {
      if (thin_form) perr(sec, "duplicate section: thin");
      thin_form = &sec;
    } else if (name == "memo" && sec.items.size() == 2) {
      if (memo_form) perr(sec, "duplicate section: memo");
      memo_form = &sec.items[1];
    } else {
      perr(sec, "unknown section: " + name);
    }
  }
  if (!saw_functor || !saw_state || !saw_solution || !saw_root || !saw_psi || !saw_phi ||
      !saw_scorer)
    perr(hy, "missing required section (functor/state/solution/root/psi/phi/scorer)");

  // Constants are in scope everywhere; sections may come in any order, so the
  // bodies are parsed after the declarations above.
  prog.root = parse_expr_sexp(*root_form, cx);
  prog.psi = parse_stmt_fun(*psi_form, cx, "psi");
  prog.phi = parse_stmt_fun(*phi_form, cx, "phi");
  prog.scorer = parse_unary_lambda(*scorer_form, cx, "scorer");
  if (thin_form) {
    KeywordPreorder r;
    for (size_t j = 1; j < thin_form->items.size(); ++j) {
      const Sexp& c = thin_form->items[j];
      if (!c.is_list(2) || c.items[0].kind != Sexp::K::Atom || c.items.size() != 2)
        perr(c, "expected (le LAMBDA) or (eq LAMBDA)");
      Comparison comp;
      if (c.items[0].is_atom("le"))
        comp.rel = Comparison::Rel::Le;
      else if (c.items[0].is_atom("eq"))
        comp.rel = Comparison::Rel::Eq;
      else
        perr(c.items[0], "comparison must be le or eq");
      comp.key = parse_unary_lambda(c.items[1], cx, "comparison key");
      r.comps.push_back(std::move(comp));
    }
    prog.thin = std::move(r);
  }
  if (memo_form) prog.memo_key = parse_unary_lambda(*memo_form, cx, "memo key");
  prog.nonlinear_ops = cx.saw_mul;
  return prog;
}

Instance parse_instance(const std::string& source, const HyloProgram& prog) {
  Lexer lex(source);
  Sexp s = lex.read();
  if (!lex.at_end()) fail(Error::Kind::Parse, "trailing input after instance", lex.line, lex.col);
  if (!s.is_list(1) || !s.items[0].is_atom("instance")) perr(s, "expected (instance ...)");
  std::map<int32_t, Value> given;
  for (size_t i = 1; i < s.items.size(); ++i) {
    const Sexp& b = s.items[i];
    if (!b.is_list(2) || b.items.size() != 2) perr(b, "expected (NAME VALUE)");
    int32_t name = need_name(b.items[0], "as constant name");
    if (given.count(name)) perr(b, "duplicate constant: " + b.items[0].atom);
    given.emplace(name, parse_value_sexp(b.items[1]));
  }
  Instance inst;
  for (const auto& d : prog.constants) {
    auto it = given.find(d.name);
    if (it == given.end())
      perr(s, "instance is missing constant: " + Symbols::name(d.name));
    inst.bindings.emplace_back(d.name, it->second);
    given.erase(it);
  }
  if (!given.empty())
    perr(s, "instance binds unknown constant: " + Symbols::name(given.begin()->first));
  return inst;
}

Value parse_value(const std::string& source) {
  Lexer lex(source);
  Sexp s = lex.read();
  if (!lex.at_end()) fail(Error::Kind::Parse, "trailing input after value", lex.line, lex.col);
  return parse_value_sexp(s);
}

Functor parse_functor(const std::string& source) {
  Lexer lex(source);
  Sexp s = lex.read();
  if (!lex.at_end()) fail(Error::Kind::Parse, "trailing input after shape", lex.line, lex.col);
  return parse_functor_sexp(s);
}

Type parse_type(const std::string& source) {
  Lexer lex(source);
  Sexp s = lex.read();
  if (!lex.at_end()) fail(Error::Kind::Parse, "trailing input after type", lex.line, lex.col);
  return parse_type_sexp(s);
}

ExprPtr parse_expr(const std::string& source, const std::vector<int32_t>& bound) {
  Lexer lex(source);
  Sexp s = lex.read();
  if (!lex.at_end())
    fail(Error::Kind::Parse, "trailing input after expression", lex.line, lex.col);
  Ctx cx;
  register_atoms(source, cx.gen);
  cx.scope = bound;
  return parse_expr_sexp(s, cx);
}

// ---------------------------------------------------------------- printing

std::string Comparison::print() const {
  return std::string("(") + (rel == Rel::Le ? "le" : "eq") + " " + key->print() + ")";
}

std::string KeywordPreorder::print() const {
  std::string out;
  for (size_t i = 0; i < comps.size(); ++i) {
    if (i) out += " ";
    out += comps[i].print();
  }
  return out;
}

std::string SpaceDecl::print() const {
  std::string out = "(" + Symbols::name(name) + " " + type.print();
  bool structured = !type.is(Type::Kind::Int);
  if (structured) out += " (size " + std::to_string(size_bound) + ")";
  if (has_range) {
    out += structured ? " (ints " : " (range ";
    out += std::to_string(int_lo) + " " + std::to_string(int_hi) + ")";
  }
  if (scale_size > 0) out += " (scale-size " + std::to_string(scale_size) + ")";
  if (scale > 0) out += " (scale " + std::to_string(scale) + ")";
  return out + ")";
}

const Value* Instance::find(int32_t name) const {
  for (const auto& [n, v] : bindings)
    if (n == name) return &v;
  return nullptr;
}

std::string Instance::print() const {
  std::string out = "(instance";
  for (const auto& [n, v] : bindings) out += "\n  (" + Symbols::name(n) + " " + v.print() + ")";
  return out + ")\n";
}

std::vector<int32_t> HyloProgram::constant_names() const {
  std::vector<int32_t> names;
  names.reserve(constants.size());
  for (const auto& d : constants) names.push_back(d.name);
  return names;
}

std::string HyloProgram::print() const {
  std::ostringstream os;
  os << "(hylo\n";
  os << "  (functor " << functor.print() << ")\n";
  os << "  (state " << state_type.print() << ")\n";
  os << "  (solution " << solution_type.print() << ")\n";
  os << "  (constants";
  for (const auto& d : constants) os << " " << d.print();
  os << ")\n";
  os << "  (root " << root->print() << ")\n";
  os << "  (psi (lambda " << Symbols::name(psi.param) << " " << psi.body->print() << "))\n";
  os << "  (phi (lambda " << Symbols::name(phi.param) << " " << phi.body->print() << "))\n";
  os << "  (scorer " << scorer->print() << ")\n";
  if (thin && !thin->comps.empty()) os << "  (thin " << thin->print() << ")\n";
  if (memo_key) os << "  (memo " << memo_key->print() << ")\n";
  os << ")\n";
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Error::Kind::Io, "cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Error::Kind::Io, "cannot write file: " + path);
  out << contents;
  if (!out) fail(Error::Kind::Io, "write failed: " + path);
}

}  // namespace methyl
