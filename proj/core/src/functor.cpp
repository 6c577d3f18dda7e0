#include "methyl/functor.hpp"

#include <sstream>

#include "methyl/error.hpp"

namespace methyl {

Type Type::make(Kind k, std::vector<Type> comps) {
  return Type(std::make_shared<const Node>(Node{k, std::move(comps)}));
}

Type Type::integer() { return make(Kind::Int); }
Type Type::boolean() { return make(Kind::Bool); }
Type Type::unit() { return make(Kind::Unit); }
Type Type::list(Type elem) { return make(Kind::List, {std::move(elem)}); }
Type Type::tree(Type elem) { return make(Kind::Tree, {std::move(elem)}); }
Type Type::tuple(std::vector<Type> comps) { return make(Kind::Tuple, std::move(comps)); }
Type Type::variant(std::vector<Type> alts) { return make(Kind::Variant, std::move(alts)); }

bool Type::is_scalar_tuple() const {
  if (is_scalar()) return true;
  if (node_->kind != Kind::Tuple) return false;
  for (const auto& c : node_->comps)
    if (!c.is_scalar()) return false;
  return true;
}

bool Type::has_structure() const {
  switch (node_->kind) {
    case Kind::List:
    case Kind::Tree:
      return true;
    case Kind::Tuple:
    case Kind::Variant:
      for (const auto& c : node_->comps)
        if (c.has_structure()) return true;
      return false;
    default:
      return false;
  }
}

int Type::compare(const Type& a, const Type& b) {
  if (a.node_ == b.node_) return 0;
  if (a.node_->kind != b.node_->kind) return a.node_->kind < b.node_->kind ? -1 : 1;
  const auto& x = a.node_->comps;
  const auto& y = b.node_->comps;
  if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
  for (size_t i = 0; i < x.size(); ++i) {
    int c = compare(x[i], y[i]);
    if (c != 0) return c;
  }
  return 0;
}

std::string Type::print() const {
  switch (node_->kind) {
    case Kind::Int: return "int";
    case Kind::Bool: return "bool";
    case Kind::Unit: return "unit";
    case Kind::List: return "(list " + elem().print() + ")";
    case Kind::Tree: return "(tree " + elem().print() + ")";
    case Kind::Tuple: {
      std::ostringstream out;
      out << "(tuple";
      for (const auto& c : node_->comps) out << ' ' << c.print();
      out << ')';
      return out.str();
    }
    case Kind::Variant: {
      std::ostringstream out;
      out << "(variant";
      for (const auto& c : node_->comps) out << ' ' << c.print();
      out << ')';
      return out.str();
    }
  }
  return "?";
}

Functor Functor::make(Kind k, std::vector<Functor> kids) {
  return Functor(std::make_shared<const Node>(Node{k, std::move(kids)}));
}

Functor Functor::identity() { return make(Kind::Identity); }
Functor Functor::const_unit() { return make(Kind::ConstUnit); }
Functor Functor::const_int() { return make(Kind::ConstInt); }
Functor Functor::product(Functor l, Functor r) { return make(Kind::Product, {std::move(l), std::move(r)}); }
Functor Functor::sum(Functor l, Functor r) { return make(Kind::Sum, {std::move(l), std::move(r)}); }

Type Functor::apply(const Type& t) const {
  switch (node_->kind) {
    case Kind::Identity: return t;
    case Kind::ConstUnit: return Type::unit();
    case Kind::ConstInt: return Type::integer();
    case Kind::Product: return Type::tuple({left().apply(t), right().apply(t)});
    case Kind::Sum: {
      std::vector<Type> alts;
      for (const auto& s : summands()) alts.push_back(s.apply(t));
      return Type::variant(std::move(alts));
    }
  }
  return Type::unit();
}

std::vector<Functor> Functor::summands() const {
  std::vector<Functor> out;
  std::function<void(const Functor&)> walk = [&](const Functor& f) {
    if (f.is(Kind::Sum)) {
      walk(f.left());
      walk(f.right());
    } else {
      out.push_back(f);
    }
  };
  walk(*this);
  return out;
}

int Functor::islot_count() const {
  switch (node_->kind) {
    case Kind::Identity: return 1;
    case Kind::ConstUnit:
    case Kind::ConstInt: return 0;
    case Kind::Product:
    case Kind::Sum: {
      int n = 0;
      for (const auto& k : node_->kids) n += k.islot_count();
      return n;
    }
  }
  return 0;
}

bool Functor::admits(const Value& v, const std::function<bool(const Value&)>& slot_ok) const {
  switch (node_->kind) {
    case Kind::Identity:
      return slot_ok(v);
    case Kind::ConstUnit:
      return v.is(Value::Kind::Unit);
    case Kind::ConstInt:
      return v.is(Value::Kind::Int);
    case Kind::Product:
      return v.is(Value::Kind::Tuple) && v.size() == 2 &&
             left().admits(v.elems()[0], slot_ok) && right().admits(v.elems()[1], slot_ok);
    case Kind::Sum: {
      if (!v.is(Value::Kind::Tagged)) return false;
      auto alts = summands();
      int64_t t = v.tag();
      if (t < 1 || t > static_cast<int64_t>(alts.size())) return false;
      return alts[static_cast<size_t>(t - 1)].admits(v.payload(), slot_ok);
    }
  }
  return false;
}

void Functor::collect_slots(const Value& v, std::vector<Value>& out) const {
  switch (node_->kind) {
    case Kind::Identity:
      out.push_back(v);
      return;
    case Kind::ConstUnit:
    case Kind::ConstInt:
      return;
    case Kind::Product:
      if (!v.is(Value::Kind::Tuple) || v.size() != 2)
        fail(Error::Kind::Eval, "value " + v.print() + " does not match product shape");
      left().collect_slots(v.elems()[0], out);
      right().collect_slots(v.elems()[1], out);
      return;
    case Kind::Sum: {
      if (!v.is(Value::Kind::Tagged))
        fail(Error::Kind::Eval, "value " + v.print() + " does not match sum shape");
      auto alts = summands();
      int64_t t = v.tag();
      if (t < 1 || t > static_cast<int64_t>(alts.size()))
        fail(Error::Kind::Eval, "tag " + std::to_string(t) + " out of range for sum shape");
      alts[static_cast<size_t>(t - 1)].collect_slots(v.payload(), out);
      return;
    }
  }
}

Value Functor::replace_slots(const Value& v, const std::vector<Value>& repl, size_t& idx) const {
  switch (node_->kind) {
    case Kind::Identity:
      return repl.at(idx++);
    case Kind::ConstUnit:
    case Kind::ConstInt:
      return v;
    case Kind::Product: {
      Value l = left().replace_slots(v.elems()[0], repl, idx);
      Value r = right().replace_slots(v.elems()[1], repl, idx);
      return Value::tuple({std::move(l), std::move(r)});
    }
    case Kind::Sum: {
      auto alts = summands();
      int64_t t = v.tag();
      Value p = alts[static_cast<size_t>(t - 1)].replace_slots(v.payload(), repl, idx);
      return Value::tagged(t, std::move(p));
    }
  }
  return v;
}

Value Functor::map_slots(const Value& v, const std::function<Value(const Value&)>& fn) const {
  switch (node_->kind) {
    case Kind::Identity:
      return fn(v);
    case Kind::ConstUnit:
    case Kind::ConstInt:
      return v;
    case Kind::Product: {
      if (!v.is(Value::Kind::Tuple) || v.size() != 2)
        fail(Error::Kind::Eval, "value " + v.print() + " does not match product shape");
      Value l = left().map_slots(v.elems()[0], fn);
      Value r = right().map_slots(v.elems()[1], fn);
      return Value::tuple({std::move(l), std::move(r)});
    }
    case Kind::Sum: {
      if (!v.is(Value::Kind::Tagged))
        fail(Error::Kind::Eval, "value " + v.print() + " does not match sum shape");
      auto alts = summands();
      int64_t t = v.tag();
      if (t < 1 || t > static_cast<int64_t>(alts.size()))
        fail(Error::Kind::Eval, "tag " + std::to_string(t) + " out of range for sum shape");
      Value p = alts[static_cast<size_t>(t - 1)].map_slots(v.payload(), fn);
      return Value::tagged(t, std::move(p));
    }
  }
  return v;
}

int Functor::compare(const Functor& a, const Functor& b) {
  if (a.node_ == b.node_) return 0;
  if (a.node_->kind != b.node_->kind) return a.node_->kind < b.node_->kind ? -1 : 1;
  const auto& x = a.node_->kids;
  const auto& y = b.node_->kids;
  if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
  for (size_t i = 0; i < x.size(); ++i) {
    int c = compare(x[i], y[i]);
    if (c != 0) return c;
  }
  return 0;
}

std::string Functor::print() const {
  switch (node_->kind) {
    case Kind::Identity: return "I";
    case Kind::ConstUnit: return "(c unit)";
    case Kind::ConstInt: return "(c int)";
    case Kind::Product:
    case Kind::Sum: {
      // Flattened along the right spine only, mirroring the parser's
      // right-nesting of n-ary forms, so print/parse is an exact round trip.
      Kind k = node_->kind;
      std::ostringstream out;
      out << (k == Kind::Product ? "(*" : "(+");
      const Functor* f = this;
      while (f->is(k)) {
        out << ' ' << f->left().print();
        f = &f->right();
      }
      out << ' ' << f->print() << ')';
      return out.str();
    }
  }
  return "?";
}

}  // namespace methyl
