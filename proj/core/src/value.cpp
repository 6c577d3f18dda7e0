#include "methyl/value.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace methyl {

namespace {

uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

uint64_t node_hash(const Value::Node& n) {
  uint64_t h = mix(0x243f6a8885a308d3ull, static_cast<uint64_t>(n.kind));
  h = mix(h, static_cast<uint64_t>(n.num));
  for (const auto& k : n.kids) h = mix(h, k.hash());
  return h;
}

}  // namespace

Value Value::make(Node n) {
  n.hash = node_hash(n);
  return Value(std::make_shared<const Node>(std::move(n)));
}

Value Value::unit() {
  static const Value v = make(Node{Kind::Unit});
  return v;
}

Value Value::boolean(bool b) {
  static const Value t = make(Node{Kind::Bool, 1});
  static const Value f = make(Node{Kind::Bool, 0});
  return b ? t : f;
}

Value Value::integer(int64_t v) {
  // Small integers are interned: evaluation churns through them constantly.
  static constexpr int64_t kLo = -1024, kHi = 4096;
  static const std::vector<Value> pool = [] {
    std::vector<Value> p;
    p.reserve(static_cast<size_t>(kHi - kLo + 1));
    for (int64_t i = kLo; i <= kHi; ++i) p.push_back(make(Node{Kind::Int, i}));
    return p;
  }();
  if (v >= kLo && v <= kHi) return pool[static_cast<size_t>(v - kLo)];
  return make(Node{Kind::Int, v});
}

Value Value::list(std::vector<Value> elems) {
  return make(Node{Kind::List, 0, std::move(elems)});
}

Value Value::tuple(std::vector<Value> elems) {
  return make(Node{Kind::Tuple, 0, std::move(elems)});
}

Value Value::tagged(int64_t tag, Value payload) {
  return make(Node{Kind::Tagged, tag, {std::move(payload)}});
}

Value Value::tree_leaf(Value v) {
  return make(Node{Kind::Tree, 0, {std::move(v)}});
}

Value Value::tree_node(Value v, Value left, Value right) {
  return make(Node{Kind::Tree, 0, {std::move(v), std::move(left), std::move(right)}});
}

void canonicalize_set(std::vector<Value>& elems) {
  std::sort(elems.begin(), elems.end(),
            [](const Value& a, const Value& b) { return Value::compare(a, b) < 0; });
  elems.erase(std::unique(elems.begin(), elems.end(),
                          [](const Value& a, const Value& b) { return Value::compare(a, b) == 0; }),
              elems.end());
}

Value Value::set(std::vector<Value> elems) {
  canonicalize_set(elems);
  return make(Node{Kind::Set, 0, std::move(elems)});
}

Value Value::set_presorted(std::vector<Value> elems) {
  return make(Node{Kind::Set, 0, std::move(elems)});
}

int Value::compare(const Value& a, const Value& b) {
  if (a.node_ == b.node_) return 0;
  const Node& x = *a.node_;
  const Node& y = *b.node_;
  if (x.kind != y.kind) return x.kind < y.kind ? -1 : 1;
  if (x.num != y.num) return x.num < y.num ? -1 : 1;
  if (x.kids.size() != y.kids.size()) return x.kids.size() < y.kids.size() ? -1 : 1;
  for (size_t i = 0; i < x.kids.size(); ++i) {
    int c = compare(x.kids[i], y.kids[i]);
    if (c != 0) return c;
  }
  return 0;
}

namespace {

void print_rec(const Value& v, std::ostringstream& out) {
  switch (v.kind()) {
    case Value::Kind::Unit:
      out << "unit";
      return;
    case Value::Kind::Bool:
      out << (v.as_bool() ? "true" : "false");
      return;
    case Value::Kind::Int:
      if (v.as_int() == kNegInf) {
        out << "neg_inf";
      } else {
        out << v.as_int();
      }
      return;
    case Value::Kind::List:
    case Value::Kind::Tuple:
    case Value::Kind::Set: {
      out << '(' << (v.kind() == Value::Kind::List ? "list" : v.kind() == Value::Kind::Tuple ? "tuple" : "set");
      for (const auto& e : v.elems()) {
        out << ' ';
        print_rec(e, out);
      }
      out << ')';
      return;
    }
    case Value::Kind::Tagged:
      out << "(tag " << v.tag() << ' ';
      print_rec(v.payload(), out);
      out << ')';
      return;
    case Value::Kind::Tree:
      if (v.tree_is_leaf()) {
        out << "(leaf ";
        print_rec(v.tree_value(), out);
        out << ')';
      } else {
        out << "(node ";
        print_rec(v.tree_value(), out);
        out << ' ';
        print_rec(v.tree_left(), out);
        out << ' ';
        print_rec(v.tree_right(), out);
        out << ')';
      }
      return;
  }
}

}  // namespace

std::string Value::print() const {
  std::ostringstream out;
  print_rec(*this, out);
  return out.str();
}

}  // namespace methyl
