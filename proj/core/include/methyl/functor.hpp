#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "methyl/types.hpp"
#include "methyl/value.hpp"

namespace methyl {

// Polynomial shape functor: Identity, constant Unit/Int, binary product and
// sum. Surface syntax allows n-ary sums/products; they parse right-nested.
// Tags of tagged values index the flattened sum spine, so a three-summand
// surface sum admits tags 1..3.
class Functor {
 public:
  enum class Kind : uint8_t { Identity, ConstUnit, ConstInt, Product, Sum };

  Functor() : Functor(identity()) {}

  static Functor identity();
  static Functor const_unit();
  static Functor const_int();
  static Functor product(Functor l, Functor r);
  static Functor sum(Functor l, Functor r);

  Kind kind() const { return node_->kind; }
  bool is(Kind k) const { return node_->kind == k; }
  const Functor& left() const { return node_->kids[0]; }
  const Functor& right() const { return node_->kids[1]; }

  // Object map: the type of an F-structure whose Identity slots hold T.
  Type apply(const Type& t) const;

  // Alternatives of the (possibly nested) sum spine, left to right. A
  // non-sum functor is its own single summand.
  std::vector<Functor> summands() const;

  // Number of Identity occurrences.
  int islot_count() const;

  // Does `v` structurally inhabit this functor shape, with `slot_ok`
  // validating the values sitting at Identity positions?
  bool admits(const Value& v, const std::function<bool(const Value&)>& slot_ok) const;

  // Values at Identity positions, in left-to-right walk order. Throws
  // Error(Eval) if `v` does not match the shape.
  void collect_slots(const Value& v, std::vector<Value>& out) const;

  // Rebuilds `v` with Identity-position values replaced by `repl[idx++]`.
  Value replace_slots(const Value& v, const std::vector<Value>& repl, size_t& idx) const;

  // Rebuilds `v` applying `fn` at every Identity position.
  Value map_slots(const Value& v, const std::function<Value(const Value&)>& fn) const;

  static int compare(const Functor& a, const Functor& b);
  bool operator==(const Functor& o) const { return compare(*this, o) == 0; }
  bool operator!=(const Functor& o) const { return compare(*this, o) != 0; }

  std::string print() const;

 private:
  struct Node {
    Kind kind;
    std::vector<Functor> kids;
  };
  explicit Functor(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Functor make(Kind k, std::vector<Functor> kids = {});

  std::shared_ptr<const Node> node_;
};

}  // namespace methyl
