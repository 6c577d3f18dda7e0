#pragma once

#include <memory>
#include <string>
#include <vector>

namespace methyl {

// Structural value types. Variant only arises internally (shape of data built
// along a sum functor); source programs declare the other forms.
class Type {
 public:
  enum class Kind : uint8_t { Int, Bool, Unit, List, Tree, Tuple, Variant };

  Type() : Type(unit()) {}

  static Type integer();
  static Type boolean();
  static Type unit();
  static Type list(Type elem);
  static Type tree(Type elem);
  static Type tuple(std::vector<Type> comps);
  static Type variant(std::vector<Type> alts);

  Kind kind() const { return node_->kind; }
  bool is(Kind k) const { return node_->kind == k; }
  const Type& elem() const { return node_->comps[0]; }
  const std::vector<Type>& comps() const { return node_->comps; }

  bool is_scalar() const {
    return node_->kind == Kind::Int || node_->kind == Kind::Bool || node_->kind == Kind::Unit;
  }
  // Scalar or flat tuple of scalars: the shapes a query site may produce.
  bool is_scalar_tuple() const;
  // Contains a List or Tree anywhere: drives the step gating.
  bool has_structure() const;

  static int compare(const Type& a, const Type& b);
  bool operator==(const Type& o) const { return compare(*this, o) == 0; }
  bool operator!=(const Type& o) const { return compare(*this, o) != 0; }
  bool operator<(const Type& o) const { return compare(*this, o) < 0; }

  std::string print() const;

 private:
  struct Node {
    Kind kind;
    std::vector<Type> comps;
  };
  explicit Type(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Type make(Kind k, std::vector<Type> comps = {});

  std::shared_ptr<const Node> node_;
};

}  // namespace methyl
