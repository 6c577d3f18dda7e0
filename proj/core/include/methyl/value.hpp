#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace methyl {

// Sentinel used by scorers to rank invalid solutions below every real score.
// Reserved: ordinary arithmetic may not produce values at or below it.
inline constexpr int64_t kNegInf = -(int64_t(1) << 62);

// Immutable structured runtime value. Cheap to copy (shared handle), with a
// cached structural hash and a total canonical order. Sets are kept sorted
// and deduplicated so equal sets are structurally equal.
class Value {
 public:
  enum class Kind : uint8_t { Unit, Bool, Int, List, Tuple, Tagged, Tree, Set };

  struct Node {
    Kind kind;
    int64_t num = 0;            // Int payload, Bool 0/1, Tagged tag
    std::vector<Value> kids;    // List/Tuple/Set elements; Tagged [payload];
                                // Tree [value] (leaf) or [value,left,right]
    uint64_t hash = 0;
  };

  Value() : node_(unit().node_) {}

  static Value unit();
  static Value boolean(bool b);
  static Value integer(int64_t v);
  static Value list(std::vector<Value> elems);
  static Value tuple(std::vector<Value> elems);
  static Value tagged(int64_t tag, Value payload);
  static Value tree_leaf(Value v);
  static Value tree_node(Value v, Value left, Value right);
  // Sorts and deduplicates; the canonical form of a finite set.
  static Value set(std::vector<Value> elems);
  // Trusts the caller that `elems` is already sorted and unique.
  static Value set_presorted(std::vector<Value> elems);

  Kind kind() const { return node_->kind; }
  bool is(Kind k) const { return node_->kind == k; }
  bool as_bool() const { return node_->num != 0; }
  int64_t as_int() const { return node_->num; }
  int64_t tag() const { return node_->num; }
  const Value& payload() const { return node_->kids[0]; }
  const std::vector<Value>& elems() const { return node_->kids; }
  size_t size() const { return node_->kids.size(); }

  bool tree_is_leaf() const { return node_->kids.size() == 1; }
  const Value& tree_value() const { return node_->kids[0]; }
  const Value& tree_left() const { return node_->kids[1]; }
  const Value& tree_right() const { return node_->kids[2]; }

  uint64_t hash() const { return node_->hash; }

  // Total order: kind rank first, then contents. Returns <0, 0, >0.
  static int compare(const Value& a, const Value& b);
  bool operator==(const Value& o) const { return compare(*this, o) == 0; }
  bool operator!=(const Value& o) const { return compare(*this, o) != 0; }
  bool operator<(const Value& o) const { return compare(*this, o) < 0; }

  std::string print() const;

 private:
  explicit Value(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Value make(Node n);

  std::shared_ptr<const Node> node_;
};

struct ValueHash {
  size_t operator()(const Value& v) const { return static_cast<size_t>(v.hash()); }
};

// Sorts, deduplicates in place.
void canonicalize_set(std::vector<Value>& elems);

}  // namespace methyl
