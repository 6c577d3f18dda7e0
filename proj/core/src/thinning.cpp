#include "methyl/thinning.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "methyl/error.hpp"

namespace methyl {

namespace {

constexpr int64_t kGridCap = 10'000'000;
constexpr int64_t kSaturated = std::numeric_limits<int64_t>::max();

int64_t sat_mul(int64_t a, int64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > kSaturated / b) return kSaturated;
  return a * b;
}

struct Dim {
  int64_t lo = 0;
  int64_t range = 1;  // number of distinct grid coordinates
  bool le = false;
  int col = 0;
};

std::vector<Dim> measure(const std::vector<Comparison::Rel>& rels,
                         const std::vector<std::vector<int64_t>>& cols, size_t n) {
  std::vector<Dim> dims;
  for (size_t i = 0; i < cols.size(); ++i) {
    Dim d;
    d.col = static_cast<int>(i);
    d.le = rels[i] == Comparison::Rel::Le;
    d.lo = 0;
    d.range = 1;
    if (n > 0) {
      int64_t lo = cols[i][0], hi = cols[i][0];
      for (size_t j = 1; j < n; ++j) {
        lo = std::min(lo, cols[i][j]);
        hi = std::max(hi, cols[i][j]);
      }
      d.lo = lo;
      // hi - lo may overflow for extreme keys; saturate the width
      uint64_t width = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo);
      d.range = width >= static_cast<uint64_t>(kSaturated) ? kSaturated
                                                           : static_cast<int64_t>(width) + 1;
    }
    dims.push_back(d);
  }
  return dims;
}

// Index of the widest `le` dimension, or -1 if none.
int widest_le(const std::vector<Dim>& dims) {
  int best = -1;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (!dims[i].le) continue;
    if (best < 0 || dims[i].range > dims[static_cast<size_t>(best)].range)
      best = static_cast<int>(i);
  }
  return best;
}

bool covers(const std::vector<Comparison::Rel>& rels,
            const std::vector<std::vector<int64_t>>& cols, size_t a, size_t b) {
  for (size_t i = 0; i < cols.size(); ++i) {
    if (rels[i] == Comparison::Rel::Le) {
      if (cols[i][a] < cols[i][b]) return false;
    } else {
      if (cols[i][a] != cols[i][b]) return false;
    }
  }
  return true;
}

std::vector<int32_t> thin_pairwise(const std::vector<Comparison::Rel>& rels,
                                   const std::vector<std::vector<int64_t>>& cols, size_t n) {
  std::vector<int32_t> kept;
  for (size_t j = 0; j < n; ++j) {
    bool dominated = false;
    for (int32_t k : kept) {
      if (covers(rels, cols, static_cast<size_t>(k), j)) {
        dominated = true;
        break;
      }
    }
    if (dominated) continue;
    std::vector<int32_t> next;
    next.reserve(kept.size() + 1);
    for (int32_t k : kept)
      if (!covers(rels, cols, j, static_cast<size_t>(k))) next.push_back(k);
    next.push_back(static_cast<int32_t>(j));
    kept = std::move(next);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

int64_t grid_bound(const std::vector<Comparison::Rel>& rels,
                   const std::vector<std::vector<int64_t>>& cols) {
  size_t n = cols.empty() ? 0 : cols[0].size();
  std::vector<Dim> dims = measure(rels, cols, n);
  int skip = widest_le(dims);
  int64_t prod = 1;
  for (size_t i = 0; i < dims.size(); ++i)
    if (static_cast<int>(i) != skip) prod = sat_mul(prod, dims[i].range);
  return prod;
}

std::vector<int32_t> thin_columns(const std::vector<Comparison::Rel>& rels,
                                  const std::vector<std::vector<int64_t>>& cols, size_t n,
                                  bool* used_fallback) {
  if (used_fallback) *used_fallback = false;
  if (n == 0) return {};
  // Everything covers everything under the empty conjunction.
  if (cols.empty()) return {0};

  std::vector<Dim> dims = measure(rels, cols, n);
  int star = widest_le(dims);

  if (star < 0) {
    // Equality keys only: keep the first element of each key class.
    std::map<std::vector<int64_t>, int32_t> first;
    std::vector<int64_t> key(cols.size());
    for (size_t j = 0; j < n; ++j) {
      for (size_t i = 0; i < cols.size(); ++i) key[i] = cols[i][j];
      first.emplace(key, static_cast<int32_t>(j));
    }
    std::vector<int32_t> out;
    out.reserve(first.size());
    for (const auto& [k, j] : first) out.push_back(j);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<Dim> grid;  // every dimension except the ranked one
  for (size_t i = 0; i < dims.size(); ++i)
    if (static_cast<int>(i) != star) grid.push_back(dims[i]);

  int64_t cells = 1;
  for (const Dim& d : grid) cells = sat_mul(cells, d.range);
  if (cells > kGridCap) {
    if (used_fallback) *used_fallback = true;
    return thin_pairwise(rels, cols, n);
  }

  std::vector<int64_t> stride(grid.size());
  int64_t acc = 1;
  for (size_t i = 0; i < grid.size(); ++i) {
    stride[i] = acc;
    acc *= grid[i].range;
  }
  auto cell_of = [&](size_t j) {
    int64_t c = 0;
    for (size_t i = 0; i < grid.size(); ++i)
      c += (cols[static_cast<size_t>(grid[i].col)][j] - grid[i].lo) * stride[i];
    return c;
  };

  // Per cell: the best ranked key and which element holds it.
  const int64_t kEmpty = std::numeric_limits<int64_t>::min();
  std::vector<int64_t> best_key(static_cast<size_t>(cells), kEmpty);
  std::vector<int32_t> best_idx(static_cast<size_t>(cells), -1);
  const std::vector<int64_t>& ranked = cols[static_cast<size_t>(dims[static_cast<size_t>(star)].col)];

  for (size_t j = 0; j < n; ++j) {
    size_t c = static_cast<size_t>(cell_of(j));
    if (best_idx[c] < 0 || ranked[j] > best_key[c]) {
      best_key[c] = ranked[j];
      best_idx[c] = static_cast<int32_t>(j);
    }
  }

  // Propagate along each `le` dimension from high coordinates to low: after
  // all sweeps a cell holds the best entry of its upper orthant. On key ties
  // the entry arriving from the higher coordinate wins: it covers the local
  // one. Within a cell the earliest element was kept, making survivors
  // unique representatives of mutually covering groups.
  for (size_t d = 0; d < grid.size(); ++d) {
    if (!grid[d].le) continue;
    int64_t r = grid[d].range;
    if (r <= 1) continue;
    for (int64_t c = cells - 1; c >= 0; --c) {
      int64_t coord = (c / stride[d]) % r;
      if (coord + 1 >= r) continue;
      size_t from = static_cast<size_t>(c + stride[d]);
      size_t to = static_cast<size_t>(c);
      if (best_idx[from] >= 0 && (best_idx[to] < 0 || best_key[from] >= best_key[to])) {
        best_key[to] = best_key[from];
        best_idx[to] = best_idx[from];
      }
    }
  }

  std::vector<int32_t> out;
  for (size_t j = 0; j < n; ++j)
    if (best_idx[static_cast<size_t>(cell_of(j))] == static_cast<int32_t>(j))
      out.push_back(static_cast<int32_t>(j));
  return out;
}

std::vector<Value> thin_set(const KeywordPreorder& r, const std::vector<Value>& sols,
                            Interp& interp, bool* used_fallback) {
  if (used_fallback) *used_fallback = false;
  if (sols.size() <= 1) return sols;
  std::vector<Comparison::Rel> rels;
  std::vector<std::vector<int64_t>> cols;
  for (const Comparison& c : r.comps) {
    rels.push_back(c.rel);
    std::vector<int64_t> col(sols.size());
    for (size_t j = 0; j < sols.size(); ++j) {
      Value k;
      if (!interp.call(c.key, sols[j], k) || !k.is(Value::Kind::Int))
        fail(Error::Kind::Eval, "pruning key failed: " + interp.why());
      col[j] = k.as_int();
    }
    cols.push_back(std::move(col));
  }
  std::vector<int32_t> idx = thin_columns(rels, cols, sols.size(), used_fallback);
  std::vector<Value> out;
  out.reserve(idx.size());
  for (int32_t j : idx) out.push_back(sols[static_cast<size_t>(j)]);
  return out;
}

bool preorder_holds(const KeywordPreorder& r, const Value& a, const Value& b, Interp& interp) {
  for (const Comparison& c : r.comps) {
    Value ka, kb;
    if (!interp.call(c.key, a, ka) || !ka.is(Value::Kind::Int) || !interp.call(c.key, b, kb) ||
        !kb.is(Value::Kind::Int))
      fail(Error::Kind::Eval, "preorder key failed: " + interp.why());
    if (c.rel == Comparison::Rel::Le ? ka.as_int() < kb.as_int() : ka.as_int() != kb.as_int())
      return false;
  }
  return true;
}

bool preorder_covers_soft(const KeywordPreorder& r, const Value& a, const Value& b,
                          Interp& interp) {
  for (const Comparison& c : r.comps) {
    Value ka, kb;
    if (!interp.call(c.key, a, ka) || !ka.is(Value::Kind::Int)) return false;
    if (!interp.call(c.key, b, kb) || !kb.is(Value::Kind::Int)) return false;
    if (c.rel == Comparison::Rel::Le ? ka.as_int() < kb.as_int() : ka.as_int() != kb.as_int())
      return false;
  }
  return true;
}

int64_t n_r_bound(const std::vector<Comparison::Rel>& rels,
                  const std::vector<std::vector<int64_t>>& cols) {
  size_t n = cols.empty() ? 0 : cols[0].size();
  if (n == 0) return 1;
  // Clamped ranges keep constant keys from zeroing the product.
  std::vector<int64_t> ranges(cols.size(), 1);
  for (size_t i = 0; i < cols.size(); ++i) {
    int64_t lo = cols[i][0], hi = cols[i][0];
    for (size_t j = 1; j < n; ++j) {
      lo = std::min(lo, cols[i][j]);
      hi = std::max(hi, cols[i][j]);
    }
    uint64_t width = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo);
    ranges[i] = width >= static_cast<uint64_t>(kSaturated) ? kSaturated
                : std::max<int64_t>(static_cast<int64_t>(width), 1);
  }
  int skip = -1;  // widest le range divides the product: omit its factor
  for (size_t i = 0; i < rels.size(); ++i)
    if (rels[i] == Comparison::Rel::Le && (skip < 0 || ranges[i] > ranges[static_cast<size_t>(skip)]))
      skip = static_cast<int>(i);
  int64_t prod = 1;
  for (size_t i = 0; i < ranges.size(); ++i)
    if (static_cast<int>(i) != skip) prod = sat_mul(prod, ranges[i]);
  return prod;
}

int64_t n_r_bound(const KeywordPreorder& r, const std::vector<Value>& sols, Interp& interp) {
  if (sols.empty()) return 1;
  std::vector<Comparison::Rel> rels;
  std::vector<std::vector<int64_t>> cols;
  for (const Comparison& c : r.comps) {
    rels.push_back(c.rel);
    std::vector<int64_t> col(sols.size());
    for (size_t j = 0; j < sols.size(); ++j) {
      Value k;
      if (!interp.call(c.key, sols[j], k) || !k.is(Value::Kind::Int))
        fail(Error::Kind::Eval, "preorder key failed: " + interp.why());
      col[j] = k.as_int();
    }
    cols.push_back(std::move(col));
  }
  return n_r_bound(rels, cols);
}

Value ThinCounterexample::canonical() const {
  std::vector<Value> rows;
  rows.reserve(pairs.size());
  for (const auto& [a, b] : pairs) rows.push_back(Value::tuple({a, b}));
  return Value::list(std::move(rows));
}

namespace {

// Per-comparison keys of traced values, evaluated lazily and memoized by
// value id; absent = key partial on that value.
class KeyCache {
 public:
  KeyCache(const KeywordPreorder& r, const Instance& inst, const std::vector<Value>& vals)
      : r_(r), interp_(&inst), vals_(vals), memo_(r.comps.size()) {}

  const std::optional<int64_t>& key(size_t comp, int32_t id) {
    auto& m = memo_[comp];
    auto it = m.find(id);
    if (it != m.end()) return it->second;
    Value out;
    std::optional<int64_t> k;
    if (interp_.call(r_.comps[comp].key, vals_[static_cast<size_t>(id)], out) &&
        out.is(Value::Kind::Int))
      k = out.as_int();
    return m.emplace(id, k).first->second;
  }

  bool covers(int32_t a, int32_t b) {
    for (size_t i = 0; i < r_.comps.size(); ++i) {
      const auto& ka = key(i, a);
      const auto& kb = key(i, b);
      if (!ka || !kb) return false;
      if (r_.comps[i].rel == Comparison::Rel::Le ? *ka < *kb : *ka != *kb) return false;
    }
    return true;
  }

 private:
  const KeywordPreorder& r_;
  Interp interp_;
  const std::vector<Value>& vals_;
  std::vector<std::unordered_map<int32_t, std::optional<int64_t>>> memo_;
};

}  // namespace

int64_t preorder_cost(const KeywordPreorder& r, const std::vector<TracedRun>& runs) {
  if (r.comps.empty()) return 1;
  size_t m = r.comps.size();
  std::vector<int64_t> lo(m), hi(m);
  bool any = false;
  for (const TracedRun& run : runs) {
    KeyCache kc(r, *run.instance, run.bundle->vals);
    std::unordered_map<int32_t, bool> visited;
    for (const auto& [state, sols] : run.bundle->per_state) {
      for (int32_t id : sols) {
        if (!visited.emplace(id, true).second) continue;
        for (size_t i = 0; i < m; ++i) {
          const auto& k = kc.key(i, id);
          if (!k) return kSaturated;  // partial key: rank last
          if (!any) {
            lo[i] = hi[i] = *k;
          } else {
            lo[i] = std::min(lo[i], *k);
            hi[i] = std::max(hi[i], *k);
          }
        }
        any = true;
      }
    }
  }
  if (!any) return 1;
  std::vector<int64_t> ranges(m, 1);
  for (size_t i = 0; i < m; ++i) {
    uint64_t width = static_cast<uint64_t>(hi[i]) - static_cast<uint64_t>(lo[i]);
    ranges[i] = width >= static_cast<uint64_t>(kSaturated) ? kSaturated
                : std::max<int64_t>(static_cast<int64_t>(width), 1);
  }
  int skip = -1;
  for (size_t i = 0; i < m; ++i)
    if (r.comps[i].rel == Comparison::Rel::Le &&
        (skip < 0 || ranges[i] > ranges[static_cast<size_t>(skip)]))
      skip = static_cast<int>(i);
  int64_t prod = 1;
  for (size_t i = 0; i < m; ++i)
    if (static_cast<int>(i) != skip) prod = sat_mul(prod, ranges[i]);
  return prod;
}

std::vector<ThinCounterexample> extract_thin_counterexamples(const TraceBundle& bundle,
                                                             const Instance& inst,
                                                             const KeywordPreorder& r) {
  KeyCache kc(r, inst, bundle.vals);
  std::set<Value> seen;
  std::vector<ThinCounterexample> out;
  for (const auto& [gk, rows] : bundle.groups) {
    size_t arity = gk.sigma.size();
    for (const auto& covering : rows) {
      for (const auto& covered : rows) {
        bool premise = true;
        for (size_t j = 0; premise && j < arity; ++j)
          premise = kc.covers(covering.chosen[j], covered.chosen[j]);
        if (!premise) continue;
        bool violated = false;
        for (int32_t b : covered.outputs) {
          bool dominated = false;
          for (int32_t a : covering.outputs)
            if (kc.covers(a, b)) {
              dominated = true;
              break;
            }
          if (!dominated) {
            violated = true;
            break;
          }
        }
        if (!violated) continue;
        ThinCounterexample ce;
        ce.pairs.reserve(arity);
        for (size_t j = 0; j < arity; ++j)
          ce.pairs.emplace_back(bundle.vals[static_cast<size_t>(covering.chosen[j])],
                                bundle.vals[static_cast<size_t>(covered.chosen[j])]);
        if (seen.insert(ce.canonical()).second) out.push_back(std::move(ce));
      }
    }
  }
  return out;
}

}  // namespace methyl
