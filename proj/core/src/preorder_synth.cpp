#include "methyl/preorder_synth.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <utility>

#include "methyl/rand.hpp"
#include "methyl/symbols.hpp"

namespace methyl {

namespace {

constexpr int kSamplesPerLim = 8;

bool expired(const std::chrono::steady_clock::time_point& deadline) {
  return deadline != std::chrono::steady_clock::time_point{} &&
         std::chrono::steady_clock::now() >= deadline;
}

// Key range over every value appearing in the examples; failed evaluations
// do not contribute. Used only to rank same-behavior comparisons.
int64_t key_range(const Comparison& c, const std::vector<ThinCounterexample>& es,
                  Interp& interp) {
  bool any = false;
  int64_t lo = 0, hi = 0;
  for (const ThinCounterexample& e : es)
    for (const auto& [a, b] : e.pairs)
      for (const Value* v : {&a, &b}) {
        Value k;
        if (!interp.call(c.key, *v, k) || !k.is(Value::Kind::Int)) continue;
        int64_t x = k.as_int();
        if (!any) {
          lo = hi = x;
          any = true;
        } else {
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
      }
  if (!any) return 0;
  uint64_t width = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo);
  int64_t cap = std::numeric_limits<int64_t>::max();
  return width >= static_cast<uint64_t>(cap) ? cap : static_cast<int64_t>(width);
}

}  // namespace

bool comparison_violated(const Comparison& c, const Value& a, const Value& b, Interp& interp) {
  Value ka, kb;
  if (!interp.call(c.key, a, ka) || !ka.is(Value::Kind::Int)) return false;
  if (!interp.call(c.key, b, kb) || !kb.is(Value::Kind::Int)) return false;
  return c.rel == Comparison::Rel::Le ? ka.as_int() < kb.as_int() : ka.as_int() != kb.as_int();
}

bool falsifies(const Comparison& c, const ThinCounterexample& e, Interp& interp) {
  for (const auto& [a, b] : e.pairs)
    if (comparison_violated(c, a, b, interp)) return true;
  return false;
}

std::vector<Comparison> comparison_pool(const Type& subject, const GrammarConfig& cfg,
                                        const std::vector<Comparison::Rel>& rels, int64_t limit,
                                        bool* exhausted) {
  int32_t p = Symbols::intern("p");
  GrammarConfig pool_cfg = cfg;
  // keys are a filtered slice of the term stream, so enumerate generously
  int64_t want_terms = std::min<int64_t>(limit * 4 + 1024, 2'000'000);
  pool_cfg.max_terms = static_cast<int>(std::max<int64_t>(pool_cfg.max_terms, want_terms));
  TermEnum en({{p, subject}}, {}, pool_cfg, Tier::Polynomial);

  std::vector<Comparison> pool;
  bool cut = false;
  for (const ExprPtr& body : en.of_type(Type::integer())) {
    if (!mentions(body, {p})) continue;
    ExprPtr key = Expr::lambda(p, body);
    for (Comparison::Rel rel : rels) {
      if (static_cast<int64_t>(pool.size()) >= limit) {
        cut = true;
        break;
      }
      pool.push_back({rel, key});
    }
    if (cut) break;
  }
  if (exhausted) *exhausted = !en.truncated() && !cut;
  return pool;
}

std::vector<Comparison> candidate_comps(const std::vector<Comparison>& pool, int lim,
                                        const std::vector<ThinCounterexample>& es,
                                        std::mt19937_64& rng) {
  if (pool.empty() || es.empty()) return {};
  Interp interp(nullptr);

  // Stage 1: prefilter on a fixed sample of the examples.
  size_t n_samples = static_cast<size_t>(lim) * kSamplesPerLim;
  std::vector<const ThinCounterexample*> sample(n_samples);
  for (auto& slot : sample) slot = &es[uniform_below(rng, es.size())];
  size_t k_t = lim == 1 ? n_samples : static_cast<size_t>(lim / 2);

  std::vector<size_t> survivors;
  for (size_t i = 0; i < pool.size(); ++i) {
    size_t hit = 0;
    for (const ThinCounterexample* e : sample)
      if (falsifies(pool[i], *e, interp)) ++hit;
    if (hit >= k_t) survivors.push_back(i);
  }

  // Stage 2: exact counts, then one representative per behavior.
  std::map<std::vector<bool>, std::pair<int64_t, size_t>> best;  // hits -> (range, idx)
  for (size_t i : survivors) {
    std::vector<bool> hits(es.size());
    size_t count = 0;
    for (size_t j = 0; j < es.size(); ++j) {
      hits[j] = falsifies(pool[i], es[j], interp);
      count += hits[j];
    }
    if (count * static_cast<size_t>(lim) < es.size()) continue;
    int64_t range = key_range(pool[i], es, interp);
    auto it = best.find(hits);
    if (it == best.end())
      best.emplace(std::move(hits), std::make_pair(range, i));
    else if (range < it->second.first)
      it->second = {range, i};
  }

  std::vector<size_t> kept;
  for (const auto& [hits, ri] : best) kept.push_back(ri.second);
  std::sort(kept.begin(), kept.end());
  std::vector<Comparison> out;
  out.reserve(kept.size());
  for (size_t i : kept) out.push_back(pool[i]);
  return out;
}

std::optional<KeywordPreorder> best_preorder(const PreorderSynthTask& task,
                                             const std::vector<Comparison>& pool, int n_c,
                                             std::mt19937_64& rng, bool* timed_out) {
  bool expired_flag = false;

  // The bound is lexicographic (cost, comparison count): both cost functions
  // are monotone under added comparisons and the count strictly grows, so
  // pruning is exact on cost while ties go to the smaller preorder. Without
  // the second component, a cheap-but-incorrect candidate explored first
  // can complete to an equal-cost solution that pre-empts a smaller one.
  using Bound = std::pair<int64_t, size_t>;

  std::function<std::optional<KeywordPreorder>(KeywordPreorder&, int, Bound)> search =
      [&](KeywordPreorder& r, int lim, Bound bound) -> std::optional<KeywordPreorder> {
    if (expired_flag || expired(task.deadline)) {
      expired_flag = true;
      return std::nullopt;
    }
    std::vector<ThinCounterexample> es = task.refresh(r);
    if (es.empty()) return r;
    if (lim == 0) return std::nullopt;

    std::vector<Comparison> cands = candidate_comps(pool, lim, es, rng);
    std::vector<std::pair<int64_t, size_t>> order;
    order.reserve(cands.size());
    for (size_t i = 0; i < cands.size(); ++i) {
      r.comps.push_back(cands[i]);
      order.emplace_back(task.cost(r), i);
      r.comps.pop_back();
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::optional<KeywordPreorder> res;
    for (const auto& [c_cost, i] : order) {
      if (expired_flag) break;
      // saturated cost marks keys partial on traced values: never viable
      if (c_cost == std::numeric_limits<int64_t>::max()) break;
      if (c_cost > bound.first) break;  // sorted: nothing cheaper follows
      if (Bound{c_cost, r.comps.size() + 1} >= bound) continue;
      r.comps.push_back(cands[i]);
      std::optional<KeywordPreorder> sub = search(r, lim - 1, bound);
      r.comps.pop_back();
      if (sub) {
        res = std::move(sub);
        bound = {task.cost(*res), res->comps.size()};
      }
    }
    return res;
  };

  KeywordPreorder seed;
  seed.comps = task.seed;
  Bound top{std::numeric_limits<int64_t>::max(), std::numeric_limits<size_t>::max()};
  std::optional<KeywordPreorder> out = search(seed, n_c, top);
  if (timed_out) *timed_out = expired_flag;
  return out;
}

SynthResult synthesize_preorder(const PreorderSynthTask& task, const Type& subject,
                                const GrammarConfig& cfg, uint64_t rng_seed) {
  SynthResult out;
  std::mt19937_64 rng(rng_seed);
  int n_c = 2;
  int64_t s_c = 100'000;
  while (true) {
    ++out.rounds;
    if (expired(task.deadline)) {
      out.timed_out = true;
      break;
    }
    bool exhausted = false;
    std::vector<Comparison> pool = comparison_pool(subject, cfg, task.rels, s_c, &exhausted);
    bool expired_run = false;
    std::optional<KeywordPreorder> r = best_preorder(task, pool, n_c, rng, &expired_run);
    if (r) {
      out.preorder = std::move(r);
      out.n_c = n_c;
      out.pool_size = static_cast<int64_t>(pool.size());
      break;
    }
    if (expired_run) {
      out.timed_out = true;
      break;
    }
    // a finished grammar cannot supply new candidates; deeper search is
    // pointless past the pool itself, and depth beyond 8 never pays off
    if (exhausted && (n_c > 8 || n_c >= static_cast<int>(pool.size()))) break;
    s_c *= 2;
    n_c += 1;
  }
  return out;
}

}  // namespace methyl
