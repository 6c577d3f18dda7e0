#include "methyl/instance.hpp"

#include <algorithm>
#include <functional>
#include <utility>

#include "methyl/error.hpp"
#include "methyl/rand.hpp"

namespace methyl {

namespace {

// Pinning policy for a draw: lists take an exact length, trees an exact leaf
// count, standalone integers an exact value. -1 = sample uniformly.
struct Pin {
  int64_t structure = -1;
  int64_t scalar_int = -1;
};

Value draw(const Type& t, const SpaceDecl& d, std::mt19937_64& rng, const Pin& pin,
           bool top_level) {
  switch (t.kind()) {
    case Type::Kind::Int:
      if (top_level && pin.scalar_int >= 0) return Value::integer(pin.scalar_int);
      return Value::integer(uniform_range(rng, d.int_lo, d.int_hi));
    case Type::Kind::Bool:
      return Value::boolean(uniform_below(rng, 2) != 0);
    case Type::Kind::Unit:
      return Value::unit();
    case Type::Kind::Tuple: {
      std::vector<Value> comps;
      comps.reserve(t.comps().size());
      for (const Type& c : t.comps()) comps.push_back(draw(c, d, rng, pin, false));
      return Value::tuple(std::move(comps));
    }
    case Type::Kind::List: {
      int64_t len = top_level && pin.structure >= 0
                        ? pin.structure
                        : static_cast<int64_t>(
                              uniform_below(rng, static_cast<uint64_t>(d.size_bound) + 1));
      std::vector<Value> elems;
      elems.reserve(static_cast<size_t>(len));
      for (int64_t i = 0; i < len; ++i) elems.push_back(draw(t.elem(), d, rng, pin, false));
      return Value::list(std::move(elems));
    }
    case Type::Kind::Tree: {
      // A tree with L leaves holds 2L-1 nodes, so the size bound caps L at
      // (bound+1)/2; every draw has at least the root.
      auto leaves_for = [](int64_t bound) { return std::max<int64_t>(1, (bound + 1) / 2); };
      int64_t leaves = top_level && pin.structure >= 0
                           ? leaves_for(pin.structure)
                           : 1 + static_cast<int64_t>(uniform_below(
                                     rng, static_cast<uint64_t>(leaves_for(d.size_bound))));
      // Build a uniform-split shape with exactly `leaves` leaves.
      std::function<Value(int64_t)> build = [&](int64_t n) -> Value {
        Value v = draw(t.elem(), d, rng, pin, false);
        if (n == 1) return Value::tree_leaf(v);
        int64_t left =
            1 + static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(n - 1)));
        Value l = build(left);
        Value r = build(n - left);
        return Value::tree_node(v, std::move(l), std::move(r));
      };
      return build(leaves);
    }
    default:
      fail(Error::Kind::Config, "cannot sample a value of type " + t.print());
  }
}

Instance draw_instance(const std::vector<SpaceDecl>& space, std::mt19937_64& rng,
                       const std::function<Pin(const SpaceDecl&)>& pin_of) {
  Instance inst;
  inst.bindings.reserve(space.size());
  for (const SpaceDecl& d : space)
    inst.bindings.emplace_back(d.name, draw(d.type, d, rng, pin_of(d), true));
  return inst;
}

}  // namespace

Value sample_value(const Type& t, const SpaceDecl& d, std::mt19937_64& rng) {
  return draw(t, d, rng, Pin{}, true);
}

Instance sample_instance(const std::vector<SpaceDecl>& space, std::mt19937_64& rng) {
  return draw_instance(space, rng, [](const SpaceDecl&) { return Pin{}; });
}

std::vector<Instance> sample_instances(const std::vector<SpaceDecl>& space, int count,
                                       uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Instance> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(sample_instance(space, rng));
  return out;
}

Instance scaled_instance(const std::vector<SpaceDecl>& space, int n, std::mt19937_64& rng) {
  return draw_instance(space, rng, [n](const SpaceDecl& d) {
    Pin pin;
    if (d.scale_size > 0) pin.structure = static_cast<int64_t>(n) * d.scale_size;
    if (d.scale > 0) pin.scalar_int = static_cast<int64_t>(n) * d.scale;
    return pin;
  });
}

Instance pinned_instance(const std::vector<SpaceDecl>& space, std::mt19937_64& rng) {
  return draw_instance(space, rng, [](const SpaceDecl& d) {
    Pin pin;
    pin.structure = d.size_bound;
    if (d.type.is(Type::Kind::Int)) pin.scalar_int = d.int_hi;
    return pin;
  });
}

SqueezeResult squeeze_space(const HyloProgram& prog, std::chrono::milliseconds budget,
                            uint64_t seed, EngineConfig engine) {
  if (budget.count() <= 0) fail(Error::Kind::Config, "squeeze budget must be positive");
  SqueezeResult res;
  res.space = prog.constants;
  std::mt19937_64 rng(seed ^ 0x5eedb06e5eedb06eULL);
  HyloProgram probe = prog;
  for (;;) {
    probe.constants = res.space;
    Instance inst = pinned_instance(res.space, rng);
    EngineConfig cfg = engine;
    cfg.deadline = std::chrono::steady_clock::now() + budget;
    std::string why;
    bool fits = false;
    try {
      run_program(probe, inst, cfg);
      fits = true;
    } catch (const Error& e) {
      if (e.kind != Error::Kind::Limit && e.kind != Error::Kind::Eval) throw;
      why = e.what();
    }
    if (fits) {
      res.ok = true;
      return res;
    }
    bool changed = false;
    for (SpaceDecl& d : res.space) {
      if (d.size_bound > 1) {
        d.size_bound = std::max(1, d.size_bound / 2);
        changed = true;
      }
      int64_t width = d.int_hi - d.int_lo;
      if (width >= 2) {
        d.int_hi = d.int_lo + width / 2;
        changed = true;
      }
    }
    if (!changed) {
      res.why = "space is minimal and the program still exceeds the budget: " + why;
      return res;
    }
    ++res.rounds;
  }
}

}  // namespace methyl
