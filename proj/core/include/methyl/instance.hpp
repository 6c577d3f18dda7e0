#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "methyl/eval.hpp"
#include "methyl/program.hpp"

namespace methyl {

// One uniform draw from a constant's declared space: integers uniform over
// the declared range; lists draw a length uniform in [0, size bound] and then
// their elements; trees draw a leaf count uniform in [1, (bound+1)/2] and a
// shape, with every node value drawn from the range.
Value sample_value(const Type& t, const SpaceDecl& d, std::mt19937_64& rng);

Instance sample_instance(const std::vector<SpaceDecl>& space, std::mt19937_64& rng);

// Deterministic batch: the same space, count, and seed give the same list.
std::vector<Instance> sample_instances(const std::vector<SpaceDecl>& space, int count,
                                       uint64_t seed);

// Benchmark-ladder draw: declarations with scaling hints are pinned instead
// of sampled — structure length becomes n * scale_size, integer value
// n * scale — while everything else samples as usual.
Instance scaled_instance(const std::vector<SpaceDecl>& space, int n, std::mt19937_64& rng);

// Worst-case draw for budget probing: structure sizes sit at their declared
// bound instead of being sampled.
Instance pinned_instance(const std::vector<SpaceDecl>& space, std::mt19937_64& rng);

// Shrinks a sampling space until the program finishes within the budget on a
// fresh worst-case draw: each failing round halves every structure bound and
// integer range width (floor 1), then re-tests. Gives up when the space is
// minimal and the run still does not fit.
struct SqueezeResult {
  std::vector<SpaceDecl> space;
  bool ok = false;
  int rounds = 0;  // halvings applied
  std::string why;
};
SqueezeResult squeeze_space(const HyloProgram& prog, std::chrono::milliseconds budget,
                            uint64_t seed, EngineConfig engine = {});

}  // namespace methyl
