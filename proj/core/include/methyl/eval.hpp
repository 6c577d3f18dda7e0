#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "methyl/program.hpp"

namespace methyl {

// Local bindings. Lookup walks back to front so inner binders shadow outer.
class Env {
 public:
  size_t mark() const { return slots_.size(); }
  void rewind(size_t m) { slots_.resize(m); }
  void push(int32_t sym, Value v) { slots_.emplace_back(sym, std::move(v)); }
  const Value* find(int32_t sym) const {
    for (auto it = slots_.rbegin(); it != slots_.rend(); ++it)
      if (it->first == sym) return &it->second;
    return nullptr;
  }

 private:
  std::vector<std::pair<int32_t, Value>> slots_;
};

// Fired when evaluation passes through an instrumentation marker: site id,
// values of the recorded temporaries (in marker order), and the result.
using ProbeHook =
    std::function<void(int32_t site, const std::vector<Value>& inputs, const Value& output)>;

// Expression/statement interpreter with soft failure. Failures that express
// partiality (empty head, out-of-range access, missing match, arithmetic
// overflow, dynamic type mismatch) make eval/exec return false and set why();
// they are data, not exceptions, because synthesis probes millions of
// candidate terms that may be partial. Fuel exhaustion throws Error(Limit).
class Interp {
 public:
  explicit Interp(const Instance* inst);

  bool eval(const ExprPtr& e, Env& env, Value& out);
  bool exec(const StmtPtr& s, Env& env, std::vector<Value>& out);
  // Convenience: call a unary lambda.
  bool call(const ExprPtr& lambda, const Value& arg, Value& out);

  const std::string& why() const { return why_; }

  ProbeHook probe;
  uint64_t fuel_used = 0;
  uint64_t max_fuel = 0;  // 0 = unlimited

 private:
  bool miss(const std::string& m) {
    why_ = m;
    return false;
  }
  bool apply_op(const Expr& e, Env& env, Value& out);

  const Instance* inst_;
  std::string why_;
};

// Collected observations of one program run, for the synthesis passes.
struct TraceBundle {
  std::vector<Value> vals;  // id -> value
  std::unordered_map<Value, int32_t, ValueHash> ids;
  int32_t intern(const Value& v);

  // One expansion assignment: the sub-solution chosen per slot, and the
  // solutions the combiner produced from that choice (possibly none).
  struct Derivation {
    std::vector<int32_t> chosen;
    std::vector<int32_t> outputs;
  };
  // Assignments are grouped by (state, seed): rows are comparable during
  // pruning-preorder inference only when the shaped seed (tag and constant
  // parts, plus the substates that fill the slots) is identical.
  struct GroupKey {
    int32_t state;
    int32_t seed;
    std::vector<int32_t> sigma;  // slot substates, derived from the seed
    bool operator<(const GroupKey& o) const {
      if (state != o.state) return state < o.state;
      return seed < o.seed;
    }
  };
  std::map<GroupKey, std::vector<Derivation>> groups;

  std::vector<int32_t> state_order;                 // first-visit order
  std::map<int32_t, std::vector<int32_t>> per_state;  // state -> stored solutions

  struct SiteRow {
    std::vector<Value> inputs;
    Value output;
  };
  std::map<int32_t, std::vector<SiteRow>> sites;
};

struct EngineConfig {
  int64_t max_states = 1'000'000;
  int64_t max_depth = 100'000;
  int64_t max_expansions = 50'000'000;  // assignments processed in one run
  int64_t max_state_set = 10'000'000;   // outputs accumulated for one state
  uint64_t max_fuel = 0;
  std::chrono::steady_clock::time_point deadline{};  // epoch = no deadline
  bool use_thin = true;
  bool trace_derivations = false;
  bool trace_sets = false;
  ProbeHook probe;
};

struct RunStats {
  int64_t states = 0;
  int64_t expansions = 0;
  int64_t max_set = 0;   // largest stored per-state set
  int64_t root_set = 0;  // stored solutions at the root state
};

struct RunResult {
  bool has_solution = false;
  int64_t objective = 0;  // max score over root solutions
  RunStats stats;
};

// Runs a program on an instance: expands states depth-first with memoization
// (keyed on the declared memo key, or on the state value itself), prunes each
// state's solution set with the declared preorder, and scores the root set.
// Detects cyclic state graphs. The walk runs on a dedicated large-stack
// thread so deep recursions are safe.
RunResult run_program(const HyloProgram& prog, const Instance& inst, const EngineConfig& cfg,
                      TraceBundle* trace = nullptr);

// Evaluate the root expression only (initial state).
Value initial_state(const HyloProgram& prog, const Instance& inst);

// Run `fn` on a thread with the given stack size, propagating exceptions.
void call_with_stack(size_t stack_bytes, const std::function<void()>& fn);

}  // namespace methyl
