#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "methyl/eval.hpp"
#include "methyl/grammar.hpp"
#include "methyl/program.hpp"

namespace methyl {

// Which representation a rewrite replaces: the per-state solutions the
// combiner builds, or the search states the generator expands.
enum class RewriteSide : uint8_t { Solution, State };

// One call site cut out of the program during re-representation. Queries
// yield scalars (or flat scalar tuples); constructors yield a value of the
// replaced type. A direct site consumes one bare value of the replaced type
// (the scorer, a pruning key, the memo key); a template site consumes the
// combiner/generator parameter plus the temporaries its body mentions, and
// is marked by an instrumentation probe in the rewritten body.
struct ExtractedSite {
  enum class Kind : uint8_t { Query, Constructor };
  Kind kind;
  int32_t id = 0;
  ExprPtr body;                                 // original fragment
  std::vector<std::pair<int32_t, Type>> temps;  // binders the body mentions
  bool direct = false;
  Type output_type;
};

// The result of cutting one half of a program along the replaced type:
// every site, plus the instrumented body template whose probe markers both
// record runtime examples and mark where synthesized fragments go.
struct SiteExtraction {
  bool ok = false;
  std::string why;
  RewriteSide side = RewriteSide::Solution;
  int32_t subject = -1;  // the combiner/generator parameter
  std::vector<ExtractedSite> sites;  // direct sites first, then body order
  StmtFun probed;

  const ExtractedSite* find(int32_t id) const;
};

// Cuts the combiner along the solution type: the scorer and every pruning
// key become direct query sites; minimal scalar-valued solution-touching
// subexpressions of the combiner body become template query sites; every
// collect argument becomes a constructor site. Fails (ok = false) when a
// solution-touching expression neither yields scalars nor sits under a
// collect.
SiteExtraction extract_solution_sites(const HyloProgram& prog);

// Cuts the generator along the state type: the memo key becomes a direct
// query site; each collect argument is decomposed along the functor shape of
// its (statically known) summand — identity positions become constructor
// sites, scalar constant positions become query sites; state uses outside
// collects are cut like combiner expressions. Fails when a seed's summand
// cannot be determined statically or a state use cannot be cut.
SiteExtraction extract_state_sites(const HyloProgram& prog);

// The program with the instrumented body spliced in. Running it under
// site_recorder fills TraceBundle::sites with one row per site execution:
// inputs = (subject value, temporaries...), output = the fragment's value.
HyloProgram instrumented_program(const HyloProgram& prog, const SiteExtraction& ex);
ProbeHook site_recorder(TraceBundle& bundle);

// A solved re-representation: the converter maps an original value to the
// flat scalar tuple that replaces it, and each site id maps to the fragment
// spliced over the original program's own variables.
struct RepresentationChange {
  std::vector<ExprPtr> converter;           // lambdas: replaced value -> Int
  std::map<int32_t, ExprPtr> replacements;  // site id -> replacement fragment
};

// One traced run of the instrumented program.
struct LiftRun {
  const TraceBundle* bundle;
  const Instance* instance;
};

struct LiftConfig {
  GrammarConfig grammar;   // enumeration caps for components and fragments
  int max_examples = 400;  // per-site cap; uniform subsample beyond it
  int max_extras = 3;      // fresh components admitted beyond the direct ones
  uint64_t seed = 0;
  std::chrono::steady_clock::time_point deadline{};  // epoch = none
};

struct LiftOutcome {
  std::optional<RepresentationChange> change;
  bool timed_out = false;
  std::string why;  // on failure: the first site that could not be solved
};

// Solves the re-representation induced by `ex` against the recorded runs.
// Direct sites seed the converter with their own bodies; template sites are
// solved smallest-first from the constant-time grammar over the transformed
// inputs, reusing converter components before admitting fresh ones from the
// polynomial-time grammar. Every replacement is exact on all recorded
// examples (the full set is replayed after synthesis, not just the
// subsample the search used).
LiftOutcome solve_lifting(const HyloProgram& prog, const SiteExtraction& ex,
                          const std::vector<LiftRun>& runs, const LiftConfig& cfg);

// Splices the solved fragments into the extraction template and rewrites the
// surrounding program: on the solution side the solution type becomes the
// converter tuple and the scorer/pruning keys become component accesses; on
// the state side the state type becomes the converter tuple, the root is
// converted once on entry, and the memo key is rewritten.
HyloProgram apply_representation_change(const HyloProgram& prog, const SiteExtraction& ex,
                                        const RepresentationChange& rc);

// True when every replacement fragment avoids structure-traversing
// operators (fold, tfold, tail, match, upto): the synthesized fragments
// must run in constant time.
bool replacements_constant_time(const RepresentationChange& rc);

}  // namespace methyl
