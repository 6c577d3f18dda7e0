#pragma once

#include <stdexcept>
#include <string>

namespace methyl {

// All recoverable failures surface as Error; `kind` routes CLI exit codes and
// lets callers distinguish resource-limit hits from genuine evaluation faults.
struct Error : std::runtime_error {
  enum class Kind {
    Parse,     // malformed source text
    Type,      // program rejected by the checker
    Eval,      // runtime fault: bad operand, overflow, out-of-range access
    Limit,     // a configured resource limit was exceeded
    Cycle,     // the state graph is not acyclic
    NoSolution,// a run produced an empty solution set
    Config,    // bad configuration or unusable inputs
    Io,        // file system trouble
  };

  Error(Kind k, std::string msg, int line = -1, int col = -1)
      : std::runtime_error(std::move(msg)), kind(k), line(line), col(col) {}

  Kind kind;
  int line;
  int col;
};

[[noreturn]] inline void fail(Error::Kind k, const std::string& msg, int line = -1, int col = -1) {
  throw Error(k, msg, line, col);
}

}  // namespace methyl
