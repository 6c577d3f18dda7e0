#pragma once

#include <string>
#include <vector>

#include "methyl/program.hpp"

namespace methyl {

// Parse a program file. Top level: zero or more (define NAME LAMBDA) forms
// followed by one (hylo ...) form; defines are inlined at their use sites.
HyloProgram parse_program(const std::string& source);

// Parse an instance file: (instance (NAME VALUE)...). Bindings are matched
// against the program's declared constants, reordered to declaration order;
// missing or unknown names are errors.
Instance parse_instance(const std::string& source, const HyloProgram& prog);

// Fragment parsers, used by tests and by report tooling.
Value parse_value(const std::string& source);
Functor parse_functor(const std::string& source);
Type parse_type(const std::string& source);
// `bound` names become variables; anything else unbound is an error.
ExprPtr parse_expr(const std::string& source, const std::vector<int32_t>& bound);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace methyl
