#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spider::cli {

// Runs one `spider` invocation. args excludes the program name. Failures print
// a single `error: <code>: <message>` line to err and return nonzero.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spider::cli
