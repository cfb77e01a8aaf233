#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mppf {

/// Runs one command line (args exclude the program name). Results go to the
/// --out file or to out; diagnostics to err. Returns 0 on success, 2 for
/// invalid input or usage, 3 for a numerical abort.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mppf
