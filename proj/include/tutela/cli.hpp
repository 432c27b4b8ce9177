#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tutela {

// Runs the `tutela` command line. `args` excludes the program name. Returns 0 on
// success, 1 on a usage error and 2 on a data or configuration error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tutela
