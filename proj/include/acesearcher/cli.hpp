#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace acesearcher {

/// Runs one subcommand. `args[0]` is the program name. Returns the process
/// exit status: 0 on success, 1 on a runtime failure, 2 on a usage error.
/// Failures print one JSON object `{"error": ..., "message": ...}` on `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace acesearcher
