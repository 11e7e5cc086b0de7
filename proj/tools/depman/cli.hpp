#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace depman::cli {

enum ExitCode : int {
    kSuccess = 0,
    kOperationFailed = 1,
    kUsage = 2,
    kConnection = 3,
};

/// Runs one `depman` command line (args[0] is the program name). `manager_env`
/// stands in for $DEPMAN_MANAGER. Output is line-oriented; progress events
/// are written to `out` in arrival order.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err,
        std::optional<std::string> manager_env = std::nullopt);

} // namespace depman::cli
