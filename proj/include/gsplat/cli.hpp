#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gs::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsageError = 1,
    kDataError = 2,
    kVerificationFailure = 3,
};

/// Entry point for the command-line tool. Tables go to `out`, diagnostics and
/// usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Every flag accepted by a subcommand, e.g. {"--seed", "--threads", ...}.
std::vector<std::string> subcommand_flags(const std::string& subcommand);
std::vector<std::string> subcommands();

} // namespace gs::cli
