#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dbec::cli {

/// Exit statuses of `run`.
enum Exit : int { ok = 0, usage = 2, numerical = 3 };

/// Parses `args` (without the program name), runs the selected subcommand and
/// writes the one-line summary to `out`, diagnostics and warnings to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace dbec::cli
