#pragma once

#include <exception>
#include <iosfwd>

namespace asif::cli {

enum ExitCode : int { ok = 0, internal = 1, input = 2, numerical = 3, cap_exceeded = 4 };

/// Parses argv and runs the selected subcommand. Errors are written to `err`
/// as one JSON object per line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int exit_code_for(const std::exception& e);

}  // namespace asif::cli
