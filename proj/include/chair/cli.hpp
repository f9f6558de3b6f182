#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chair::cli {

inline constexpr const char* kVersion = "0.3.0";

/// Runs the command-line tool. Exit status: 0 success, 1 validation or
/// usage error, 2 I/O error. Reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace chair::cli
