#pragma once

// The `ovit` command line: train, eval, noise-sweep, gradcheck, orthcheck,
// paramcount. Kept in the library so tests can drive it in-process.

#include <iosfwd>
#include <span>
#include <string>

namespace ovit::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;  // the command ran but its contract was not met
inline constexpr int kUsage = 2;        // bad flags, bad config, unreadable input

// args excludes the program name. Data goes to `out` (or --out), diagnostics to `err`.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

} // namespace ovit::cli
