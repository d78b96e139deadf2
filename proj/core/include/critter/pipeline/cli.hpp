#pragma once

#include <iosfwd>

namespace critter::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// The `critter` command line. Returns 0 on success, 1 for usage errors
/// (usage text on `err`) and 2 for runtime failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace critter::pipeline
