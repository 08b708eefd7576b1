#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace asm2tv {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2, kExitArtifact = 3 };

/// Runs one verb; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace asm2tv
