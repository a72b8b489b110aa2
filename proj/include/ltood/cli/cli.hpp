#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ltood::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

// Runs one command line (without the program name), e.g.
// {"train", "--data", "d", "--out", "r"}. Never throws; failures are reported
// on `err` and mapped to an exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ltood::cli
