#pragma once

#include <string>
#include <vector>

namespace scansnap::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDiverged = 2 };

// args excludes the program name: {"theory", "--M", "1000", ...}.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, const char* const* argv);

}  // namespace scansnap::cli
