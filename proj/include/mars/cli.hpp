#pragma once

// Command-line front end. Subcommands:
//   train-mars, train-uniform, train-plain, analyze-curvature, verify-theorem, gen-data, eval
// Every RunConfig key is a flag (--key value); --config FILE supplies defaults and flags win.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace mars::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace mars::cli
