#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace multispans::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitConstraint = 3;

// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// `key = value` lines become `--key=value` arguments placed before `args`
// so that later flags win.
std::vector<std::string> expand_config(const std::string& path);

}  // namespace multispans::cli
