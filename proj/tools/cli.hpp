#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qdpp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitCorrupt = 4;
inline constexpr int kExitGuard = 5;

inline constexpr const char* kVersion = "1.0.0";

// Parses `args` (without the program name) and runs the subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qdpp::cli
