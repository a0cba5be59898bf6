#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace doicd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

/// Entry point for `doicd synth | detect | eval | list-objects`.
/// args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace doicd::cli
