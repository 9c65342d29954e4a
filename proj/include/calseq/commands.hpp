#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace calseq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitRuntime = 3;

// Entry point of the `calseq` binary; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace calseq
