#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace w2fair {

// Exit codes of the command-line surface.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;     // unknown flag / bad invocation
inline constexpr int kExitConfig = 3;    // bad config or spec document
inline constexpr int kExitData = 4;      // unreadable dataset / artifact
inline constexpr int kExitInternal = 5;  // everything else

// Runs one w2fair invocation in-process. args excludes the program name.
// Errors print a single line "error: <category>: <message>" to err.
// W2FAIR_OUT_ROOT sets the default output root when --out is omitted.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

int run_cli(int argc, const char* const* argv);

}  // namespace w2fair
