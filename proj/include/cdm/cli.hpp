#pragma once

#include <exception>
#include <iosfwd>

namespace cdm {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;      // a check failed or an internal error
inline constexpr int kExitBadInput = 2;     // malformed files, flags or config
inline constexpr int kExitDimension = 3;    // inputs disagree on N, J or K

int exit_code_for(const std::exception& e);

// Entry point behind the `cdm` executable. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace cdm
