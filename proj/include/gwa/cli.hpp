#pragma once

#include <iosfwd>

namespace gwa::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInvalid = 1;  // bad arguments, configuration or input data
inline constexpr int kRuntime = 2;  // numeric failure or other runtime error

// Entry point of the `gwa` executable. Subcommands: synth, import-cholec80,
// train, evaluate, infer, ablate, plot-data.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace gwa::cli
