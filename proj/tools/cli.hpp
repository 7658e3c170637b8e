#pragma once

#include <iosfwd>

namespace camp::cli {

enum ExitCode { kOk = 0, kUsage = 1, kProvider = 2, kIo = 3 };

// Entry point of the `camp` binary; output goes to the given streams.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace camp::cli
