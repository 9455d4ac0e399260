#pragma once

#include <ostream>

namespace fgm::cli {

/// Entry point of the `fgm` tool. Returns the process exit code:
/// 0 success, 2 usage, 3 data or format, 4 numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fgm::cli
