// Operator entry point. Exit codes:
//   0 success, 1 configuration or usage error, 2 I/O error,
//   3 model divergence, 4 malformed or insufficient data.
#pragma once

#include <ostream>

namespace soc::cli {

enum ExitCode : int {
    kOk = 0,
    kConfig = 1,
    kIo = 2,
    kDivergence = 3,
    kData = 4,
};

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace soc::cli
