#pragma once

#include <iosfwd>

namespace qute::cli {

/// Exit codes: 0 success, 1 usage or config error, 2 input-data error.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;

/// Runs the `qute` command line. Results without an --out path go to `out`;
/// diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace qute::cli
