/**
 * @file cli.hpp
 * @brief Command-line frontend: simulate, calibrate, compare and check.
 *
 * Exit status is 0 on success, 1 on a runtime failure (unreadable file,
 * failed calibration, failed self-check) and 2 on a usage error.
 */
#pragma once

#include <iosfwd>

namespace cablecal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line; argv[0] is the program name. Data goes to @p out,
/// diagnostics and log lines to @p err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cablecal::cli
