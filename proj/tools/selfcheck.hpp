/**
 * @file selfcheck.hpp
 * @brief Numeric self-tests behind `cablecal check`.
 */
#pragma once

#include <string>
#include <vector>

#include "cablecal/kinematics.hpp"

namespace cablecal::cli {

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_error = 0.0;  ///< worst observed value of the checked quantity
  double tolerance = 0.0;
  std::string detail;
};

/**
 * @brief Runs every self-check.
 *
 * Checks rotation orthonormality, the Jacobian against a wider-stencil
 * finite-difference oracle and its quadratic residual order, exact cubic
 * recovery, and particle weight normalization. When @p table is given the
 * kinematic checks also run on it.
 */
std::vector<CheckResult> run_self_checks(const DhTable* table);

}  // namespace cablecal::cli
