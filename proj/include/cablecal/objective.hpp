/**
 * @file objective.hpp
 * @brief Cable-length measurement model, calibration fitness and the
 * RMSE / mean-absolute / max error metrics.
 */
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "cablecal/kinematics.hpp"

namespace cablecal {

/// One robot configuration with the cable length measured at it.
struct Sample {
  Eigen::VectorXd q;  ///< joint angles [rad]
  double length_mm = 0.0;

  bool operator==(const Sample&) const = default;
};

/// Cable-length observations against a single fixed anchor point.
class MeasurementSet {
 public:
  /// @throws InvalidParameter / DimensionMismatch when a sample is invalid.
  MeasurementSet(std::size_t joint_count, const Eigen::Vector3d& anchor_mm,
                 std::vector<Sample> samples);

  std::size_t joint_count() const { return joints_; }
  std::size_t size() const { return samples_.size(); }
  const Eigen::Vector3d& anchor() const { return anchor_; }
  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }

  /// Samples at the given indices, in that order.
  MeasurementSet subset(std::span<const std::size_t> indices) const;

  bool operator==(const MeasurementSet&) const = default;

 private:
  std::size_t joints_;
  Eigen::Vector3d anchor_;
  std::vector<Sample> samples_;
};

/// Error summary of a residual vector.
struct Metrics {
  double rmse_mm = 0.0;
  /// Mean absolute residual. The field keeps the conventional "Std" label
  /// of calibration reports even though it is not a standard deviation.
  double std_mm = 0.0;
  double max_mm = 0.0;

  bool operator==(const Metrics&) const = default;
};

/// Euclidean distance between an end-effector position and the anchor.
double nominal_cable_length(const Eigen::Vector3d& p, const Eigen::Vector3d& anchor);

/**
 * @brief Measured minus model cable length for every sample.
 *
 * The model uses the deviated table and, if @p w carries an anchor offset,
 * the anchor shifted by that offset.
 */
Eigen::VectorXd residuals(const MeasurementSet& ms, const DhTable& table,
                          const DeviationVector& w);

/// Mean squared residual [mm^2].
double fitness(const MeasurementSet& ms, const DhTable& table,
               const DeviationVector& w);

/// Mean of r_i^2, summed in index order.
double mean_square(const Eigen::VectorXd& r);

/// @throws InvalidParameter for an empty vector.
Metrics metrics(const Eigen::VectorXd& r);

/**
 * @brief Stacked cable-length Jacobian dL/dw, one row per sample.
 *
 * Row i is u_i^T J_i where u_i is the unit vector from the anchor to the
 * end effector and J_i the position error Jacobian (anchor columns are
 * -u_i^T). Used for identifiability diagnostics.
 */
Eigen::MatrixXd cable_jacobian(const MeasurementSet& ms, const DhTable& table,
                               const DeviationVector& w);

/// Singular values of the cable Jacobian scaled column-wise by @p scale and
/// the numerical rank at relative tolerance @p rel_tol.
struct Identifiability {
  Eigen::VectorXd singular_values;
  std::size_t rank = 0;
};
Identifiability identifiability(const MeasurementSet& ms, const DhTable& table,
                                const DeviationVector& w,
                                const Eigen::VectorXd& scale,
                                double rel_tol = 1e-8);

}  // namespace cablecal
