/**
 * @file simdata.hpp
 * @brief Synthetic ground-truth calibration scenarios: a perturbed "true"
 * robot, random joint configurations and noisy cable-length readings.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

#include "cablecal/kinematics.hpp"
#include "cablecal/objective.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

/// Gaussian scale mixture: N(0, sigma^2) with probability 1 - outlier_rate,
/// otherwise N(0, (outlier_scale * sigma)^2).
struct NoiseModel {
  double sigma = 0.1;
  double outlier_rate = 0.0;
  double outlier_scale = 10.0;

  void validate() const;
  /// Variance of the mixture.
  double variance() const;
};

/// Half-ranges of the uniform ground-truth deviations.
struct DeviationScale {
  double a = 0.5;        ///< mm
  double d = 0.5;        ///< mm
  double theta = 0.005;  ///< rad
  double alpha = 0.005;  ///< rad
  double anchor = 0.0;   ///< mm; > 0 adds an anchor offset to the truth
};

struct JointLimit {
  double lower = 0.0;
  double upper = 0.0;
};

struct ScenarioConfig {
  DeviationScale deviation_scale;
  int n_points = 120;
  /// One entry per joint; empty means +-pi on every joint.
  std::vector<JointLimit> joint_limits;
  Eigen::Vector3d anchor_mm{450.0, 250.0, 0.0};
  NoiseModel noise;
  std::uint64_t seed = 42;

  /// @throws InvalidParameter
  void validate(std::size_t joint_count) const;
  std::vector<JointLimit> limits_for(std::size_t joint_count) const;
};

/// Uniform(-scale, +scale) per coordinate of its block.
DeviationVector synth_deviation(const ScenarioConfig& cfg, std::size_t joint_count,
                                Rng& rng);

/// n_points configurations, each joint uniform within its limits.
std::vector<Eigen::VectorXd> sample_joint_configs(const ScenarioConfig& cfg,
                                                  std::size_t joint_count, Rng& rng);

/// One draw from the noise mixture.
double draw_noise(const NoiseModel& noise, Rng& rng);

struct SimulatedData {
  MeasurementSet ms;
  DeviationVector truth;
};

/// Draws a truth deviation, configurations and noisy cable lengths, using
/// independent substreams of cfg.seed for each.
SimulatedData simulate_measurements(const DhTable& table, const ScenarioConfig& cfg);

}  // namespace cablecal
