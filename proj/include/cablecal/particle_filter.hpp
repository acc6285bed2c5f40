/**
 * @file particle_filter.hpp
 * @brief Static-parameter particle filter over deviation vectors.
 *
 * Particles follow a Gaussian random walk, are weighted by the Gaussian
 * likelihood of the whole batch of cable-length residuals and are
 * systematically resampled when the effective sample size drops.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "cablecal/kinematics.hpp"
#include "cablecal/objective.hpp"
#include "cablecal/optimizer.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

struct PfConfig {
  int n_particles = 500;
  Eigen::VectorXd process_sigma;  ///< per-coordinate random-walk std
  Eigen::VectorXd init_spread;    ///< per-coordinate std of the initial cloud
  double r_sigma = 1.0;           ///< measurement noise std [mm]
  int n_steps = 50;
  double ess_threshold = 0.5;     ///< resample when ESS < ess_threshold * N
  Bounds bounds;
  std::uint64_t seed = 1;

  /// @throws InvalidParameter
  void validate(std::size_t dim) const;
};

/// Particles are stored column-wise (dim x N).
struct ParticleEnsemble {
  Eigen::MatrixXd particles;
  Eigen::VectorXd weights;
  bool degenerate = false;  ///< last weighting fell back to uniform weights

  std::size_t size() const { return static_cast<std::size_t>(particles.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(particles.rows()); }
};

/// center + N(0, init_spread^2) per coordinate, clamped; uniform weights.
ParticleEnsemble init_particles(const Eigen::VectorXd& center, const PfConfig& cfg,
                                Rng& rng);

/// Adds N(0, process_sigma^2) per coordinate and clamps. Weights untouched.
ParticleEnsemble propagate(ParticleEnsemble ens, const PfConfig& cfg, Rng& rng);

/// Likelihood weights from the cable-length residuals of every particle,
/// normalized. Falls back to uniform weights (and sets `degenerate`) when no
/// particle has a finite likelihood.
ParticleEnsemble weight_particles(ParticleEnsemble ens, const MeasurementSet& ms,
                                  const DhTable& table, const PfConfig& cfg);

/// @throws WeightDegeneracy if no weight is positive.
ParticleEnsemble normalize_weights(ParticleEnsemble ens);

/// Weighted mean of the particles.
Eigen::VectorXd estimate(const ParticleEnsemble& ens);

/// 1 / sum(w^2) of normalized weights.
double effective_sample_size(const ParticleEnsemble& ens);

/// Systematic resampling with offsets (u + i) / N, u in [0, 1).
ParticleEnsemble systematic_resample(const ParticleEnsemble& ens, double u);

/// True when ESS < ess_threshold * N.
bool should_resample(const ParticleEnsemble& ens, const PfConfig& cfg);

/// Systematic resampling when ESS < ess_threshold * N, otherwise unchanged.
ParticleEnsemble resample(ParticleEnsemble ens, const PfConfig& cfg, Rng& rng);

struct PfResult {
  Eigen::VectorXd w_est;
  std::vector<double> ess_trace;
  std::vector<double> fitness_trace;  ///< fitness of the estimate per step
  std::uint64_t eval_count = 0;
  int resample_count = 0;
};

/**
 * @brief init, then n_steps x (propagate, weight, estimate, resample).
 * @throws WeightDegeneracy after more than three consecutive uniform
 * fallbacks.
 */
PfResult pf_run(const Eigen::VectorXd& center, const MeasurementSet& ms,
                const DhTable& table, const PfConfig& cfg);

}  // namespace cablecal
