#include "cablecal/simdata.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cablecal/error.hpp"

namespace cablecal {

void NoiseModel::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidParameter("noise sigma must be non-negative");
  }
  if (!(outlier_rate >= 0.0 && outlier_rate < 1.0)) {
    throw InvalidParameter("outlier_rate must lie in [0, 1)");
  }
  if (!(outlier_scale >= 1.0) || !std::isfinite(outlier_scale)) {
    throw InvalidParameter("outlier_scale must be at least 1");
  }
}

double NoiseModel::variance() const {
  return sigma * sigma *
         ((1.0 - outlier_rate) + outlier_rate * outlier_scale * outlier_scale);
}

std::vector<JointLimit> ScenarioConfig::limits_for(std::size_t joint_count) const {
  if (joint_limits.empty()) {
    return std::vector<JointLimit>(joint_count,
                                   {-std::numbers::pi, std::numbers::pi});
  }
  return joint_limits;
}

void ScenarioConfig::validate(std::size_t joint_count) const {
  if (n_points < 1) throw InvalidParameter("n_points must be at least 1");
  noise.validate();
  if (!anchor_mm.allFinite()) throw InvalidParameter("anchor must be finite");
  const DeviationScale& s = deviation_scale;
  for (double v : {s.a, s.d, s.theta, s.alpha, s.anchor}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidParameter("deviation scales must be finite and non-negative");
    }
  }
  if (!joint_limits.empty() && joint_limits.size() != joint_count) {
    throw InvalidParameter("expected " + std::to_string(joint_count) +
                           " joint limits, got " + std::to_string(joint_limits.size()));
  }
  for (const JointLimit& l : joint_limits) {
    if (!std::isfinite(l.lower) || !std::isfinite(l.upper) || l.lower > l.upper) {
      throw InvalidParameter("joint limits need finite lower <= upper");
    }
  }
}

DeviationVector synth_deviation(const ScenarioConfig& cfg, std::size_t joint_count,
                                Rng& rng) {
  const DeviationScale& s = cfg.deviation_scale;
  const bool with_anchor = s.anchor > 0.0;
  DeviationVector w(joint_count, with_anchor);
  auto draw = [&rng](double scale) { return scale * rng.uniform(-1.0, 1.0); };
  for (std::size_t j = 0; j < joint_count; ++j) w.at(DevBlock::kAlpha, j) = draw(s.alpha);
  for (std::size_t j = 0; j < joint_count; ++j) w.at(DevBlock::kA, j) = draw(s.a);
  for (std::size_t j = 0; j < joint_count; ++j) w.at(DevBlock::kD, j) = draw(s.d);
  for (std::size_t j = 0; j < joint_count; ++j) w.at(DevBlock::kTheta, j) = draw(s.theta);
  if (with_anchor) {
    for (Eigen::Index k = 0; k < 3; ++k) w.values()[w.values().size() - 3 + k] = draw(s.anchor);
  }
  return w;
}

std::vector<Eigen::VectorXd> sample_joint_configs(const ScenarioConfig& cfg,
                                                  std::size_t joint_count, Rng& rng) {
  const std::vector<JointLimit> limits = cfg.limits_for(joint_count);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(cfg.n_points));
  for (int i = 0; i < cfg.n_points; ++i) {
    Eigen::VectorXd q(static_cast<Eigen::Index>(joint_count));
    for (std::size_t j = 0; j < joint_count; ++j) {
      const JointLimit& l = limits[j];
      q[static_cast<Eigen::Index>(j)] =
          l.lower == l.upper ? l.lower : rng.uniform(l.lower, l.upper);
    }
    out.push_back(std::move(q));
  }
  return out;
}

double draw_noise(const NoiseModel& noise, Rng& rng) {
  const bool outlier = rng.uniform() < noise.outlier_rate;
  const double z = rng.normal();
  return z * noise.sigma * (outlier ? noise.outlier_scale : 1.0);
}

SimulatedData simulate_measurements(const DhTable& table, const ScenarioConfig& cfg) {
  const std::size_t joints = table.joint_count();
  cfg.validate(joints);
  Rng dev_rng = Rng::substream(cfg.seed, kTagDeviation);
  Rng cfg_rng = Rng::substream(cfg.seed, kTagConfigs);
  Rng noise_rng = Rng::substream(cfg.seed, kTagNoise);

  DeviationVector truth = synth_deviation(cfg, joints, dev_rng);
  const DhTable actual = apply_deviation(table, truth);
  const Eigen::Vector3d anchor = cfg.anchor_mm + truth.anchor_offset();

  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(cfg.n_points));
  for (Eigen::VectorXd& q : sample_joint_configs(cfg, joints, cfg_rng)) {
    const double exact = nominal_cable_length(end_position(actual, q), anchor);
    double length = exact + draw_noise(cfg.noise, noise_rng);
    // A cable cannot read a non-positive length; redraw the noise.
    for (int tries = 0; !(length > 0.0); ++tries) {
      if (tries > 1000) {
        throw InvalidParameter("end effector coincides with the anchor");
      }
      length = exact + draw_noise(cfg.noise, noise_rng);
    }
    samples.push_back({std::move(q), length});
  }
  return {MeasurementSet(joints, cfg.anchor_mm, std::move(samples)), std::move(truth)};
}

}  // namespace cablecal
