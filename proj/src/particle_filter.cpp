#include "cablecal/particle_filter.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cablecal/error.hpp"
#include "cablecal/parallel.hpp"

namespace cablecal {

namespace {

bool layout_has_anchor(std::size_t dim, std::size_t joints) {
  if (dim == DeviationVector::dimension(joints, false)) return false;
  if (dim == DeviationVector::dimension(joints, true)) return true;
  throw DimensionMismatch("particle dimension " + std::to_string(dim) +
                          " does not fit a " + std::to_string(joints) + "-joint table");
}

void check_sigma(const Eigen::VectorXd& v, std::size_t dim, const char* name) {
  if (static_cast<std::size_t>(v.size()) != dim) {
    throw InvalidParameter(std::string(name) + " has the wrong dimension");
  }
  if (!v.allFinite() || (v.array() < 0.0).any()) {
    throw InvalidParameter(std::string(name) + " must be finite and non-negative");
  }
}

}  // namespace

void PfConfig::validate(std::size_t dim) const {
  if (n_particles < 2) throw InvalidParameter("n_particles must be at least 2");
  if (n_steps < 0) throw InvalidParameter("n_steps must be non-negative");
  if (!(r_sigma > 0.0) || !std::isfinite(r_sigma)) {
    throw InvalidParameter("r_sigma must be positive");
  }
  if (!(ess_threshold > 0.0 && ess_threshold <= 1.0)) {
    throw InvalidParameter("ess_threshold must lie in (0, 1]");
  }
  check_sigma(process_sigma, dim, "process_sigma");
  check_sigma(init_spread, dim, "init_spread");
  if (bounds.size() != dim || static_cast<std::size_t>(bounds.upper.size()) != dim ||
      !(bounds.lower.array() < bounds.upper.array()).all()) {
    throw InvalidParameter("bounds need lower < upper in every coordinate");
  }
}

ParticleEnsemble init_particles(const Eigen::VectorXd& center, const PfConfig& cfg,
                                Rng& rng) {
  const auto dim = static_cast<std::size_t>(center.size());
  cfg.validate(dim);
  const std::uint64_t base = rng.next_u64();
  ParticleEnsemble ens;
  ens.particles.resize(center.size(), cfg.n_particles);
  ens.weights = Eigen::VectorXd::Constant(cfg.n_particles, 1.0 / cfg.n_particles);
  for (Eigen::Index i = 0; i < ens.particles.cols(); ++i) {
    Rng r = Rng::substream(base, kTagPfInit, static_cast<std::uint64_t>(i));
    Eigen::VectorXd p = center;
    for (Eigen::Index k = 0; k < p.size(); ++k) p[k] += cfg.init_spread[k] * r.normal();
    ens.particles.col(i) = cfg.bounds.clamp(p);
  }
  return ens;
}

ParticleEnsemble propagate(ParticleEnsemble ens, const PfConfig& cfg, Rng& rng) {
  const std::uint64_t base = rng.next_u64();
  for (Eigen::Index i = 0; i < ens.particles.cols(); ++i) {
    Rng r = Rng::substream(base, kTagPfPropagate, static_cast<std::uint64_t>(i));
    Eigen::VectorXd p = ens.particles.col(i);
    for (Eigen::Index k = 0; k < p.size(); ++k) p[k] += cfg.process_sigma[k] * r.normal();
    ens.particles.col(i) = cfg.bounds.clamp(p);
  }
  return ens;
}

ParticleEnsemble weight_particles(ParticleEnsemble ens, const MeasurementSet& ms,
                                  const DhTable& table, const PfConfig& cfg) {
  const std::size_t joints = table.joint_count();
  const bool with_anchor = layout_has_anchor(ens.dim(), joints);
  const std::size_t n = ens.size();

  std::vector<double> log_w(n);
  parallel_for(n, [&](std::size_t i) {
    const DeviationVector w(joints, with_anchor,
                            ens.particles.col(static_cast<Eigen::Index>(i)));
    const Eigen::VectorXd r = residuals(ms, table, w);
    double sse = 0.0;
    for (Eigen::Index j = 0; j < r.size(); ++j) sse += r[j] * r[j];
    log_w[i] = std::isfinite(sse) ? -0.5 * sse / (cfg.r_sigma * cfg.r_sigma)
                                  : -std::numeric_limits<double>::infinity();
  });

  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_w) top = std::max(top, v);

  ens.degenerate = !std::isfinite(top);
  if (ens.degenerate) {
    ens.weights.setConstant(1.0 / static_cast<double>(n));
    return ens;
  }
  for (std::size_t i = 0; i < n; ++i) {
    ens.weights[static_cast<Eigen::Index>(i)] = std::exp(log_w[i] - top);
  }
  return normalize_weights(std::move(ens));
}

ParticleEnsemble normalize_weights(ParticleEnsemble ens) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < ens.weights.size(); ++i) {
    if (!(ens.weights[i] >= 0.0) || !std::isfinite(ens.weights[i])) {
      throw WeightDegeneracy("weights must be finite and non-negative");
    }
    total += ens.weights[i];
  }
  if (!(total > 0.0)) throw WeightDegeneracy("all particle weights are zero");
  ens.weights /= total;
  return ens;
}

Eigen::VectorXd estimate(const ParticleEnsemble& ens) {
  return ens.particles * ens.weights;
}

double effective_sample_size(const ParticleEnsemble& ens) {
  return 1.0 / ens.weights.squaredNorm();
}

ParticleEnsemble systematic_resample(const ParticleEnsemble& ens, double u) {
  const Eigen::Index n = ens.particles.cols();
  ParticleEnsemble out;
  out.particles.resize(ens.particles.rows(), n);
  out.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double cumulative = ens.weights[0];
  Eigen::Index src = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double target = (u + static_cast<double>(i)) / static_cast<double>(n);
    while (target >= cumulative && src + 1 < n) {
      ++src;
      cumulative += ens.weights[src];
    }
    out.particles.col(i) = ens.particles.col(src);
  }
  return out;
}

bool should_resample(const ParticleEnsemble& ens, const PfConfig& cfg) {
  return effective_sample_size(ens) < cfg.ess_threshold * static_cast<double>(ens.size());
}

ParticleEnsemble resample(ParticleEnsemble ens, const PfConfig& cfg, Rng& rng) {
  if (!should_resample(ens, cfg)) return ens;
  return systematic_resample(ens, rng.uniform());
}

PfResult pf_run(const Eigen::VectorXd& center, const MeasurementSet& ms,
                const DhTable& table, const PfConfig& cfg) {
  const auto dim = static_cast<std::size_t>(center.size());
  cfg.validate(dim);
  const bool with_anchor = layout_has_anchor(dim, table.joint_count());
  Rng rng = Rng::substream(cfg.seed, kTagPf);

  ParticleEnsemble ens = init_particles(center, cfg, rng);
  PfResult out;
  out.w_est = estimate(ens);
  int consecutive_fallbacks = 0;
  for (int step = 0; step < cfg.n_steps; ++step) {
    ens = propagate(std::move(ens), cfg, rng);
    ens = weight_particles(std::move(ens), ms, table, cfg);
    out.eval_count += ens.size();
    if (ens.degenerate) {
      if (++consecutive_fallbacks > 3) {
        throw WeightDegeneracy("particle weights degenerate for " +
                               std::to_string(consecutive_fallbacks) +
                               " consecutive steps (step " + std::to_string(step + 1) +
                               "); every particle has a non-finite likelihood");
      }
    } else {
      consecutive_fallbacks = 0;
    }
    out.w_est = estimate(ens);
    out.ess_trace.push_back(effective_sample_size(ens));
    out.fitness_trace.push_back(
        fitness(ms, table, DeviationVector(table.joint_count(), with_anchor, out.w_est)));
    ++out.eval_count;
    if (should_resample(ens, cfg)) ++out.resample_count;
    ens = resample(std::move(ens), cfg, rng);
  }
  return out;
}

}  // namespace cablecal
