#include "selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cablecal/objective.hpp"
#include "cablecal/optimizer.hpp"
#include "cablecal/particle_filter.hpp"
#include "cablecal/rng.hpp"
#include "cablecal/simdata.hpp"

namespace cablecal::cli {

namespace {

constexpr std::uint64_t kCheckSeed = 20240601;
constexpr double kPi = std::numbers::pi;

DhTable random_table(Rng& rng, std::size_t joints) {
  std::vector<DhLink> links(joints);
  for (DhLink& l : links) {
    l.a = rng.uniform(-400.0, 400.0);
    l.d = rng.uniform(-400.0, 400.0);
    l.theta_offset = rng.uniform(-kPi, kPi);
    l.alpha = rng.uniform(-kPi, kPi);
  }
  return DhTable(std::move(links));
}

Eigen::VectorXd random_q(Rng& rng, std::size_t joints) {
  Eigen::VectorXd q(static_cast<Eigen::Index>(joints));
  for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = rng.uniform(-kPi, kPi);
  return q;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

CheckResult orthonormality(const std::vector<DhTable>& tables, Rng& rng) {
  CheckResult r{"rotation-orthonormality", true, 0.0, 1e-9, ""};
  for (const DhTable& t : tables) {
    for (int k = 0; k < 50; ++k) {
      const Eigen::Matrix3d rot = forward_kinematics(t, random_q(rng, t.joint_count())).rotation();
      const double err = (rot.transpose() * rot - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
      const double det = std::abs(rot.determinant() - 1.0);
      r.max_error = std::max({r.max_error, err, det});
    }
  }
  r.passed = r.max_error <= r.tolerance;
  r.detail = "max |R^T R - I|, |det R - 1| = " + fmt(r.max_error);
  return r;
}

// Five-point central differences with a wider step than the library uses.
Eigen::MatrixXd oracle_jacobian(const DhTable& t, const Eigen::VectorXd& q) {
  const std::size_t n = t.joint_count();
  const double h = 1e-4;
  Eigen::MatrixXd jac(3, static_cast<Eigen::Index>(4 * n));
  DeviationVector w(n, false);
  auto at = [&](Eigen::Index k, double s) {
    w.values().setZero();
    w.values()[k] = s;
    return end_position(apply_deviation(t, w), q);
  };
  for (Eigen::Index k = 0; k < jac.cols(); ++k) {
    jac.col(k) = (-at(k, 2 * h) + 8.0 * at(k, h) - 8.0 * at(k, -h) + at(k, -2 * h)) / (12.0 * h);
  }
  return jac;
}

CheckResult jacobian_oracle(const std::vector<DhTable>& tables, Rng& rng) {
  CheckResult r{"jacobian-vs-oracle", true, 0.0, 1e-6, ""};
  for (const DhTable& t : tables) {
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd q = random_q(rng, t.joint_count());
      const Eigen::MatrixXd j = error_jacobian(t, q);
      const Eigen::MatrixXd o = oracle_jacobian(t, q);
      const double err = (j - o).cwiseAbs().maxCoeff() / (1.0 + o.cwiseAbs().maxCoeff());
      r.max_error = std::max(r.max_error, err);
    }
  }
  r.passed = r.max_error <= r.tolerance;
  r.detail = "max relative entry difference = " + fmt(r.max_error);
  return r;
}

CheckResult jacobian_order(const std::vector<DhTable>& tables, Rng& rng) {
  CheckResult r{"jacobian-quadratic-order", true, 0.0, 3.5, ""};
  double worst = std::numeric_limits<double>::infinity();
  for (const DhTable& t : tables) {
    const std::size_t n = t.joint_count();
    const Eigen::VectorXd q = random_q(rng, n);
    Eigen::VectorXd v(static_cast<Eigen::Index>(4 * n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
    const Eigen::Vector3d p0 = end_position(t, q);
    const Eigen::MatrixXd j = error_jacobian(t, q);
    auto residual = [&](double eps) {
      const DeviationVector w(n, false, eps * v);
      return (end_position(apply_deviation(t, w), q) - p0 - eps * (j * v)).norm();
    };
    const double eps = 1e-3;
    worst = std::min(worst, residual(eps) / residual(eps / 2.0));
  }
  r.max_error = worst;
  r.passed = worst >= r.tolerance;
  r.detail = "smallest residual ratio on halving the step = " + fmt(worst);
  return r;
}

CheckResult cubic_recovery(Rng& rng) {
  CheckResult r{"cubic-recovery", true, 0.0, 1e-8, ""};
  for (int k = 0; k < 100; ++k) {
    double c[4];
    for (double& x : c) x = rng.uniform(-5.0, 5.0);
    auto g = [&](double t) { return c[0] + t * (c[1] + t * (c[2] + t * c[3])); };
    auto gp = [&](double t) { return c[1] + t * (2.0 * c[2] + 3.0 * c[3] * t); };
    double w1, w2, w3;
    do {
      w1 = rng.uniform(-3.0, 3.0);
      w2 = rng.uniform(-3.0, 3.0);
      w3 = rng.uniform(-3.0, 3.0);
    } while (std::min({std::abs(w1 - w2), std::abs(w1 - w3), std::abs(w2 - w3)}) < 0.1);
    const CubicFit fit = cubic_fit(w1, w2, w3, g(w1), g(w2), g(w3), gp(w1));
    const double err = std::max({std::abs(fit.c0 - c[0]), std::abs(fit.c1 - c[1]),
                                 std::abs(fit.c2 - c[2]), std::abs(fit.c3 - c[3])});
    r.max_error = std::max(r.max_error, err);
  }
  r.passed = r.max_error <= r.tolerance;
  r.detail = "max coefficient error = " + fmt(r.max_error);
  return r;
}

CheckResult weight_normalization(const DhTable& table) {
  CheckResult r{"weight-normalization", true, 0.0, 1e-9, ""};
  ScenarioConfig sc;
  sc.seed = kCheckSeed;
  sc.n_points = 40;
  const SimulatedData sim = simulate_measurements(table, sc);
  const std::size_t dim = DeviationVector::dimension(table.joint_count(), false);
  PfConfig cfg;
  cfg.n_particles = 200;
  cfg.bounds = Bounds::symmetric(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), 0.05));
  cfg.process_sigma = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), 1e-3);
  cfg.init_spread = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), 0.01);
  cfg.r_sigma = 0.5;
  Rng rng(kCheckSeed);
  for (int k = 0; k < 5; ++k) {
    ParticleEnsemble ens = init_particles(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)), cfg, rng);
    ens = weight_particles(std::move(ens), sim.ms, table, cfg);
    double err = std::abs(ens.weights.sum() - 1.0);
    if ((ens.weights.array() < 0.0).any() || !ens.weights.allFinite()) err = 1.0;
    r.max_error = std::max(r.max_error, err);
  }
  r.passed = r.max_error <= r.tolerance;
  r.detail = "max |sum(w) - 1| = " + fmt(r.max_error);
  return r;
}

}  // namespace

std::vector<CheckResult> run_self_checks(const DhTable* table) {
  Rng rng(kCheckSeed);
  std::vector<DhTable> tables;
  for (int k = 0; k < 20; ++k) tables.push_back(random_table(rng, 6));
  if (table) tables.push_back(*table);

  std::vector<CheckResult> out;
  out.push_back(orthonormality(tables, rng));
  out.push_back(jacobian_oracle(tables, rng));
  out.push_back(jacobian_order(tables, rng));
  out.push_back(cubic_recovery(rng));
  out.push_back(weight_normalization(table ? *table : tables.front()));
  return out;
}

}  // namespace cablecal::cli
