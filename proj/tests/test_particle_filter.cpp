#include "doctest.h"
#include "test_support.hpp"

#include <limits>

#include "cablecal/error.hpp"
#include "cablecal/particle_filter.hpp"
#include "cablecal/simdata.hpp"

using namespace cablecal;
using namespace testsupport;

namespace {

PfConfig config(Eigen::Index dim, int n, double spread, double sigma, double half = 10.0) {
  PfConfig cfg;
  cfg.n_particles = n;
  cfg.init_spread = Eigen::VectorXd::Constant(dim, spread);
  cfg.process_sigma = Eigen::VectorXd::Constant(dim, sigma);
  cfg.bounds = Bounds::symmetric(Eigen::VectorXd::Constant(dim, half));
  return cfg;
}

ParticleEnsemble ensemble(std::initializer_list<double> xs, std::initializer_list<double> ws) {
  ParticleEnsemble e;
  e.particles.resize(1, static_cast<Eigen::Index>(xs.size()));
  e.weights.resize(static_cast<Eigen::Index>(ws.size()));
  Eigen::Index i = 0;
  for (double x : xs) e.particles(0, i++) = x;
  i = 0;
  for (double w : ws) e.weights[i++] = w;
  return e;
}

// One planar sample whose residual is -delta_a1 for a particle that only moves a1.
MeasurementSet planar_sample() {
  return MeasurementSet(2, Eigen::Vector3d::Zero(), {Sample{Eigen::Vector2d::Zero(), 2.0}});
}

Eigen::VectorXd shift_a1(double v) {
  DeviationVector w(2, false);
  w.at(DevBlock::kA, 0) = v;
  return w.values();
}

}  // namespace

TEST_CASE("initial cloud") {
  Rng rng(51);
  const Eigen::Vector3d center(1, -2, 0.5);
  const ParticleEnsemble tight = init_particles(center, config(3, 50, 0.0, 0.0), rng);
  for (Eigen::Index i = 0; i < 50; ++i) CHECK(tight.particles.col(i) == Eigen::VectorXd(center));
  CHECK((tight.weights.array() == 1.0 / 50).all());

  const int n = 10000;
  const double spread = 0.3;
  const ParticleEnsemble wide = init_particles(center, config(3, n, spread, 0.0), rng);
  const Eigen::VectorXd mean = wide.particles.rowwise().mean();
  CHECK((mean - center).cwiseAbs().maxCoeff() <= 4 * spread / std::sqrt(n));
}

TEST_CASE("propagation") {
  Rng rng(52);
  const PfConfig still = config(2, 20, 0.5, 0.0);
  ParticleEnsemble e = init_particles(Eigen::Vector2d::Zero(), still, rng);
  const ParticleEnsemble moved = propagate(e, still, rng);
  CHECK(moved.particles == e.particles);

  const int n = 10000;
  const double sigma = 0.2;
  const PfConfig walk = config(1, n, 0.0, sigma);
  e = init_particles(Eigen::VectorXd::Zero(1), walk, rng);
  const ParticleEnsemble after = propagate(e, walk, rng);
  const Eigen::ArrayXd step = (after.particles - e.particles).row(0).array();
  const double sd = std::sqrt((step - step.mean()).square().sum() / (n - 1));
  CHECK(std::abs(sd - sigma) <= 0.05 * sigma);
  CHECK(after.weights == e.weights);

  const PfConfig edge = config(1, 200, 0.0, 1.0, 0.5);
  e = init_particles(Eigen::VectorXd::Constant(1, 0.5), edge, rng);
  for (int k = 0; k < 5; ++k) e = propagate(std::move(e), edge, rng);
  CHECK(e.particles.maxCoeff() <= 0.5);
  CHECK(e.particles.minCoeff() >= -0.5);
}

TEST_CASE("likelihood weights") {
  const DhTable t = planar2();
  const MeasurementSet ms = planar_sample();
  PfConfig cfg = config(8, 2, 0.0, 0.0);
  cfg.r_sigma = 1.0;

  ParticleEnsemble e;
  e.particles.resize(8, 2);
  e.particles.col(0) = shift_a1(0.0);
  e.particles.col(1) = shift_a1(std::sqrt(2.0));
  e.weights = Eigen::Vector2d(0.5, 0.5);
  e = weight_particles(std::move(e), ms, t, cfg);
  const double em1 = std::exp(-1.0);
  CHECK(std::abs(e.weights[0] - 1.0 / (1.0 + em1)) <= 1e-12);
  CHECK(std::abs(e.weights[1] - em1 / (1.0 + em1)) <= 1e-12);
  CHECK_FALSE(e.degenerate);

  ParticleEnsemble one;
  one.particles = shift_a1(0.7);
  one.weights = Eigen::VectorXd::Ones(1);
  PfConfig single = cfg;
  single.n_particles = 1;
  CHECK(weight_particles(one, ms, t, single).weights[0] == 1.0);

  // Far-apart particles still give a proper distribution thanks to the log shift.
  e.particles.col(0) = shift_a1(40.0);
  e.particles.col(1) = shift_a1(41.0);
  e = weight_particles(std::move(e), ms, t, cfg);
  CHECK(std::abs(e.weights.sum() - 1.0) <= 1e-12);
  CHECK(e.weights[0] > e.weights[1]);
}

TEST_CASE("weights decrease strictly with the residual sum of squares") {
  const DhTable t = planar2();
  const MeasurementSet ms = planar_sample();
  PfConfig cfg = config(8, 6, 0.0, 0.0);
  cfg.r_sigma = 0.7;
  ParticleEnsemble e;
  e.particles.resize(8, 6);
  for (Eigen::Index i = 0; i < 6; ++i) e.particles.col(i) = shift_a1(0.25 * static_cast<double>(i));
  e.weights = Eigen::VectorXd::Constant(6, 1.0 / 6);
  e = weight_particles(std::move(e), ms, t, cfg);
  for (Eigen::Index i = 1; i < 6; ++i) CHECK(e.weights[i] < e.weights[i - 1]);
}

TEST_CASE("non-finite likelihoods fall back to uniform weights") {
  const MeasurementSet ms = planar_sample();
  ParticleEnsemble e;
  e.weights = Eigen::Vector3d(0.2, 0.3, 0.5);
  PfConfig cfg = config(8, 3, 0.0, 0.0);
  // Finite link lengths whose squared residuals overflow.
  e.particles = Eigen::MatrixXd::Zero(8, 3);
  e.particles.row(2).setConstant(1e200);
  e = weight_particles(std::move(e), ms, planar2(), cfg);
  CHECK(e.degenerate);
  CHECK((e.weights.array() == 1.0 / 3).all());
}

TEST_CASE("weight normalization") {
  ParticleEnsemble e = normalize_weights(ensemble({0, 1}, {2, 2}));
  CHECK(e.weights == Eigen::Vector2d(0.5, 0.5));
  e = normalize_weights(ensemble({0, 1}, {1, 3}));
  CHECK(e.weights == Eigen::Vector2d(0.25, 0.75));
  CHECK(normalize_weights(e).weights == e.weights);
  CHECK_THROWS_AS(normalize_weights(ensemble({0, 1}, {0, 0})), WeightDegeneracy);
  CHECK_THROWS_AS(normalize_weights(ensemble({0, 1}, {-1, 2})), WeightDegeneracy);

  Rng rng(53);
  for (int k = 0; k < 100; ++k) {
    ParticleEnsemble r;
    r.particles = Eigen::MatrixXd::Zero(1, 100);
    r.weights = random_vector(rng, 100, 0, std::pow(10.0, rng.uniform(-200, 200)));
    CHECK(std::abs(normalize_weights(r).weights.sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("estimate examples and convex hull") {
  CHECK(estimate(ensemble({-1, 1}, {0.5, 0.5}))[0] == 0.0);
  CHECK(estimate(ensemble({-1.25, 1}, {1, 0}))[0] == -1.25);
  CHECK(estimate(ensemble({0, 4}, {0.25, 0.75}))[0] == 3.0);

  Rng rng(54);
  for (int k = 0; k < 100; ++k) {
    ParticleEnsemble e;
    e.particles = Eigen::MatrixXd(4, 30);
    for (Eigen::Index c = 0; c < 30; ++c) e.particles.col(c) = random_vector(rng, 4, -3, 3);
    e.weights = random_vector(rng, 30, 0, 1);
    e = normalize_weights(std::move(e));
    const Eigen::VectorXd m = estimate(e);
    CHECK((m.array() >= e.particles.rowwise().minCoeff().array()).all());
    CHECK((m.array() <= e.particles.rowwise().maxCoeff().array()).all());
  }
}

TEST_CASE("resampling gate") {
  PfConfig cfg = config(1, 4, 0, 0);
  Rng rng(55);
  const ParticleEnsemble uniform = ensemble({1, 2, 3, 4}, {0.25, 0.25, 0.25, 0.25});
  CHECK(effective_sample_size(uniform) == doctest::Approx(4.0));
  CHECK_FALSE(should_resample(uniform, cfg));
  CHECK(resample(uniform, cfg, rng).particles == uniform.particles);

  const ParticleEnsemble spike = ensemble({1, 2, 3, 4}, {0, 0, 1, 0});
  const ParticleEnsemble r = resample(spike, cfg, rng);
  CHECK((r.particles.array() == 3.0).all());
  CHECK((r.weights.array() == 0.25).all());

  cfg.n_particles = 2;
  const ParticleEnsemble pair = ensemble({1, 2}, {0.5, 0.5});
  CHECK(effective_sample_size(pair) == doctest::Approx(2.0));
  CHECK(resample(pair, cfg, rng).particles == pair.particles);

  // ESS just above and just below half of N.
  cfg.n_particles = 4;
  const ParticleEnsemble above = ensemble({1, 2, 3, 4}, {0.6, 0.2, 0.1, 0.1});  // ESS = 2.381
  const ParticleEnsemble below = ensemble({1, 2, 3, 4}, {0.7, 0.1, 0.1, 0.1});  // ESS = 1.923
  CHECK_FALSE(should_resample(above, cfg));
  CHECK(should_resample(below, cfg));
}

TEST_CASE("systematic resampling multiplicities follow the weights") {
  const ParticleEnsemble e = ensemble({10, 20, 30, 40}, {0.1, 0.4, 0.25, 0.25});
  const ParticleEnsemble r = systematic_resample(e, 0.5);
  // Offsets 0.125, 0.375, 0.625, 0.875 against cumulative 0.1, 0.5, 0.75, 1.0.
  CHECK(r.particles == Eigen::RowVector4d(20, 20, 30, 40));

  Rng rng(56);
  for (int k = 0; k < 50; ++k) {
    ParticleEnsemble big;
    big.particles = random_vector(rng, 100, -1, 1).transpose();
    big.weights = random_vector(rng, 100, 0, 1);
    big = normalize_weights(std::move(big));
    const ParticleEnsemble s = systematic_resample(big, rng.uniform());
    for (Eigen::Index i = 0; i < 100; ++i) {
      const double copies = static_cast<double>((s.particles.array() == big.particles(0, i)).count());
      CHECK(std::abs(copies - 100 * big.weights[i]) < 1.0 + 1e-9);
    }
  }
}

TEST_CASE("resampling preserves the weighted mean") {
  Rng rng(57);
  ParticleEnsemble e;
  e.particles = random_vector(rng, 50, -2, 2).transpose();
  e.weights = random_vector(rng, 50, 0, 1).array().square();
  e = normalize_weights(std::move(e));
  const double target = estimate(e)[0];
  std::vector<double> means;
  for (int k = 0; k < 200; ++k) means.push_back(systematic_resample(e, rng.uniform()).particles.mean());
  const Eigen::Map<Eigen::VectorXd> m(means.data(), 200);
  const double avg = m.mean();
  const double se = std::sqrt((m.array() - avg).square().sum() / 199.0 / 200.0);
  CHECK(std::abs(avg - target) <= 3 * se + 1e-12);
}

TEST_CASE("filter runs on noiseless data") {
  const DhTable table({DhLink{0, 540, 0, -kPi / 2}, DhLink{540, 0, -kPi / 2, 0},
                       DhLink{140, 0, 0, -kPi / 2}, DhLink{0, 604, 0, kPi / 2},
                       DhLink{0, 0, 0, -kPi / 2}, DhLink{120, 144, 0, 0}});
  ScenarioConfig sc;
  sc.noise.sigma = 0.0;
  sc.seed = 7;
  sc.n_points = 60;
  const SimulatedData sim = simulate_measurements(table, sc);
  const Eigen::VectorXd truth = sim.truth.values();

  PfConfig cfg = config(24, 200, 1e-9, 1e-10, 1.0);
  cfg.r_sigma = 0.1;
  cfg.n_steps = 10;
  const PfResult r = pf_run(truth, sim.ms, table, cfg);
  CHECK(r.ess_trace.size() == 10);
  CHECK(r.fitness_trace.size() == 10);
  CHECK(r.eval_count == 10 * 200 + 10);
  const double f_center = fitness(sim.ms, table, sim.truth);
  const double f_est = fitness(sim.ms, table, DeviationVector(6, false, r.w_est));
  CHECK(f_center <= 1e-20);
  CHECK(f_est <= 1e-9);

  cfg.n_steps = 0;
  cfg.init_spread = Eigen::VectorXd::Constant(24, 1e-3);
  const PfResult zero = pf_run(truth, sim.ms, table, cfg);
  CHECK((zero.w_est - truth).cwiseAbs().maxCoeff() <= 4 * 1e-3 / std::sqrt(200.0));
  CHECK(zero.ess_trace.empty());
}

TEST_CASE("filter is deterministic and seed dependent") {
  const DhTable t = planar2();
  Rng rng(58);
  const MeasurementSet ms = oracle_measurements(t, random_vector(rng, 8, -0.05, 0.05),
                                                {3, 1, 0}, 30, rng);
  PfConfig cfg = config(8, 100, 0.05, 0.005, 0.2);
  cfg.r_sigma = 0.05;
  cfg.n_steps = 15;
  cfg.seed = 5;
  const PfResult a = pf_run(Eigen::VectorXd::Zero(8), ms, t, cfg);
  const PfResult b = pf_run(Eigen::VectorXd::Zero(8), ms, t, cfg);
  CHECK(a.w_est == b.w_est);
  CHECK(a.ess_trace == b.ess_trace);
  CHECK(a.fitness_trace == b.fitness_trace);
  cfg.seed = 6;
  CHECK(pf_run(Eigen::VectorXd::Zero(8), ms, t, cfg).w_est != a.w_est);
  CHECK(a.fitness_trace.back() < fitness(ms, t, DeviationVector(2, false)));
}

TEST_CASE("filter configuration is validated") {
  const MeasurementSet ms = planar_sample();
  PfConfig cfg = config(8, 10, 0.1, 0.1);
  CHECK_NOTHROW(cfg.validate(8));
  PfConfig c = cfg;
  c.n_particles = 1;
  CHECK_THROWS_AS(c.validate(8), InvalidParameter);
  c = cfg;
  c.r_sigma = 0.0;
  CHECK_THROWS_AS(c.validate(8), InvalidParameter);
  c = cfg;
  c.ess_threshold = 1.5;
  CHECK_THROWS_AS(c.validate(8), InvalidParameter);
  c = cfg;
  c.process_sigma[0] = -1.0;
  CHECK_THROWS_AS(c.validate(8), InvalidParameter);
  CHECK_THROWS_AS(cfg.validate(9), InvalidParameter);
  PfConfig wrong = config(9, 10, 0.1, 0.1);
  CHECK_THROWS_AS(pf_run(Eigen::VectorXd::Zero(9), ms, planar2(), wrong), DimensionMismatch);
}
