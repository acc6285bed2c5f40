// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "test_support.hpp"
#include "cablecal/io.hpp"
#include "cablecal/optimizer.hpp"
#include "cablecal/particle_filter.hpp"
#include "cablecal/pipeline.hpp"
#include "cablecal/simdata.hpp"

using namespace cablecal;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

DhTable demo() { return read_dh_table(data_path("demo6r.dh")); }

// ------------------------------------------------------------------ 1

Outcome kinematics_oracle() {
  const DhTable planar = planar2();
  const double s = std::sqrt(2.0);
  const std::vector<std::pair<Eigen::Vector2d, Eigen::Vector3d>> cases{
      {{0, 0}, {2, 0, 0}},
      {{kPi / 2, 0}, {0, 2, 0}},
      {{kPi / 2, -kPi / 2}, {1, 1, 0}},
      {{kPi / 4, 0}, {s, s, 0}}};
  double pos_err = 0.0;
  for (const auto& [q, want] : cases) {
    pos_err = std::max(pos_err, (forward_kinematics(planar, q).translation() - want).cwiseAbs().maxCoeff());
  }
  Rng rng(1001);
  double orth = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const DhTable t = random_table(rng, 6);
    const Eigen::Matrix3d r = forward_kinematics(t, random_vector(rng, 6, -kPi, kPi)).rotation();
    orth = std::max(orth, (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
  }
  return {pos_err <= 1e-12 && orth <= 1e-9,
          "planar position error " + fmt("%.2e", pos_err) + " (<= 1e-12), orthonormality " +
              fmt("%.2e", orth) + " (<= 1e-9)"};
}

// ------------------------------------------------------------------ 2

Outcome jacobian_order() {
  Rng rng(1002);
  double worst = kInf;
  for (int k = 0; k < 20; ++k) {
    const DhTable t = random_table(rng, 6);
    const Eigen::VectorXd q = random_vector(rng, 6, -kPi, kPi);
    const Eigen::VectorXd v = random_vector(rng, 24, -1, 1);
    const Eigen::MatrixXd j = error_jacobian(t, q);
    const Eigen::Vector3d p0 = oracle_position(t, q, Eigen::VectorXd::Zero(24));
    auto residual = [&](double eps) {
      return (oracle_position(t, q, eps * v) - p0 - eps * (j * v)).norm();
    };
    worst = std::min(worst, residual(1e-3) / residual(5e-4));
  }
  return {worst >= 3.5, "smallest shrink factor on halving " + fmt("%.3f", worst) + " (>= 3.5)"};
}

// ------------------------------------------------------------------ 3

Outcome cubic_recovery() {
  Rng rng(1003);
  double coeff_err = 0.0, root_err = 0.0;
  int roots = 0;
  bool consistent = true;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector4d c = random_vector(rng, 4, -5, 5);
    auto g = [&](double t) { return c[0] + t * (c[1] + t * (c[2] + t * c[3])); };
    auto gp = [&](double t) { return c[1] + t * (2 * c[2] + 3 * c[3] * t); };
    double w1, w2, w3;
    do {
      w1 = rng.uniform(-3, 3);
      w2 = rng.uniform(-3, 3);
      w3 = rng.uniform(-3, 3);
    } while (std::min({std::abs(w1 - w2), std::abs(w1 - w3), std::abs(w2 - w3)}) < 0.1);
    const CubicFit fit = cubic_fit(w1, w2, w3, g(w1), g(w2), g(w3), gp(w1));
    coeff_err = std::max(coeff_err, (Eigen::Vector4d(fit.c0, fit.c1, fit.c2, fit.c3) - c).cwiseAbs().maxCoeff());

    // Grid oracle: local minima of the true cubic on [-20, 20], refined by
    // bisection-style stepping.
    std::vector<double> mins;
    const int n = 200000;
    const double lo = -20, hi = 20, h = (hi - lo) / n;
    for (int i = 1; i < n; ++i) {
      const double t = lo + i * h;
      if (g(t) < g(t - h) && g(t) <= g(t + h)) {
        double best = t;
        for (int it = 0; it < 60; ++it) {
          const double step = h * std::pow(0.5, it);
          if (g(best - step) < g(best)) best -= step;
          else if (g(best + step) < g(best)) best += step;
        }
        mins.push_back(best);
      }
    }
    const auto t = cubic_minimum(fit);
    if (t && std::abs(*t) < 19.0) {
      consistent = consistent && mins.size() == 1 && fit.curvature(*t) > 0;
      if (!mins.empty()) root_err = std::max(root_err, std::abs(mins.front() - *t));
      ++roots;
    } else if (!t) {
      consistent = consistent && mins.empty();
    }
  }
  return {coeff_err <= 1e-8 && root_err <= 1e-6 && consistent && roots > 0,
          "coefficient error " + fmt("%.2e", coeff_err) + " (<= 1e-8), minimizer vs grid " +
              fmt("%.2e", root_err) + " (<= 1e-6) over " + std::to_string(roots) + " minima"};
}

// ------------------------------------------------------------------ 4

double evals_to_reach(const SearchResult& r, double tol) {
  return r.best_f <= tol ? static_cast<double>(r.eval_count) : kInf;
}

struct Benchmark {
  int wins = 0;
  double med_cibas = 0.0;
  double med_bas = 0.0;
};

Benchmark benchmark(const FitnessFn& f, int dim, double tol) {
  SearchConfig cfg;
  cfg.bounds = Bounds::symmetric(Eigen::VectorXd::Constant(dim, 5.0));
  cfg.max_iters = 5000;
  cfg.mu = 0.998;
  cfg.delta0 = 0.1;
  cfg.m0_ratio = 0.1;
  cfg.fitness_tol = tol;
  cfg.stall_iters = 0;
  Benchmark b;
  std::vector<double> ec, eb;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng(seed);
    const Eigen::VectorXd w0 = random_vector(rng, dim, -5, 5);
    cfg.seed = seed;
    const double c = evals_to_reach(optimize(SearchMethod::kCibas, cfg, f, w0), tol);
    const double a = evals_to_reach(optimize(SearchMethod::kBas, cfg, f, w0), tol);
    if (c < a) ++b.wins;
    ec.push_back(c);
    eb.push_back(a);
  }
  b.med_cibas = median(ec);
  b.med_bas = median(eb);
  return b;
}

Outcome cibas_efficiency() {
  const FitnessFn sphere = [](const Eigen::VectorXd& w) { return w.squaredNorm(); };
  const FitnessFn rosen = [](const Eigen::VectorXd& w) {
    return 100.0 * (w[1] - w[0] * w[0]) * (w[1] - w[0] * w[0]) + (1.0 - w[0]) * (1.0 - w[0]);
  };
  const Benchmark s = benchmark(sphere, 4, 1e-4);
  const Benchmark r = benchmark(rosen, 2, 1e-2);
  const bool ok = s.wins >= 24 && r.wins >= 24 && s.med_cibas < s.med_bas && r.med_cibas < r.med_bas;
  std::ostringstream d;
  d << "sphere wins " << s.wins << "/30, median evals " << s.med_cibas << " vs " << s.med_bas
    << "; rosenbrock wins " << r.wins << "/30, median evals " << r.med_cibas << " vs " << r.med_bas
    << " (>= 24/30 and lower median)";
  return {ok, d.str()};
}

// ------------------------------------------------------------------ 5

Outcome noiseless_recovery() {
  const DhTable t = demo();
  CalibrationConfig cfg;
  cfg.search.max_iters = 10000;
  cfg.search.mu = 0.9995;
  cfg.search.stall_iters = 0;
  double worst_cibas = 0.0, worst_pf = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ScenarioConfig sc;
    sc.seed = seed;
    sc.noise.sigma = 0.0;
    const SimulatedData sim = simulate_measurements(t, sc);
    cfg.seed = seed;
    worst_cibas = std::max(worst_cibas, calibrate(Method::kCibas, sim.ms, t, cfg).after.test.rmse_mm);
    worst_pf = std::max(worst_pf, calibrate(Method::kPfCibas, sim.ms, t, cfg).after.test.rmse_mm);
  }
  return {worst_cibas <= 1e-3 && worst_pf <= 1e-3,
          "worst held-out rmse cibas " + fmt("%.2e", worst_cibas) + " mm, pf-cibas " +
              fmt("%.2e", worst_pf) + " mm (<= 1e-3)"};
}

// ------------------------------------------------------------------ 6, 7

struct NoisyStudy {
  std::vector<double> pre, bas, cibas, pf_cibas;
};

NoisyStudy noisy_study() {
  const DhTable t = demo();
  NoisyStudy s;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ScenarioConfig sc;
    sc.seed = seed;
    sc.n_points = 120;
    sc.noise.sigma = 0.1;
    sc.noise.outlier_rate = 0.05;
    sc.noise.outlier_scale = 10.0;
    const SimulatedData sim = simulate_measurements(t, sc);
    CalibrationConfig cfg;
    cfg.seed = seed;
    const auto out = compare({Method::kBas, Method::kCibas, Method::kPfCibas}, sim.ms, t, cfg);
    for (const MethodOutcome& o : out) {
      if (!o.report) throw std::runtime_error(to_string(o.method) + " failed: " + o.error);
    }
    s.pre.push_back(out[0].report->before.test.rmse_mm);
    s.bas.push_back(out[0].report->after.test.rmse_mm);
    s.cibas.push_back(out[1].report->after.test.rmse_mm);
    s.pf_cibas.push_back(out[2].report->after.test.rmse_mm);
  }
  return s;
}

Outcome noisy_improvement(const NoisyStudy& s) {
  const double ratio = median(s.pf_cibas) / median(s.pre);
  return {ratio <= 0.35, "median held-out rmse " + fmt("%.3f", median(s.pre)) + " -> " +
                             fmt("%.3f", median(s.pf_cibas)) + " mm, ratio " + fmt("%.3f", ratio) +
                             " (<= 0.35)"};
}

Outcome method_ordering(const NoisyStudy& s) {
  const double b = median(s.bas), c = median(s.cibas), p = median(s.pf_cibas);
  int beats = 0;
  for (std::size_t i = 0; i < s.cibas.size(); ++i) beats += s.pf_cibas[i] < s.cibas[i] ? 1 : 0;
  const bool ok = p <= c && c <= b && beats >= 14;
  return {ok, "median held-out rmse pf-cibas " + fmt("%.3f", p) + " <= cibas " + fmt("%.3f", c) +
                  " <= bas " + fmt("%.3f", b) + "; pf-cibas beats cibas on " +
                  std::to_string(beats) + "/20 (>= 14)"};
}

// ------------------------------------------------------------------ 8

Outcome pf_properties() {
  const DhTable t = demo();
  ScenarioConfig sc;
  sc.seed = 1008;
  sc.noise.outlier_rate = 0.05;
  const SimulatedData sim = simulate_measurements(t, sc);
  PfConfig cfg;
  cfg.n_particles = 300;
  cfg.bounds = Bounds::symmetric(ParameterBox{}.half_widths(6, false));
  cfg.process_sigma = 0.01 * cfg.bounds.half_width();
  cfg.init_spread = 0.2 * cfg.bounds.half_width();
  cfg.r_sigma = 0.5;
  Rng rng(1008);

  double norm_err = 0.0;
  bool hull = true;
  for (int k = 0; k < 20; ++k) {
    ParticleEnsemble e = init_particles(Eigen::VectorXd::Zero(24), cfg, rng);
    e = weight_particles(std::move(e), sim.ms, t, cfg);
    norm_err = std::max(norm_err, std::abs(e.weights.sum() - 1.0));
    const Eigen::VectorXd m = estimate(e);
    hull = hull && (m.array() >= e.particles.rowwise().minCoeff().array()).all() &&
           (m.array() <= e.particles.rowwise().maxCoeff().array()).all();
  }

  // Weighted-mean preservation over 200 resampling draws.
  ParticleEnsemble e;
  e.particles = random_vector(rng, 100, -1, 1).transpose();
  e.weights = random_vector(rng, 100, 0, 1).array().cube();
  e = normalize_weights(std::move(e));
  const double target = estimate(e)[0];
  std::vector<double> means;
  for (int k = 0; k < 200; ++k) means.push_back(systematic_resample(e, rng.uniform()).particles.mean());
  const Eigen::Map<Eigen::VectorXd> mv(means.data(), 200);
  const double avg = mv.mean();
  const double se = std::sqrt((mv.array() - avg).square().sum() / 199.0 / 200.0);
  const double z = std::abs(avg - target) / std::max(se, 1e-300);

  // Resampling fires exactly when ESS < N / 2.
  bool gate = true;
  PfConfig g = cfg;
  g.n_particles = 50;
  for (int k = 0; k < 2000; ++k) {
    ParticleEnsemble w;
    w.particles = random_vector(rng, 50, -1, 1).transpose();
    w.weights = random_vector(rng, 50, 0, 1).array().pow(rng.uniform(0.5, 6.0));
    w = normalize_weights(std::move(w));
    const bool expect = effective_sample_size(w) < 0.5 * 50;
    const ParticleEnsemble r = resample(w, g, rng);
    const bool fired = !(r.particles == w.particles && r.weights == w.weights);
    gate = gate && (fired == expect) && (fired == should_resample(w, g));
  }
  const bool ok = norm_err <= 1e-9 && hull && z <= 3.0 && gate;
  return {ok, "weight sum error " + fmt("%.2e", norm_err) + ", estimate in hull " +
                  (hull ? "yes" : "no") + ", resampled mean within " + fmt("%.2f", z) +
                  " standard errors (<= 3), ESS gate " + (gate ? "exact" : "violated")};
}

// ------------------------------------------------------------------ 9

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cablecal");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cablecal::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  }
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb || fa.empty()) return false;
  for (const fs::path& p : fa) {
    if (slurp(a / p) != slurp(b / p)) return false;
  }
  return true;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "cablecal_acceptance";
  fs::remove_all(root);
  const std::string dh = data_path("demo6r.dh");
  int compared = 0;
  bool ok = true;
  for (const std::string run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    ok = ok && cli({"simulate", "--dh", dh, "--n", "120", "--sigma", "0.1", "--outlier-rate",
                    "0.05", "--seed", "42", "--out", (dir / "d.csv").string()}) == 0;
    for (const std::string m : {"bas", "cibas", "pf", "pf-cibas"}) {
      ok = ok && cli({"calibrate", "--method", m, "--data", (dir / "d.csv").string(), "--dh", dh,
                      "--seed", "7", "--out", (dir / (m + ".json")).string(), "--trace-dir",
                      (dir / "traces").string()}) == 0;
    }
    ok = ok && cli({"compare", "--methods", "bas,cibas,pf,pf-cibas", "--seeds", "2", "--dh", dh,
                    "--seed", "3", "--iters", "100", "--particles", "100", "--pf-steps", "10",
                    "--out-dir", (dir / "compare").string()}) == 0;
  }
  const bool same = ok && same_tree(root / "a", root / "b");
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) compared += e.is_regular_file() ? 1 : 0;
  return {same, std::to_string(compared) + " output files from simulate, calibrate and compare " +
                    (same ? "identical" : "differ or commands failed") + " across reruns"};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  bool all = true;
  auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
    const auto start = clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(clock::now() - start).count();
    const bool in_time = secs < limit_s;
    const bool pass = o.passed && in_time;
    all = all && pass;
    std::printf("%s %d %s: %s; %.2f s (< %.0f s)\n", pass ? "PASS" : "FAIL", id, name,
                o.detail.c_str(), secs, limit_s);
    std::fflush(stdout);
  };

  report(1, "kinematics oracle", 1, kinematics_oracle);
  report(2, "error-model consistency", 5, jacobian_order);
  report(3, "cubic recovery", 1, cubic_recovery);
  report(4, "CIBAS vs BAS efficiency", 30, cibas_efficiency);
  report(5, "noiseless recovery", 120, noiseless_recovery);

  NoisyStudy study;
  double study_s = 0.0;
  std::string study_error;
  {
    const auto start = clock::now();
    try {
      study = noisy_study();
    } catch (const std::exception& e) {
      study_error = e.what();
    }
    study_s = std::chrono::duration<double>(clock::now() - start).count();
  }
  auto from_study = [&](const std::function<Outcome(const NoisyStudy&)>& fn) {
    return [&, fn]() -> Outcome {
      if (!study_error.empty()) return {false, "study failed: " + study_error};
      return fn(study);
    };
  };
  // Criteria 6 and 7 share the 20-scenario study and its 10-minute budget.
  report(6, "noisy calibration improvement", 600.0 - study_s, from_study(noisy_improvement));
  report(7, "method ordering", 600.0 - study_s, from_study(method_ordering));
  std::printf("     (shared noisy study took %.2f s)\n", study_s);

  report(8, "particle filter properties", 5, pf_properties);
  report(9, "determinism", 60, determinism);
  return all ? 0 : 1;
}
