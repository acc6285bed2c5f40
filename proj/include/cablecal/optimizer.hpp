/**
 * @file optimizer.hpp
 * @brief Beetle antennae search (BAS) and its cubic-interpolated variant
 * (CIBAS) over a box-bounded real vector.
 *
 * Directions are drawn on the unit sphere and mapped into parameter space by
 * a per-coordinate step scale (the box half-width by default), so one step
 * size serves coordinates with different units. The line through the current
 * point along the scaled direction d is parameterized as
 *   phi(t) = f(clamp(w + t * d)).
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cablecal/rng.hpp"

namespace cablecal {

using FitnessFn = std::function<double(const Eigen::VectorXd&)>;

/// Axis-aligned search box.
struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Bounds symmetric(const Eigen::VectorXd& half_width) {
    return {-half_width, half_width};
  }
  std::size_t size() const { return static_cast<std::size_t>(lower.size()); }
  Eigen::VectorXd half_width() const { return 0.5 * (upper - lower); }
  Eigen::VectorXd clamp(const Eigen::VectorXd& w) const {
    return w.cwiseMax(lower).cwiseMin(upper);
  }
  bool contains(const Eigen::VectorXd& w) const {
    return w.size() == lower.size() && (w.array() >= lower.array()).all() &&
           (w.array() <= upper.array()).all();
  }
};

struct SearchConfig {
  double delta0 = 0.1;      ///< initial step, in units of step_scale
  double mu = 0.95;         ///< step decay per iteration, in (0, 1)
  double m0_ratio = 0.5;    ///< tentacle spacing as a fraction of the step
  int max_iters = 200;
  double fitness_tol = 0.0; ///< stop once best_f <= tol; non-finite disables
  int stall_iters = 50;     ///< stop after this many non-improving iterations; 0 disables
  double trust_ratio = 10.0;///< cubic candidates must satisfy |t| <= trust_ratio * step
  int restarts = 1;         ///< independent runs from w0, best one kept
  Bounds bounds;
  Eigen::VectorXd step_scale; ///< per-coordinate scale; empty means box half-width
  std::uint64_t seed = 1;

  /// @throws InvalidParameter
  void validate(std::size_t dim) const;
  Eigen::VectorXd effective_scale() const;
};

enum class SearchMethod { kBas, kCibas };

std::string to_string(SearchMethod m);
/// @throws InvalidParameter on unknown names.
SearchMethod parse_search_method(const std::string& name);

struct TraceRecord {
  int iter = 0;
  double best_f = 0.0;
  std::uint64_t evals = 0;

  bool operator==(const TraceRecord&) const = default;
};

struct SearchState {
  Eigen::VectorXd w;
  double f = 0.0;  ///< fitness at w
  double delta = 0.0;
  Eigen::VectorXd best_w;
  double best_f = 0.0;
  int iter = 0;
  std::uint64_t evals = 0;
  int cubic_accepts = 0;
  std::vector<TraceRecord> trace;
};

/// Interpolating cubic g(t) = c0 + c1 t + c2 t^2 + c3 t^3 together with the
/// intermediates of its closed-form solution.
struct CubicFit {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
  double beta = 0.0, chi = 0.0, kappa = 0.0, phi = 0.0;

  double value(double t) const { return c0 + t * (c1 + t * (c2 + t * c3)); }
  double slope(double t) const { return c1 + t * (2.0 * c2 + 3.0 * c3 * t); }
  double curvature(double t) const { return 2.0 * c2 + 6.0 * c3 * t; }
};

/// Uniform [-1, 1] components, normalized; all-zero draws are repeated.
Eigen::VectorXd random_direction(std::size_t dim, Rng& rng);

/// Left/right antenna positions w + m0 b and w - m0 b.
std::pair<Eigen::VectorXd, Eigen::VectorXd> tentacles(const Eigen::VectorXd& w,
                                                      const Eigen::VectorXd& b,
                                                      double m0);

/**
 * @brief Cubic through (w1,f1), (w2,f2), (w3,f3) with slope f1p at w1.
 * @throws DegenerateFit when nodes coincide or the system is singular.
 */
CubicFit cubic_fit(double w1, double w2, double w3, double f1, double f2,
                   double f3, double f1p);

/// Stationary point with positive curvature, if one exists.
std::optional<double> cubic_minimum(const CubicFit& fit);

/// Evaluates w0 and sets up the search state. @throws InvalidParameter
SearchState init_search(const SearchConfig& cfg, const FitnessFn& f,
                        const Eigen::VectorXd& w0);

/// One BAS iteration: probe both antennae, move a full step toward the
/// better one, decay the step.
SearchState bas_step(const SearchConfig& cfg, SearchState state,
                     const FitnessFn& f, Rng& rng);

/// One CIBAS iteration: BAS probe plus a cubic line search along the probe
/// direction; the cubic candidate wins only if it beats both the current
/// point and the BAS move.
SearchState cibas_step(const SearchConfig& cfg, SearchState state,
                       const FitnessFn& f, Rng& rng);

struct SearchResult {
  Eigen::VectorXd best_w;
  double best_f = 0.0;
  std::vector<TraceRecord> trace;
  std::uint64_t eval_count = 0;
  int iterations = 0;
  int cubic_accepts = 0;
};

/// Runs the chosen method until max_iters, the fitness tolerance or the stall
/// limit. Deterministic for a given config (including seed).
SearchResult optimize(SearchMethod method, const SearchConfig& cfg,
                      const FitnessFn& f, const Eigen::VectorXd& w0);

}  // namespace cablecal
