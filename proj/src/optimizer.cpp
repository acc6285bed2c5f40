#include "cablecal/optimizer.hpp"

#include <cassert>
#include <cmath>
#include <limits>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Non-finite fitness values rank last.
double sanitize(double f) { return std::isnan(f) ? kInf : f; }

double sign_of(double x) {
  if (std::isnan(x)) return 0.0;
  return static_cast<double>((x > 0.0) - (x < 0.0));
}

class Evaluator {
 public:
  Evaluator(const SearchConfig& cfg, const FitnessFn& f, SearchState& s)
      : cfg_(cfg), f_(f), s_(s) {}

  double operator()(const Eigen::VectorXd& w) {
    const double v = sanitize(f_(w));
    ++s_.evals;
    if (v < s_.best_f) {
      s_.best_f = v;
      s_.best_w = w;
    }
    return v;
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& w) const { return cfg_.bounds.clamp(w); }

 private:
  const SearchConfig& cfg_;
  const FitnessFn& f_;
  SearchState& s_;
};

struct Probe {
  Eigen::VectorXd dir;  // scaled direction d
  double m0 = 0.0;
  double f_left = 0.0;  // phi(+m0)
  double f_right = 0.0; // phi(-m0)
  double sign = 0.0;
};

Probe probe(const SearchConfig& cfg, const Eigen::VectorXd& scale,
            SearchState& s, Evaluator& eval, Rng& rng) {
  Probe p;
  const Eigen::VectorXd b = random_direction(static_cast<std::size_t>(s.w.size()), rng);
  p.dir = scale.cwiseProduct(b);
  p.m0 = cfg.m0_ratio * s.delta;
  auto [left, right] = tentacles(s.w, p.dir, p.m0);
  p.f_left = eval(eval.clamp(left));
  p.f_right = eval(eval.clamp(right));
  p.sign = sign_of(p.f_right - p.f_left);
  return p;
}

void finish_iteration(const SearchConfig& cfg, SearchState& s) {
  s.delta *= cfg.mu;
  ++s.iter;
  s.trace.push_back({s.iter, s.best_f, s.evals});
}

}  // namespace

void SearchConfig::validate(std::size_t dim) const {
  if (!(mu > 0.0 && mu < 1.0)) throw InvalidParameter("mu must lie in (0, 1)");
  if (!(delta0 > 0.0) || !std::isfinite(delta0)) {
    throw InvalidParameter("delta0 must be positive");
  }
  if (!(m0_ratio > 0.0) || !std::isfinite(m0_ratio)) {
    throw InvalidParameter("m0_ratio must be positive");
  }
  if (!(trust_ratio > 0.0)) throw InvalidParameter("trust_ratio must be positive");
  if (max_iters < 1) throw InvalidParameter("max_iters must be at least 1");
  if (stall_iters < 0) throw InvalidParameter("stall_iters must be non-negative");
  if (restarts < 1) throw InvalidParameter("restarts must be at least 1");
  if (bounds.size() != dim || static_cast<std::size_t>(bounds.upper.size()) != dim) {
    throw InvalidParameter("bounds dimension does not match the search space");
  }
  if (!(bounds.lower.array() < bounds.upper.array()).all() ||
      !bounds.lower.allFinite() || !bounds.upper.allFinite()) {
    throw InvalidParameter("bounds need finite lower < upper in every coordinate");
  }
  if (step_scale.size() != 0) {
    if (static_cast<std::size_t>(step_scale.size()) != dim) {
      throw InvalidParameter("step_scale dimension does not match the search space");
    }
    if (!(step_scale.array() > 0.0).all() || !step_scale.allFinite()) {
      throw InvalidParameter("step_scale entries must be positive");
    }
  }
}

Eigen::VectorXd SearchConfig::effective_scale() const {
  return step_scale.size() != 0 ? step_scale : bounds.half_width();
}

std::string to_string(SearchMethod m) {
  return m == SearchMethod::kBas ? "bas" : "cibas";
}

SearchMethod parse_search_method(const std::string& name) {
  if (name == "bas") return SearchMethod::kBas;
  if (name == "cibas") return SearchMethod::kCibas;
  throw InvalidParameter("unknown search method '" + name + "'");
}

Eigen::VectorXd random_direction(std::size_t dim, Rng& rng) {
  if (dim == 0) throw InvalidParameter("direction dimension must be at least 1");
  Eigen::VectorXd b(static_cast<Eigen::Index>(dim));
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-1.0, 1.0);
    norm = b.norm();
  } while (!(norm > 0.0));
  return b / norm;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> tentacles(const Eigen::VectorXd& w,
                                                      const Eigen::VectorXd& b,
                                                      double m0) {
  return {w + m0 * b, w - m0 * b};
}

CubicFit cubic_fit(double w1, double w2, double w3, double f1, double f2,
                   double f3, double f1p) {
  for (double v : {w1, w2, w3, f1, f2, f3, f1p}) {
    if (!std::isfinite(v)) throw DegenerateFit("non-finite interpolation data");
  }
  if (w1 == w2 || w1 == w3 || w2 == w3) {
    throw DegenerateFit("interpolation nodes must be distinct");
  }
  CubicFit fit;
  const double d2 = w1 - w2;
  const double d3 = w1 - w3;
  fit.beta = (f2 - f1 + f1p * d2) / (d2 * d2);
  fit.chi = (f3 - f1 + f1p * d3) / (d3 * d3);
  fit.kappa = (2.0 * w1 * w1 - w2 * (w1 + w2)) / d2;
  fit.phi = (2.0 * w1 * w1 - w3 * (w1 + w3)) / d3;
  const double denom = fit.kappa - fit.phi;
  if (denom == 0.0 || !std::isfinite(denom)) {
    throw DegenerateFit("singular cubic interpolation system");
  }
  fit.c3 = (fit.beta - fit.chi) / denom;
  fit.c2 = fit.beta - fit.kappa * fit.c3;
  fit.c1 = f1p - 2.0 * fit.c2 * w1 - 3.0 * fit.c3 * w1 * w1;
  fit.c0 = f1 - w1 * (fit.c1 + w1 * (fit.c2 + w1 * fit.c3));
  if (!std::isfinite(fit.c0) || !std::isfinite(fit.c1) || !std::isfinite(fit.c2) ||
      !std::isfinite(fit.c3)) {
    throw DegenerateFit("cubic coefficients overflowed");
  }
  return fit;
}

std::optional<double> cubic_minimum(const CubicFit& fit) {
  const double c1 = fit.c1, c2 = fit.c2, c3 = fit.c3;
  const double scale = std::max({std::abs(c1), std::abs(c2), 1e-300});
  if (std::abs(c3) <= 1e-12 * scale) {
    if (!(c2 > 0.0)) return std::nullopt;
    return -c1 / (2.0 * c2);
  }
  // Roots of 3 c3 t^2 + 2 c2 t + c1 = 0.
  const double disc = c2 * c2 - 3.0 * c1 * c3;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  // Cancellation-free pair of roots.
  const double q = -(c2 + std::copysign(sq, c2));
  double roots[2];
  int count = 0;
  roots[count++] = q / (3.0 * c3);
  if (q != 0.0) roots[count++] = c1 / q;
  for (int i = 0; i < count; ++i) {
    if (std::isfinite(roots[i]) && fit.curvature(roots[i]) > 0.0) return roots[i];
  }
  return std::nullopt;
}

SearchState init_search(const SearchConfig& cfg, const FitnessFn& f,
                        const Eigen::VectorXd& w0) {
  cfg.validate(static_cast<std::size_t>(w0.size()));
  if (!w0.allFinite()) throw InvalidParameter("start point is not finite");
  if (!cfg.bounds.contains(w0)) throw InvalidParameter("start point lies outside the bounds");
  SearchState s;
  s.w = w0;
  s.delta = cfg.delta0;
  s.best_w = w0;
  s.best_f = kInf;
  Evaluator eval(cfg, f, s);
  s.f = eval(w0);
  s.best_w = w0;
  s.best_f = s.f;
  return s;
}

SearchState bas_step(const SearchConfig& cfg, SearchState state,
                     const FitnessFn& f, Rng& rng) {
  Evaluator eval(cfg, f, state);
  const Probe p = probe(cfg, cfg.effective_scale(), state, eval, rng);
  if (p.sign != 0.0) {
    const Eigen::VectorXd next = eval.clamp(state.w + state.delta * p.sign * p.dir);
    const double f_next = eval(next);
    if (std::isfinite(f_next)) {
      state.w = next;
      state.f = f_next;
    }
  }
  finish_iteration(cfg, state);
  return state;
}

SearchState cibas_step(const SearchConfig& cfg, SearchState state,
                       const FitnessFn& f, Rng& rng) {
  Evaluator eval(cfg, f, state);
  const Probe p = probe(cfg, cfg.effective_scale(), state, eval, rng);
  const double f0 = state.f;

  Eigen::VectorXd bas_w = state.w;
  double bas_f = f0;
  if (p.sign != 0.0) {
    bas_w = eval.clamp(state.w + state.delta * p.sign * p.dir);
    bas_f = eval(bas_w);
  }

  std::optional<double> t_star;
  if (std::isfinite(f0) && std::isfinite(p.f_left) && std::isfinite(p.f_right)) {
    try {
      const double slope0 = (p.f_left - p.f_right) / (2.0 * p.m0);
      const CubicFit fit = cubic_fit(0.0, p.m0, -p.m0, f0, p.f_left, p.f_right, slope0);
      t_star = cubic_minimum(fit);
    } catch (const DegenerateFit&) {
      t_star.reset();
    }
  }

  bool took_cubic = false;
  if (t_star && std::abs(*t_star) <= cfg.trust_ratio * state.delta) {
    const Eigen::VectorXd cubic_w = eval.clamp(state.w + *t_star * p.dir);
    const double cubic_f = eval(cubic_w);
    if (cubic_f < std::min(bas_f, f0)) {
      assert(cubic_f < f0 && cubic_f < bas_f);
      state.w = cubic_w;
      state.f = cubic_f;
      ++state.cubic_accepts;
      took_cubic = true;
    }
  }
  if (!took_cubic && std::isfinite(bas_f)) {
    state.w = bas_w;
    state.f = bas_f;
  }
  finish_iteration(cfg, state);
  return state;
}

namespace {

SearchResult run_once(SearchMethod method, const SearchConfig& cfg,
                      const FitnessFn& f, const Eigen::VectorXd& w0, Rng& rng) {
  SearchState s = init_search(cfg, f, w0);
  const bool tol_enabled = std::isfinite(cfg.fitness_tol);
  int since_improvement = 0;
  while (s.iter < cfg.max_iters && !(tol_enabled && s.best_f <= cfg.fitness_tol)) {
    const double before = s.best_f;
    s = method == SearchMethod::kBas ? bas_step(cfg, std::move(s), f, rng)
                                     : cibas_step(cfg, std::move(s), f, rng);
    since_improvement = s.best_f < before ? 0 : since_improvement + 1;
    if (cfg.stall_iters > 0 && since_improvement >= cfg.stall_iters) break;
  }
  SearchResult r;
  r.best_w = std::move(s.best_w);
  r.best_f = s.best_f;
  r.trace = std::move(s.trace);
  r.eval_count = s.evals;
  r.iterations = s.iter;
  r.cubic_accepts = s.cubic_accepts;
  return r;
}

}  // namespace

SearchResult optimize(SearchMethod method, const SearchConfig& cfg,
                      const FitnessFn& f, const Eigen::VectorXd& w0) {
  cfg.validate(static_cast<std::size_t>(w0.size()));
  SearchResult best;
  std::uint64_t total_evals = 0;
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng = Rng::substream(cfg.seed, kTagSearch, static_cast<std::uint64_t>(r));
    SearchResult run = run_once(method, cfg, f, w0, rng);
    total_evals += run.eval_count;
    if (r == 0 || run.best_f < best.best_f) best = std::move(run);
  }
  best.eval_count = total_evals;
  return best;
}

}  // namespace cablecal
