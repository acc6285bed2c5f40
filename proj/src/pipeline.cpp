#include "cablecal/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cablecal/error.hpp"
#include "cablecal/io.hpp"

namespace cablecal {

std::string to_string(Method m) {
  switch (m) {
    case Method::kBas: return "bas";
    case Method::kCibas: return "cibas";
    case Method::kPf: return "pf";
    case Method::kPfCibas: return "pf-cibas";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "bas") return Method::kBas;
  if (name == "cibas") return Method::kCibas;
  if (name == "pf") return Method::kPf;
  if (name == "pf-cibas") return Method::kPfCibas;
  throw InvalidParameter("unknown method '" + name + "' (expected bas, cibas, pf or pf-cibas)");
}

std::vector<Method> parse_method_list(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_method(item));
  }
  if (out.empty()) throw InvalidParameter("method list is empty");
  return out;
}

Eigen::VectorXd ParameterBox::half_widths(std::size_t joint_count, bool with_anchor) const {
  const auto n = static_cast<Eigen::Index>(joint_count);
  Eigen::VectorXd h(static_cast<Eigen::Index>(DeviationVector::dimension(joint_count, with_anchor)));
  h.segment(0, n).setConstant(alpha_rad);
  h.segment(n, n).setConstant(a_mm);
  h.segment(2 * n, n).setConstant(d_mm);
  h.segment(3 * n, n).setConstant(theta_rad);
  if (with_anchor) h.tail<3>().setConstant(anchor_mm);
  return h;
}

Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidParameter("train_fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::lround(static_cast<double>(n) * train_fraction));
  if (n_train == 0 || n_train >= n) {
    throw InvalidParameter("split of " + std::to_string(n) + " samples leaves an empty side");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng::substream(seed, kTagSplit);
  // Fisher-Yates with our own uniform draws so the split is identical on
  // every standard library.
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) throw InvalidParameter("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double robust_sigma(const Eigen::VectorXd& r) {
  std::vector<double> v(r.data(), r.data() + r.size());
  const double med = median(v);
  for (double& x : v) x = std::abs(x - med);
  return std::max(1.4826 * median(std::move(v)), 1e-9);
}

namespace {

struct RunContext {
  const DhTable& table;
  const MeasurementSet& train;
  std::size_t joints;
  bool with_anchor;

  DeviationVector dev(const Eigen::VectorXd& v) const {
    return DeviationVector(joints, with_anchor, v);
  }
  double train_fitness(const Eigen::VectorXd& v) const {
    return fitness(train, table, dev(v));
  }
};

SearchConfig resolve_search(const CalibrationConfig& cfg, const Bounds& bounds) {
  SearchConfig s = cfg.search;
  s.bounds = bounds;
  s.seed = substream_seed(cfg.seed, kTagSearch);
  return s;
}

PfConfig resolve_pf(const CalibrationConfig& cfg, const Bounds& bounds,
                    const Eigen::VectorXd& half, const RunContext& ctx,
                    const Eigen::VectorXd& center) {
  PfConfig p = cfg.pf;
  p.bounds = bounds;
  p.seed = substream_seed(cfg.seed, kTagPf);
  if (p.process_sigma.size() == 0) p.process_sigma = cfg.pf_process_fraction * half;
  if (p.init_spread.size() == 0) p.init_spread = cfg.pf_init_factor * p.process_sigma;
  if (!(p.r_sigma > 0.0)) {
    p.r_sigma = robust_sigma(residuals(ctx.train, ctx.table, ctx.dev(center)));
  }
  return p;
}

}  // namespace

CalibrationReport calibrate(Method method, const MeasurementSet& ms,
                            const DhTable& table, const CalibrationConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (ms.size() < kMinSamples) {
    throw InvalidParameter("dataset has " + std::to_string(ms.size()) +
                           " samples; calibration needs at least " +
                           std::to_string(kMinSamples));
  }
  if (ms.joint_count() != table.joint_count()) {
    throw DimensionMismatch("dataset and DH table disagree on joint count");
  }

  const std::size_t joints = table.joint_count();
  const bool with_anchor = cfg.identify_anchor;
  const Split split = split_indices(ms.size(), cfg.train_fraction, cfg.seed);
  const MeasurementSet train = ms.subset(split.train);
  const MeasurementSet test = ms.subset(split.test);
  const RunContext ctx{table, train, joints, with_anchor};

  const Eigen::VectorXd half = cfg.box.half_widths(joints, with_anchor);
  const Bounds bounds = Bounds::symmetric(half);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(half.size());
  const FitnessFn f = [&ctx](const Eigen::VectorXd& v) { return ctx.train_fitness(v); };

  CalibrationReport rep;
  rep.method = to_string(method);
  rep.seed = cfg.seed;
  rep.joint_count = joints;
  rep.with_anchor = with_anchor;
  rep.train_indices = split.train;
  rep.test_indices = split.test;
  rep.config = cfg;

  Eigen::VectorXd w_est = zero;
  double w_est_f = ctx.train_fitness(zero);

  if (method == Method::kBas || method == Method::kCibas || method == Method::kPfCibas) {
    const SearchMethod sm = method == Method::kBas ? SearchMethod::kBas : SearchMethod::kCibas;
    const SearchResult sr = optimize(sm, resolve_search(cfg, bounds), f, zero);
    rep.search_trace = sr.trace;
    rep.eval_count += sr.eval_count;
    rep.cubic_accepts = sr.cubic_accepts;
    w_est = sr.best_w;
    w_est_f = sr.best_f;
  }

  if (method == Method::kPf || method == Method::kPfCibas) {
    const PfConfig pf = resolve_pf(cfg, bounds, half, ctx, w_est);
    const PfResult pr = pf_run(w_est, train, table, pf);
    rep.pf_ess_trace = pr.ess_trace;
    rep.pf_fitness_trace = pr.fitness_trace;
    rep.eval_count += pr.eval_count + 1;
    rep.r_sigma_mm = pf.r_sigma;
    const double pf_f = ctx.train_fitness(pr.w_est);
    // Keep whichever of the filter estimate and its starting point fits the
    // training data better.
    if (pf_f <= w_est_f) {
      w_est = pr.w_est;
      w_est_f = pf_f;
    } else {
      rep.pf_stage_rejected = true;
    }
  }

  rep.w_est = w_est;
  rep.train_fitness = w_est_f;
  const DeviationVector nominal = ctx.dev(zero);
  const DeviationVector calibrated = ctx.dev(w_est);
  rep.before = {metrics(residuals(train, table, nominal)),
                metrics(residuals(test, table, nominal))};
  rep.after = {metrics(residuals(train, table, calibrated)),
               metrics(residuals(test, table, calibrated))};
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

std::vector<MethodOutcome> compare(const std::vector<Method>& methods,
                                   const MeasurementSet& ms, const DhTable& table,
                                   const CalibrationConfig& cfg) {
  if (methods.empty()) throw InvalidParameter("compare needs at least one method");
  std::vector<MethodOutcome> out;
  out.reserve(methods.size());
  for (Method m : methods) {
    MethodOutcome o{m, std::nullopt, {}};
    try {
      o.report = calibrate(m, ms, table, cfg);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<std::vector<MethodOutcome>>& runs) {
  std::vector<SummaryRow> rows;
  if (runs.empty()) return rows;
  for (std::size_t k = 0; k < runs.front().size(); ++k) {
    SummaryRow row;
    row.method = to_string(runs.front()[k].method);
    std::vector<double> rmse, mae, mx, evals, wall;
    bool timed = true;
    for (const auto& run : runs) {
      const MethodOutcome& o = run.at(k);
      ++row.runs;
      if (!o.report) {
        ++row.failures;
        continue;
      }
      rmse.push_back(o.report->after.test.rmse_mm);
      mae.push_back(o.report->after.test.std_mm);
      mx.push_back(o.report->after.test.max_mm);
      evals.push_back(static_cast<double>(o.report->eval_count));
      if (o.report->wall_time_s) {
        wall.push_back(*o.report->wall_time_s);
      } else {
        timed = false;
      }
    }
    if (!rmse.empty()) {
      row.rmse_mm = median(rmse);
      row.std_mm = median(mae);
      row.max_mm = median(mx);
      row.evals = median(evals);
      if (timed) row.wall_s = median(wall);
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.rmse_mm = row.std_mm = row.max_mm = row.evals = nan;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "method,rmse_mm,std_mm,max_mm,evals,wall_s\n";
  for (const SummaryRow& r : rows) {
    out << r.method << ',' << format_double(r.rmse_mm) << ',' << format_double(r.std_mm)
        << ',' << format_double(r.max_mm) << ',' << format_double(r.evals) << ',';
    if (r.wall_s) out << format_double(*r.wall_s);
    out << '\n';
  }
}

void write_search_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "iter,best_f,evals\n";
  for (const TraceRecord& t : trace) {
    out << t.iter << ',' << format_double(t.best_f) << ',' << t.evals << '\n';
  }
}

void write_pf_trace_csv(std::ostream& out, const std::vector<double>& ess,
                        const std::vector<double>& fitness) {
  out << "step,ess,fitness_of_estimate\n";
  for (std::size_t i = 0; i < ess.size() && i < fitness.size(); ++i) {
    out << i + 1 << ',' << format_double(ess[i]) << ',' << format_double(fitness[i]) << '\n';
  }
}

}  // namespace cablecal
