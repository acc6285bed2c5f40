/**
 * @file pipeline.hpp
 * @brief End-to-end calibration runs: bas, cibas, pf and the two-stage
 * pf-cibas method, with before/after metrics on a seeded train/test split.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cablecal/kinematics.hpp"
#include "cablecal/objective.hpp"
#include "cablecal/optimizer.hpp"
#include "cablecal/particle_filter.hpp"

namespace cablecal {

enum class Method { kBas, kCibas, kPf, kPfCibas };

std::string to_string(Method m);
/// @throws InvalidParameter on unknown names.
Method parse_method(const std::string& name);
/// Comma-separated list, e.g. "bas,cibas,pf,pf-cibas".
std::vector<Method> parse_method_list(const std::string& list);

/// Half-widths of the search box per parameter block.
struct ParameterBox {
  double a_mm = 3.0;
  double d_mm = 3.0;
  double theta_rad = 0.01;
  double alpha_rad = 0.01;
  double anchor_mm = 5.0;

  Eigen::VectorXd half_widths(std::size_t joint_count, bool with_anchor) const;
  bool operator==(const ParameterBox&) const = default;
};

/**
 * @brief Everything a calibration run depends on.
 *
 * `search.bounds`, `search.seed`, `pf.bounds`, `pf.seed`, `pf.process_sigma`
 * and `pf.init_spread` are derived per run from `box`, `seed`,
 * `pf_process_fraction` and `pf_init_factor`. `pf.r_sigma <= 0` means
 * "estimate from the residuals at the filter's center" (1.4826 * MAD).
 */
struct CalibrationConfig {
  std::uint64_t seed = 1;
  bool identify_anchor = false;
  double train_fraction = 2.0 / 3.0;
  ParameterBox box;
  SearchConfig search;
  PfConfig pf = default_pf();
  double pf_process_fraction = 0.01;
  double pf_init_factor = 3.0;

  static PfConfig default_pf() {
    PfConfig p;
    p.r_sigma = 0.0;
    return p;
  }
};

struct SplitMetrics {
  Metrics train;
  Metrics test;
  bool operator==(const SplitMetrics&) const = default;
};

struct CalibrationReport {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t joint_count = 0;
  bool with_anchor = false;
  Eigen::VectorXd w_est;
  SplitMetrics before;  ///< nominal model (w = 0)
  SplitMetrics after;   ///< calibrated model
  double train_fitness = 0.0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::vector<TraceRecord> search_trace;
  std::vector<double> pf_ess_trace;
  std::vector<double> pf_fitness_trace;
  std::uint64_t eval_count = 0;
  int cubic_accepts = 0;
  double r_sigma_mm = 0.0;          ///< 0 when no filter stage ran
  bool pf_stage_rejected = false;   ///< filter estimate lost to its start point
  std::optional<double> wall_time_s;
  CalibrationConfig config;

  DeviationVector deviation() const { return DeviationVector(joint_count, with_anchor, w_est); }
  bool operator==(const CalibrationReport&) const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle; round(n * train_fraction) samples train, the rest test.
/// @throws InvalidParameter when either side would be empty.
Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed);

inline constexpr std::size_t kMinSamples = 10;

/// 1.4826 * median absolute deviation, floored at 1e-9.
double robust_sigma(const Eigen::VectorXd& r);

/**
 * @brief Calibrates @p table against @p ms with the chosen method.
 * @throws InvalidParameter on datasets with fewer than kMinSamples samples
 * or invalid configuration.
 */
CalibrationReport calibrate(Method method, const MeasurementSet& ms,
                            const DhTable& table, const CalibrationConfig& cfg);

struct MethodOutcome {
  Method method;
  std::optional<CalibrationReport> report;
  std::string error;  ///< set when the run threw
};

/// Runs every method on the same data and config (hence the same split).
/// A failing method is recorded and does not stop the others.
std::vector<MethodOutcome> compare(const std::vector<Method>& methods,
                                   const MeasurementSet& ms, const DhTable& table,
                                   const CalibrationConfig& cfg);

/// One summary line: medians over runs of the held-out metrics after
/// calibration, evaluation counts and wall time.
struct SummaryRow {
  std::string method;
  double rmse_mm = 0.0;
  double std_mm = 0.0;
  double max_mm = 0.0;
  double evals = 0.0;
  std::optional<double> wall_s;
  int runs = 0;
  int failures = 0;
};

double median(std::vector<double> v);

/// @p runs holds one compare() result per seed, methods in the same order.
std::vector<SummaryRow> summarize(const std::vector<std::vector<MethodOutcome>>& runs);

/// Columns: method,rmse_mm,std_mm,max_mm,evals,wall_s (wall_s empty when
/// timing was not recorded).
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Columns: iter,best_f,evals
void write_search_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);

/// Columns: step,ess,fitness_of_estimate
void write_pf_trace_csv(std::ostream& out, const std::vector<double>& ess,
                        const std::vector<double>& fitness);

}  // namespace cablecal
