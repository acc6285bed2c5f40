#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cablecal/error.hpp"
#include "cablecal/io.hpp"
#include "cablecal/pipeline.hpp"
#include "cablecal/report_io.hpp"
#include "cablecal/simdata.hpp"
#include "selfcheck.hpp"

namespace cablecal::cli {

namespace fs = std::filesystem;

namespace {

/// Raised for invalid option combinations found after parsing.
struct UsageError : Error {
  using Error::Error;
};

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

/// Seed from the flag, else from the config document, else a fresh one that
/// is logged so the run can be repeated.
std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t flag_value,
                           const Json* config, std::ostream& err) {
  if (flag->count() > 0) return flag_value;
  if (config && config->contains("seed")) return config->at("seed").get<std::uint64_t>();
  const std::uint64_t s = fresh_seed();
  err << "seed: " << s << " (generated)\n";
  return s;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

void save_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_json(path, j);
}

void print_metrics_table(std::ostream& out, const CalibrationReport& rep) {
  out << "method " << rep.method << "  seed " << rep.seed << "  train "
      << rep.train_indices.size() << "  test " << rep.test_indices.size() << "\n";
  out << "split  stage   rmse_mm    std_mm     max_mm\n";
  auto row = [&](const char* split, const char* stage, const Metrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-6s %-7s %-10s %-10s %s\n", split, stage,
                  fixed(m.rmse_mm).c_str(), fixed(m.std_mm).c_str(), fixed(m.max_mm).c_str());
    out << buf;
  };
  row("train", "before", rep.before.train);
  row("train", "after", rep.after.train);
  row("test", "before", rep.before.test);
  row("test", "after", rep.after.test);
  if (rep.pf_stage_rejected) out << "filter estimate rejected; kept the search estimate\n";
}

void write_traces(const fs::path& dir, const std::string& stem, const CalibrationReport& rep) {
  if (!rep.search_trace.empty()) {
    std::ofstream f = open_out(dir / (stem + "search_trace.csv"));
    write_search_trace_csv(f, rep.search_trace);
  }
  if (!rep.pf_ess_trace.empty()) {
    std::ofstream f = open_out(dir / (stem + "pf_trace.csv"));
    write_pf_trace_csv(f, rep.pf_ess_trace, rep.pf_fitness_trace);
  }
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string dh, out, config;
  int n = 120;
  double sigma = 0.1, outlier_rate = 0.0, outlier_scale = 10.0;
  double scale_a = 0.5, scale_d = 0.5, scale_theta = 0.005, scale_alpha = 0.005,
         scale_anchor = 0.0;
  std::vector<double> anchor;
  std::uint64_t seed = 0;
  CLI::App* cmd = nullptr;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  a.cmd = app.add_subcommand("simulate", "Generate a synthetic cable-length dataset");
  a.cmd->add_option("--dh", a.dh, "Nominal DH table file")->required();
  a.cmd->add_option("--out", a.out, "Dataset CSV to write")->required();
  a.cmd->add_option("--config", a.config, "Scenario config JSON");
  a.cmd->add_option("--n", a.n, "Number of configurations")->check(CLI::Range(1, 10000000));
  a.cmd->add_option("--sigma", a.sigma, "Noise std [mm]")->check(CLI::NonNegativeNumber);
  a.cmd->add_option("--outlier-rate", a.outlier_rate, "Outlier probability")->check(CLI::Range(0.0, 1.0));
  a.cmd->add_option("--outlier-scale", a.outlier_scale, "Outlier std multiplier")
      ->check(CLI::Range(1.0, 1e12));
  a.cmd->add_option("--scale-a", a.scale_a, "Truth half-range of da [mm]")->check(CLI::NonNegativeNumber);
  a.cmd->add_option("--scale-d", a.scale_d, "Truth half-range of dd [mm]")->check(CLI::NonNegativeNumber);
  a.cmd->add_option("--scale-theta", a.scale_theta, "Truth half-range of dtheta [rad]")
      ->check(CLI::NonNegativeNumber);
  a.cmd->add_option("--scale-alpha", a.scale_alpha, "Truth half-range of dalpha [rad]")
      ->check(CLI::NonNegativeNumber);
  a.cmd->add_option("--scale-anchor", a.scale_anchor, "Truth half-range of the anchor offset [mm]")
      ->check(CLI::NonNegativeNumber);
  a.cmd->add_option("--anchor", a.anchor, "Anchor position x y z [mm]")->expected(3);
  a.cmd->add_option("--seed", a.seed, "Random seed");
}

template <typename T>
void overlay(const CLI::App* cmd, const char* name, const T& value, T& target) {
  if (cmd->get_option(name)->count() > 0) target = value;
}

int run_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const DhTable table = read_dh_table(a.dh);
  std::optional<Json> doc;
  if (!a.config.empty()) doc = read_json(a.config);

  ScenarioConfig sc;
  if (doc) sc = scenario_config_from_json(*doc, sc);
  const CLI::App* c = a.cmd;
  overlay(c, "--n", a.n, sc.n_points);
  overlay(c, "--sigma", a.sigma, sc.noise.sigma);
  overlay(c, "--outlier-rate", a.outlier_rate, sc.noise.outlier_rate);
  overlay(c, "--outlier-scale", a.outlier_scale, sc.noise.outlier_scale);
  overlay(c, "--scale-a", a.scale_a, sc.deviation_scale.a);
  overlay(c, "--scale-d", a.scale_d, sc.deviation_scale.d);
  overlay(c, "--scale-theta", a.scale_theta, sc.deviation_scale.theta);
  overlay(c, "--scale-alpha", a.scale_alpha, sc.deviation_scale.alpha);
  overlay(c, "--scale-anchor", a.scale_anchor, sc.deviation_scale.anchor);
  if (!a.anchor.empty()) sc.anchor_mm = Eigen::Vector3d(a.anchor[0], a.anchor[1], a.anchor[2]);
  sc.seed = resolve_seed(c->get_option("--seed"), a.seed, doc ? &*doc : nullptr, err);

  const SimulatedData sim = simulate_measurements(table, sc);
  Dataset data{sim.ms, sc.seed, sim.truth.values()};
  {
    std::ofstream f = open_out(a.out);
    write_dataset(f, data);
  }
  const DeviationVector zero(table.joint_count(), false);
  const Metrics pre = metrics(residuals(sim.ms, table, zero));
  out << "samples " << sim.ms.size() << "\n";
  out << "seed " << sc.seed << "\n";
  out << "pre-calibration rmse_mm " << fixed(pre.rmse_mm) << "\n";
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- calibrate

/// Options shared by calibrate and compare.
struct RunOptions {
  std::string dh, config;
  std::uint64_t seed = 0;
  int iters = 0;
  int particles = 0;
  int pf_steps = 0;
  bool identify_anchor = false;
  bool timing = false;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--dh", o.dh, "Nominal DH table file")->required();
  cmd->add_option("--config", o.config, "Calibration config JSON");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--iters", o.iters, "Search iterations")->check(CLI::Range(1, 100000000));
  cmd->add_option("--particles", o.particles, "Particle count")->check(CLI::Range(1, 100000000));
  cmd->add_option("--pf-steps", o.pf_steps, "Particle filter steps")->check(CLI::Range(1, 100000000));
  cmd->add_flag("--identify-anchor", o.identify_anchor, "Also estimate the anchor offset");
  cmd->add_flag("--timing", o.timing, "Record wall-clock time in outputs");
}

/// Defaults, then the config file, then flags.
CalibrationConfig resolve_config(const CLI::App* cmd, const RunOptions& o,
                                 std::ostream& err) {
  std::optional<Json> doc;
  if (!o.config.empty()) doc = read_json(o.config);
  CalibrationConfig cfg;
  if (doc) cfg = calibration_config_from_json(*doc, cfg);
  overlay(cmd, "--iters", o.iters, cfg.search.max_iters);
  overlay(cmd, "--particles", o.particles, cfg.pf.n_particles);
  overlay(cmd, "--pf-steps", o.pf_steps, cfg.pf.n_steps);
  if (o.identify_anchor) cfg.identify_anchor = true;
  cfg.seed = resolve_seed(cmd->get_option("--seed"), o.seed, doc ? &*doc : nullptr, err);
  return cfg;
}

struct CalibrateArgs {
  RunOptions run;
  std::string method, data, out = "report.json", trace_dir;
  CLI::App* cmd = nullptr;
};

const std::vector<std::string> kMethodNames{"bas", "cibas", "pf", "pf-cibas"};

void add_calibrate(CLI::App& app, CalibrateArgs& a) {
  a.cmd = app.add_subcommand("calibrate", "Calibrate a DH table against a dataset");
  a.cmd->add_option("--method", a.method, "bas | cibas | pf | pf-cibas")
      ->required()
      ->check(CLI::IsMember(kMethodNames));
  a.cmd->add_option("--data", a.data, "Dataset CSV")->required();
  a.cmd->add_option("--out", a.out, "Report JSON to write")->capture_default_str();
  a.cmd->add_option("--trace-dir", a.trace_dir, "Directory for convergence trace CSVs");
  add_run_options(a.cmd, a.run);
}

int run_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  const DhTable table = read_dh_table(a.run.dh);
  const Dataset data = read_dataset(a.data);
  const CalibrationConfig cfg = resolve_config(a.cmd, a.run, err);

  CalibrationReport rep = calibrate(parse_method(a.method), data.ms, table, cfg);
  if (!a.run.timing) rep.wall_time_s.reset();
  save_json(a.out, to_json(rep));
  if (!a.trace_dir.empty()) write_traces(a.trace_dir, "", rep);

  print_metrics_table(out, rep);
  if (rep.wall_time_s) out << "wall_s " << fixed(*rep.wall_time_s, 3) << "\n";
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  RunOptions run;
  std::string methods, data, out_dir = "compare_out", scenario_config;
  int seeds = 1;
  int n = 120;
  double sigma = 0.1, outlier_rate = 0.0, outlier_scale = 10.0;
  CLI::App* cmd = nullptr;
};

void add_compare(CLI::App& app, CompareArgs& a) {
  a.cmd = app.add_subcommand("compare", "Run several methods over several seeds");
  a.cmd->add_option("--methods", a.methods, "Comma-separated methods")
      ->required()
      ->check([](const std::string& s) {
        try {
          parse_method_list(s);
        } catch (const Error& e) {
          return std::string(e.what());
        }
        return std::string();
      });
  a.cmd->add_option("--seeds", a.seeds, "Number of seeds")->check(CLI::Range(1, 100000));
  a.cmd->add_option("--data", a.data, "Dataset CSV; otherwise one synthetic set per seed");
  a.cmd->add_option("--out-dir", a.out_dir, "Output directory")->capture_default_str();
  a.cmd->add_option("--scenario-config", a.scenario_config, "Scenario config JSON");
  a.cmd->add_option("--n", a.n, "Synthetic set size")->check(CLI::Range(1, 10000000));
  a.cmd->add_option("--sigma", a.sigma, "Synthetic noise std [mm]")->check(CLI::NonNegativeNumber);
  a.cmd->add_option("--outlier-rate", a.outlier_rate, "Synthetic outlier probability")
      ->check(CLI::Range(0.0, 1.0));
  a.cmd->add_option("--outlier-scale", a.outlier_scale, "Synthetic outlier std multiplier")
      ->check(CLI::Range(1.0, 1e12));
  add_run_options(a.cmd, a.run);
}

int run_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.data.empty() && a.cmd->get_option("--scenario-config")->count() > 0) {
    throw UsageError("--scenario-config only applies to synthetic data");
  }
  const DhTable table = read_dh_table(a.run.dh);
  const std::vector<Method> methods = parse_method_list(a.methods);
  std::optional<Dataset> fixed_data;
  if (!a.data.empty()) fixed_data = read_dataset(a.data);

  ScenarioConfig scenario;
  if (!a.scenario_config.empty()) {
    scenario = scenario_config_from_json(read_json(a.scenario_config), scenario);
  }
  overlay(a.cmd, "--n", a.n, scenario.n_points);
  overlay(a.cmd, "--sigma", a.sigma, scenario.noise.sigma);
  overlay(a.cmd, "--outlier-rate", a.outlier_rate, scenario.noise.outlier_rate);
  overlay(a.cmd, "--outlier-scale", a.outlier_scale, scenario.noise.outlier_scale);

  const CalibrationConfig base = resolve_config(a.cmd, a.run, err);
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);

  std::vector<std::vector<MethodOutcome>> runs;
  bool any_failed = false;
  for (int k = 0; k < a.seeds; ++k) {
    const std::uint64_t seed = base.seed + static_cast<std::uint64_t>(k);
    CalibrationConfig cfg = base;
    cfg.seed = seed;
    MeasurementSet ms = fixed_data ? fixed_data->ms : [&] {
      ScenarioConfig sc = scenario;
      sc.seed = seed;
      const SimulatedData sim = simulate_measurements(table, sc);
      std::ofstream f = open_out(dir / "data" / ("seed" + std::to_string(seed) + ".csv"));
      write_dataset(f, Dataset{sim.ms, seed, sim.truth.values()});
      return sim.ms;
    }();

    std::vector<MethodOutcome> outcomes = compare(methods, ms, table, cfg);
    for (MethodOutcome& o : outcomes) {
      const std::string stem = to_string(o.method) + "_seed" + std::to_string(seed);
      if (!o.report) {
        any_failed = true;
        err << "error: " << stem << ": " << o.error << "\n";
        continue;
      }
      if (!a.run.timing) o.report->wall_time_s.reset();
      save_json(dir / "reports" / (stem + ".json"), to_json(*o.report));
      write_traces(dir / "traces", stem + "_", *o.report);
    }
    runs.push_back(std::move(outcomes));
  }

  const std::vector<SummaryRow> rows = summarize(runs);
  {
    std::ofstream f = open_out(dir / "summary.csv");
    write_summary_csv(f, rows);
  }
  out << "median held-out metrics over " << a.seeds << " seed(s)\n";
  out << "method     rmse_mm    std_mm     max_mm     evals      failures\n";
  for (const SummaryRow& r : rows) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-10s %-10s %-10s %-10s %-10.0f %d\n", r.method.c_str(),
                  fixed(r.rmse_mm).c_str(), fixed(r.std_mm).c_str(), fixed(r.max_mm).c_str(),
                  r.evals, r.failures);
    out << buf;
  }
  out << "wrote " << (dir / "summary.csv").string() << "\n";
  return any_failed ? kExitFailure : kExitOk;
}

// ---------------------------------------------------------------- check

struct CheckArgs {
  std::string dh;
  bool verbose = false;
  CLI::App* cmd = nullptr;
};

void add_check(CLI::App& app, CheckArgs& a) {
  a.cmd = app.add_subcommand("check", "Run the numeric self-checks");
  a.cmd->add_option("--dh", a.dh, "Also check this DH table");
  a.cmd->add_flag("--verbose", a.verbose, "Print the worst observed error per check");
}

int run_check(const CheckArgs& a, std::ostream& out) {
  std::optional<DhTable> table;
  if (!a.dh.empty()) table = read_dh_table(a.dh);
  const std::vector<CheckResult> results = run_self_checks(table ? &*table : nullptr);
  bool ok = true;
  for (const CheckResult& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << "\n";
    if (a.verbose) out << "     " << r.detail << " (tolerance " << r.tolerance << ")\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cable-length robot calibration with BAS, CIBAS and particle filters",
               "cablecal"};
  app.require_subcommand(1);
  SimulateArgs sim;
  CalibrateArgs cal;
  CompareArgs cmp;
  CheckArgs chk;
  add_simulate(app, sim);
  add_calibrate(app, cal);
  add_compare(app, cmp);
  add_check(app, chk);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim.cmd) return run_simulate(sim, out, err);
    if (*cal.cmd) return run_calibrate(cal, out, err);
    if (*cmp.cmd) return run_compare(cmp, out, err);
    return run_check(chk, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace cablecal::cli
