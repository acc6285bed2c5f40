#include "cablecal/report_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

// JSON has no inf/nan literals; spell them as strings.
Json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double as_num(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw InvalidParameter("expected a number, got " + j.dump());
}

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

Eigen::VectorXd as_vec(const Json& j) {
  if (!j.is_array()) throw InvalidParameter("expected an array, got " + j.dump());
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_num(j[i]);
  return v;
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const char* where) {
  if (!j.is_object()) throw InvalidParameter(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw InvalidParameter("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void take(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      out = as_num(j.at(key));
    } else {
      out = j.at(key).get<T>();
    }
  } catch (const Json::exception& e) {
    throw InvalidParameter(std::string("bad value for '") + key + "': " + e.what());
  }
}

Json metrics_json(const Metrics& m) {
  return Json{{"rmse_mm", num(m.rmse_mm)}, {"std_mm", num(m.std_mm)}, {"max_mm", num(m.max_mm)}};
}

Metrics metrics_from(const Json& j) {
  return {as_num(j.at("rmse_mm")), as_num(j.at("std_mm")), as_num(j.at("max_mm"))};
}

Json split_json(const SplitMetrics& s) {
  return Json{{"train", metrics_json(s.train)}, {"test", metrics_json(s.test)}};
}

SplitMetrics split_from(const Json& j) {
  return {metrics_from(j.at("train")), metrics_from(j.at("test"))};
}

Json doubles(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> as_doubles(const Json& j) {
  std::vector<double> v;
  for (const Json& x : j) v.push_back(as_num(x));
  return v;
}

}  // namespace

Json to_json(const CalibrationConfig& cfg) {
  Json search{{"delta0", num(cfg.search.delta0)},
              {"mu", num(cfg.search.mu)},
              {"m0_ratio", num(cfg.search.m0_ratio)},
              {"max_iters", cfg.search.max_iters},
              {"fitness_tol", num(cfg.search.fitness_tol)},
              {"stall_iters", cfg.search.stall_iters},
              {"trust_ratio", num(cfg.search.trust_ratio)},
              {"restarts", cfg.search.restarts}};
  Json pf{{"n_particles", cfg.pf.n_particles},
          {"n_steps", cfg.pf.n_steps},
          {"r_sigma_mm", num(cfg.pf.r_sigma)},
          {"ess_threshold", num(cfg.pf.ess_threshold)},
          {"process_fraction", num(cfg.pf_process_fraction)},
          {"init_factor", num(cfg.pf_init_factor)}};
  if (cfg.pf.process_sigma.size() != 0) pf["process_sigma"] = vec(cfg.pf.process_sigma);
  if (cfg.pf.init_spread.size() != 0) pf["init_spread"] = vec(cfg.pf.init_spread);
  return Json{{"seed", cfg.seed},
              {"identify_anchor", cfg.identify_anchor},
              {"train_fraction", num(cfg.train_fraction)},
              {"box",
               {{"a_mm", num(cfg.box.a_mm)},
                {"d_mm", num(cfg.box.d_mm)},
                {"theta_rad", num(cfg.box.theta_rad)},
                {"alpha_rad", num(cfg.box.alpha_rad)},
                {"anchor_mm", num(cfg.box.anchor_mm)}}},
              {"search", search},
              {"pf", pf}};
}

CalibrationConfig calibration_config_from_json(const Json& j, CalibrationConfig cfg) {
  check_keys(j, {"seed", "identify_anchor", "train_fraction", "box", "search", "pf"},
             "calibration config");
  take(j, "seed", cfg.seed);
  take(j, "identify_anchor", cfg.identify_anchor);
  take(j, "train_fraction", cfg.train_fraction);
  if (j.contains("box")) {
    const Json& b = j.at("box");
    check_keys(b, {"a_mm", "d_mm", "theta_rad", "alpha_rad", "anchor_mm"}, "box");
    take(b, "a_mm", cfg.box.a_mm);
    take(b, "d_mm", cfg.box.d_mm);
    take(b, "theta_rad", cfg.box.theta_rad);
    take(b, "alpha_rad", cfg.box.alpha_rad);
    take(b, "anchor_mm", cfg.box.anchor_mm);
  }
  if (j.contains("search")) {
    const Json& s = j.at("search");
    check_keys(s, {"delta0", "mu", "m0_ratio", "max_iters", "fitness_tol", "stall_iters",
                   "trust_ratio", "restarts"},
               "search");
    take(s, "delta0", cfg.search.delta0);
    take(s, "mu", cfg.search.mu);
    take(s, "m0_ratio", cfg.search.m0_ratio);
    take(s, "max_iters", cfg.search.max_iters);
    take(s, "fitness_tol", cfg.search.fitness_tol);
    take(s, "stall_iters", cfg.search.stall_iters);
    take(s, "trust_ratio", cfg.search.trust_ratio);
    take(s, "restarts", cfg.search.restarts);
  }
  if (j.contains("pf")) {
    const Json& p = j.at("pf");
    check_keys(p, {"n_particles", "n_steps", "r_sigma_mm", "ess_threshold", "process_fraction",
                   "init_factor", "process_sigma", "init_spread"},
               "pf");
    take(p, "n_particles", cfg.pf.n_particles);
    take(p, "n_steps", cfg.pf.n_steps);
    take(p, "r_sigma_mm", cfg.pf.r_sigma);
    take(p, "ess_threshold", cfg.pf.ess_threshold);
    take(p, "process_fraction", cfg.pf_process_fraction);
    take(p, "init_factor", cfg.pf_init_factor);
    if (p.contains("process_sigma")) cfg.pf.process_sigma = as_vec(p.at("process_sigma"));
    if (p.contains("init_spread")) cfg.pf.init_spread = as_vec(p.at("init_spread"));
  }
  return cfg;
}

Json to_json(const ScenarioConfig& cfg) {
  Json limits = Json::array();
  for (const JointLimit& l : cfg.joint_limits) limits.push_back({num(l.lower), num(l.upper)});
  const DeviationScale& s = cfg.deviation_scale;
  return Json{{"seed", cfg.seed},
              {"n_points", cfg.n_points},
              {"anchor_mm", vec(cfg.anchor_mm)},
              {"joint_limits", limits},
              {"noise",
               {{"sigma_mm", num(cfg.noise.sigma)},
                {"outlier_rate", num(cfg.noise.outlier_rate)},
                {"outlier_scale", num(cfg.noise.outlier_scale)}}},
              {"deviation_scale",
               {{"a_mm", num(s.a)},
                {"d_mm", num(s.d)},
                {"theta_rad", num(s.theta)},
                {"alpha_rad", num(s.alpha)},
                {"anchor_mm", num(s.anchor)}}}};
}

ScenarioConfig scenario_config_from_json(const Json& j, ScenarioConfig cfg) {
  check_keys(j, {"seed", "n_points", "anchor_mm", "joint_limits", "noise", "deviation_scale"},
             "scenario config");
  take(j, "seed", cfg.seed);
  take(j, "n_points", cfg.n_points);
  if (j.contains("anchor_mm")) {
    const Eigen::VectorXd a = as_vec(j.at("anchor_mm"));
    if (a.size() != 3) throw InvalidParameter("anchor_mm needs 3 values");
    cfg.anchor_mm = a;
  }
  if (j.contains("joint_limits")) {
    cfg.joint_limits.clear();
    for (const Json& l : j.at("joint_limits")) {
      if (!l.is_array() || l.size() != 2) {
        throw InvalidParameter("joint_limits entries must be [lower, upper]");
      }
      cfg.joint_limits.push_back({as_num(l[0]), as_num(l[1])});
    }
  }
  if (j.contains("noise")) {
    const Json& n = j.at("noise");
    check_keys(n, {"sigma_mm", "outlier_rate", "outlier_scale"}, "noise");
    take(n, "sigma_mm", cfg.noise.sigma);
    take(n, "outlier_rate", cfg.noise.outlier_rate);
    take(n, "outlier_scale", cfg.noise.outlier_scale);
  }
  if (j.contains("deviation_scale")) {
    const Json& s = j.at("deviation_scale");
    check_keys(s, {"a_mm", "d_mm", "theta_rad", "alpha_rad", "anchor_mm"}, "deviation_scale");
    take(s, "a_mm", cfg.deviation_scale.a);
    take(s, "d_mm", cfg.deviation_scale.d);
    take(s, "theta_rad", cfg.deviation_scale.theta);
    take(s, "alpha_rad", cfg.deviation_scale.alpha);
    take(s, "anchor_mm", cfg.deviation_scale.anchor);
  }
  return cfg;
}

Json to_json(const CalibrationReport& rep) {
  Json trace = Json::array();
  for (const TraceRecord& t : rep.search_trace) trace.push_back({t.iter, num(t.best_f), t.evals});
  return Json{{"method", rep.method},
              {"seed", rep.seed},
              {"joint_count", rep.joint_count},
              {"with_anchor", rep.with_anchor},
              {"w_est", vec(rep.w_est)},
              {"metrics_before", split_json(rep.before)},
              {"metrics_after", split_json(rep.after)},
              {"train_fitness_mm2", num(rep.train_fitness)},
              {"eval_count", rep.eval_count},
              {"cubic_accepts", rep.cubic_accepts},
              {"r_sigma_mm", num(rep.r_sigma_mm)},
              {"pf_stage_rejected", rep.pf_stage_rejected},
              {"wall_time_s", rep.wall_time_s ? num(*rep.wall_time_s) : Json(nullptr)},
              {"split", {{"train", rep.train_indices}, {"test", rep.test_indices}}},
              {"traces",
               {{"search", trace},
                {"pf_ess", doubles(rep.pf_ess_trace)},
                {"pf_fitness", doubles(rep.pf_fitness_trace)}}},
              {"config", to_json(rep.config)}};
}

CalibrationReport report_from_json(const Json& j) {
  try {
    CalibrationReport rep;
    rep.method = j.at("method").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.joint_count = j.at("joint_count").get<std::size_t>();
    rep.with_anchor = j.at("with_anchor").get<bool>();
    rep.w_est = as_vec(j.at("w_est"));
    rep.before = split_from(j.at("metrics_before"));
    rep.after = split_from(j.at("metrics_after"));
    rep.train_fitness = as_num(j.at("train_fitness_mm2"));
    rep.eval_count = j.at("eval_count").get<std::uint64_t>();
    rep.cubic_accepts = j.at("cubic_accepts").get<int>();
    rep.r_sigma_mm = as_num(j.at("r_sigma_mm"));
    rep.pf_stage_rejected = j.at("pf_stage_rejected").get<bool>();
    if (!j.at("wall_time_s").is_null()) rep.wall_time_s = as_num(j.at("wall_time_s"));
    rep.train_indices = j.at("split").at("train").get<std::vector<std::size_t>>();
    rep.test_indices = j.at("split").at("test").get<std::vector<std::size_t>>();
    for (const Json& t : j.at("traces").at("search")) {
      rep.search_trace.push_back({t.at(0).get<int>(), as_num(t.at(1)), t.at(2).get<std::uint64_t>()});
    }
    rep.pf_ess_trace = as_doubles(j.at("traces").at("pf_ess"));
    rep.pf_fitness_trace = as_doubles(j.at("traces").at("pf_fitness"));
    rep.config = calibration_config_from_json(j.at("config"));
    return rep;
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }
}

bool CalibrationReport::operator==(const CalibrationReport& o) const {
  // Compare through the serialized form; NaNs compare equal there.
  return to_json(*this) == to_json(o);
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace cablecal
