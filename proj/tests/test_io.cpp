#include "doctest.h"
#include "test_support.hpp"

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "cablecal/error.hpp"
#include "cablecal/io.hpp"
#include "cablecal/report_io.hpp"
#include "cablecal/simdata.hpp"

using namespace cablecal;
using namespace testsupport;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "cablecal_test_io";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("doubles round-trip through text") {
  Rng rng(71);
  for (int k = 0; k < 1000; ++k) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-300, 300));
    CHECK(parse_double(format_double(v)) == v);
  }
  for (double v : {0.0, -0.0, 1.0, 0.1, std::numeric_limits<double>::denorm_min(),
                   std::numeric_limits<double>::max()}) {
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK_THROWS_AS(parse_double("1.5x"), IoError);
  CHECK_THROWS_AS(parse_double(""), IoError);
}

TEST_CASE("DH table parsing") {
  std::istringstream in(
      "# comment line\n"
      "\n"
      "1, 2, 0.5, -1.5   # trailing comment\n"
      "0 0 0 0\n");
  const DhTable t = parse_dh_table(in);
  REQUIRE(t.joint_count() == 2);
  CHECK(t[0] == DhLink{1, 2, 0.5, -1.5});
  CHECK(t[1] == DhLink{});

  std::istringstream three("1 2 3\n");
  CHECK_THROWS_AS(parse_dh_table(three), IoError);
  std::istringstream empty("# nothing\n");
  CHECK_THROWS_AS(parse_dh_table(empty), IoError);
  std::istringstream junk("1 2 x 4\n");
  CHECK_THROWS_AS(parse_dh_table(junk), IoError);
  CHECK_THROWS_AS(read_dh_table(temp_dir() / "missing.dh"), IoError);
}

TEST_CASE("DH tables round-trip bit for bit") {
  Rng rng(72);
  const DhTable t = random_table(rng, 6);
  const auto path = temp_dir() / "table.dh";
  write_dh_table(path, t);
  CHECK(read_dh_table(path) == t);
  CHECK(read_dh_table(data_path("demo6r.dh")).joint_count() == 6);
}

TEST_CASE("datasets round-trip bit for bit") {
  const DhTable t = read_dh_table(data_path("demo6r.dh"));
  ScenarioConfig cfg;
  cfg.noise.outlier_rate = 0.05;
  cfg.deviation_scale.anchor = 1.0;
  const SimulatedData sim = simulate_measurements(t, cfg);
  const Dataset d{sim.ms, cfg.seed, sim.truth.values()};
  const auto path = temp_dir() / "data.csv";
  write_dataset(path, d);
  const Dataset back = read_dataset(path);
  CHECK(back == d);
  const auto truth = truth_deviation(back);
  REQUIRE(truth.has_value());
  CHECK(*truth == sim.truth);

  std::ostringstream a, b;
  write_dataset(a, d);
  write_dataset(b, back);
  CHECK(a.str() == b.str());
}

TEST_CASE("datasets without metadata") {
  std::istringstream in(
      "# anchor_mm: 1 2 3\n"
      "q1,q2,L_mm\n"
      "0.1,0.2,3.5\n"
      "0.3,0.4,4.5\n");
  const Dataset d = parse_dataset(in);
  CHECK(d.ms.size() == 2);
  CHECK(d.ms.joint_count() == 2);
  CHECK(d.ms.anchor() == Eigen::Vector3d(1, 2, 3));
  CHECK_FALSE(d.seed.has_value());
  CHECK_FALSE(truth_deviation(d).has_value());

  std::istringstream no_anchor("q1,L_mm\n0.1,3\n");
  CHECK_THROWS_AS(parse_dataset(no_anchor), IoError);
  std::istringstream ragged("# anchor_mm: 0 0 0\nq1,q2,L_mm\n0.1,3\n");
  CHECK_THROWS_AS(parse_dataset(ragged), IoError);
  std::istringstream bad_truth("# anchor_mm: 0 0 0\n# truth: 1 2 3\nq1,L_mm\n0.1,3\n");
  CHECK_THROWS_AS(parse_dataset(bad_truth), IoError);
}

TEST_CASE("configuration JSON overlays onto a base") {
  CalibrationConfig base;
  base.seed = 9;
  base.search.max_iters = 77;
  const Json j = to_json(base);
  const CalibrationConfig back = calibration_config_from_json(j);
  CHECK(to_json(back) == j);

  const CalibrationConfig partial =
      calibration_config_from_json(Json::parse(R"({"search": {"mu": 0.5}})"), base);
  CHECK(partial.search.mu == 0.5);
  CHECK(partial.search.max_iters == 77);
  CHECK(partial.seed == 9);
  CHECK_THROWS_AS(calibration_config_from_json(Json::parse(R"({"bogus": 1})")), InvalidParameter);
  CHECK_THROWS_AS(calibration_config_from_json(Json::parse(R"({"seed": "x"})")), InvalidParameter);

  ScenarioConfig sc;
  sc.noise.outlier_rate = 0.05;
  sc.joint_limits = {{-1, 1}, {-2, 2}};
  const Json sj = to_json(sc);
  CHECK(to_json(scenario_config_from_json(sj)) == sj);
}
