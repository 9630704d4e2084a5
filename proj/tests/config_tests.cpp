#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vorocover/config.hpp"
#include "vorocover/driver.hpp"
#include "vorocover/metrics_io.hpp"
#include "vorocover/sim.hpp"

using namespace vorocover;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << body;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* kMinimalConfig = R"(
densities:
  - name: solo
    offset: 0.1
    components:
      - {weight: 0.4, mean: [0.5, 0.5], std: 0.2}
)";

}  // namespace

TEST_CASE("a minimal config materializes the documented defaults") {
  const ExperimentSpec spec = load_config(write_temp("vc_minimal.yaml", kMinimalConfig));
  REQUIRE(spec.scenarios.size() == 1);
  const ScenarioConfig& s = spec.scenarios.front();
  CHECK(s.robot_count == 7);
  CHECK(s.iterations == 15);
  CHECK(s.domain.grid_resolution() == 100);
  CHECK(s.measurement.noise_std == 0.1);
  CHECK(s.schedules.beta.size() == 15);
  CHECK(s.schedules.gamma.front() == Catch::Approx(0.9));
  CHECK(s.gp_search.tau_min == Catch::Approx(0.02 * std::sqrt(2.0)));
  CHECK(s.gp_search.tau_max == Catch::Approx(2.0 * std::sqrt(2.0)));
  CHECK(spec.modes.size() == 3);
  CHECK(spec.seeds.size() == 5);
  CHECK(spec.output_dir == "out");
}

TEST_CASE("a non-decreasing gamma schedule is rejected at load") {
  const std::string body = std::string(kMinimalConfig) + R"(
schedules:
  gamma: {type: list, values: [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]}
)";
  const std::string path = write_temp("vc_badgamma.yaml", body);
  try {
    load_config(path);
    FAIL("expected a schedule-invariant error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("gamma") != std::string::npos);
    CHECK(msg.find("line") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected with a line anchor") {
  const std::string body = std::string(kMinimalConfig) + R"(
robots:
  count: 3
  frobnicate: 1
)";
  const std::string path = write_temp("vc_unknown.yaml", body);
  try {
    load_config(path);
    FAIL("expected an unknown-key error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("frobnicate") != std::string::npos);
    CHECK(msg.find("line") != std::string::npos);
  }
}

TEST_CASE("a missing file is reported cleanly") {
  CHECK_THROWS_AS(load_config("/nonexistent/vorocover.yaml"), ConfigError);
}

TEST_CASE("a negative density is rejected at load") {
  const std::string body = R"(
densities:
  - name: bad
    offset: -1.0
    components:
      - {weight: 0.1, mean: [0.5, 0.5], std: 0.2}
)";
  CHECK_THROWS_AS(load_config(write_temp("vc_negdens.yaml", body)), ConfigError);
}

TEST_CASE("the shipped full experiment config has the expected scale") {
  const ExperimentSpec spec = load_config(VOROCOVER_PAPER_CONFIG);
  CHECK(spec.scenarios.size() == 4);
  CHECK(spec.modes.size() == 3);
  CHECK(spec.seeds.size() == 5);
  for (const ScenarioConfig& s : spec.scenarios) {
    CHECK(s.iterations == 15);
    CHECK(s.robot_count == 7);
    CHECK(s.domain.grid_resolution() == 100);
  }
  // expected CSV payload: one row per (density, mode, seed, iteration)
  const std::size_t expected_rows =
      spec.scenarios.size() * spec.modes.size() * spec.seeds.size() * 15;
  CHECK(expected_rows == 900);
}

TEST_CASE("metrics writer emits a bare header for no rows") {
  const std::string path = write_temp("vc_empty.csv", "");
  write_metrics({}, path);
  CHECK(slurp(path) == std::string(kMetricsHeader) + "\n");
}

TEST_CASE("metrics written, parsed and rewritten are byte-identical") {
  std::vector<MetricsRow> rows;
  for (int i = 0; i < 5; ++i) {
    MetricsRow r;
    r.density_id = i % 2 ? "b" : "a";
    r.mode = i % 3 ? "vec" : "dvec_nc";
    r.seed = static_cast<std::uint64_t>(10 - i);
    r.iteration = i + 1;
    r.error = 0.123456789123 * (i + 1);
    r.regret = -0.000012345 * (i + 1);
    r.team_cumulative_transfers = 7L * i;
    r.mean_per_robot_transfers = 1.714285714 * i;
    r.inner_loop_steps = 42 + i;
    r.warn_flags = i == 3 ? 1u : 0u;
    rows.push_back(r);
  }
  const std::string p1 = write_temp("vc_round1.csv", "");
  const std::string p2 = write_temp("vc_round2.csv", "");
  write_metrics(rows, p1);
  write_metrics(parse_metrics(p1), p2);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("field export writes full grid tables and a consistent composite") {
  ScenarioConfig cfg;
  cfg.domain = ConvexDomain::unit_square(40);
  DensitySpec d;
  d.name = "bump";
  d.offset = 0.1;
  d.components = {{0.4, {0.5, 0.5}, 0.2}};
  cfg.density = d;
  cfg.robot_count = 1;
  cfg.iterations = 1;
  cfg.schedules = ScheduleParams::defaults(1);
  cfg.gp_search = SearchConfig::for_diameter(cfg.domain.diameter());

  const RunResult result = run(cfg, RunMode::DvecNaive, 7, 0.0);
  const std::string dir = (std::filesystem::temp_directory_path() / "vc_fields").string();
  export_fields(result, dir);

  // single robot: composite equals the robot's estimate
  CHECK(slurp(dir + "/composite.csv") == slurp(dir + "/robot_0.csv"));

  // full-square domain: one row per lattice point plus the header
  std::ifstream in(dir + "/true_density.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 40 * 40 + 1);
}

TEST_CASE("the exported true density integrates to the mixture mass") {
  const ConvexDomain domain = ConvexDomain::unit_square(100);
  DensitySpec d;
  d.name = "mix";
  d.offset = 0.1;
  d.components = {{0.4, {0.25, 0.7}, 0.14}, {0.5, {0.7, 0.3}, 0.18}};
  const ScalarField2D field = d.discretize(domain);
  const double got = integrate(field);

  // oracle: erf-product mass of each component restricted to the unit square
  auto phi = [](double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); };
  double expected = d.offset;  // times unit area
  for (const GaussianComponent& c : d.components) {
    const double mx = (phi((1.0 - c.mean.x) / c.std) - phi((0.0 - c.mean.x) / c.std));
    const double my = (phi((1.0 - c.mean.y) / c.std) - phi((0.0 - c.mean.y) / c.std));
    expected += c.weight * mx * my;
  }
  CHECK(got == Catch::Approx(expected).margin(1e-3));
}

TEST_CASE("run seeds ignore the mode but separate densities and seeds") {
  const std::uint64_t a = run_seed_for(42, "density_a", 1);
  CHECK(a == run_seed_for(42, "density_a", 1));
  CHECK(a != run_seed_for(42, "density_a", 2));
  CHECK(a != run_seed_for(42, "density_b", 1));
  CHECK(a != run_seed_for(43, "density_a", 1));
}
