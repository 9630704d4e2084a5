#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "vorocover/rng.hpp"
#include "vorocover/sim.hpp"

using namespace vorocover;

namespace {

DensitySpec three_peaks() {
  DensitySpec d;
  d.name = "three_peaks";
  d.offset = 0.1;
  d.components = {{0.35, {0.2, 0.3}, 0.12}, {0.3, {0.75, 0.7}, 0.15}, {0.25, {0.3, 0.8}, 0.08}};
  return d;
}

DensitySpec uniform_density(double level = 1.0) {
  DensitySpec d;
  d.name = "uniform";
  d.offset = level;
  return d;
}

ScenarioConfig small_scenario(int robots, int iterations, int resolution) {
  ScenarioConfig cfg;
  cfg.domain = ConvexDomain::unit_square(resolution);
  cfg.density = three_peaks();
  cfg.robot_count = robots;
  cfg.iterations = iterations;
  cfg.schedules = ScheduleParams::defaults(iterations);
  cfg.gp_search = SearchConfig::for_diameter(cfg.domain.diameter());
  cfg.oracle_restarts = 4;
  return cfg;
}

bool metrics_equal(const RunMetrics& a, const RunMetrics& b) {
  if (a.per_iteration.size() != b.per_iteration.size()) return false;
  for (std::size_t k = 0; k < a.per_iteration.size(); ++k) {
    const IterationMetrics& x = a.per_iteration[k];
    const IterationMetrics& y = b.per_iteration[k];
    if (x.error != y.error || x.regret != y.regret ||
        x.team_cumulative_transfers != y.team_cumulative_transfers ||
        x.inner_loop_steps != y.inner_loop_steps || x.warn_flags != y.warn_flags)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("coverage cost of a zero density is zero") {
  const ConvexDomain domain = ConvexDomain::unit_square(50);
  const ScalarField2D zero(domain, 0.0);
  CHECK(coverage_cost({{0.3, 0.3}, {0.7, 0.7}}, zero) == 0.0);
}

TEST_CASE("coverage cost of a centered robot on the uniform square is 1/6") {
  const ConvexDomain domain = ConvexDomain::unit_square(100);
  const ScalarField2D ones(domain, 1.0);
  CHECK(coverage_cost({{0.5, 0.5}}, ones) == Catch::Approx(1.0 / 6.0).margin(1e-3));
}

TEST_CASE("moving a robot off its centroid increases the cost") {
  const ConvexDomain domain = ConvexDomain::unit_square(80);
  const ScalarField2D truth = three_peaks().discretize(domain);
  const OracleResult oracle = cvt_oracle(truth, 4, 6, 123);
  const double base = coverage_cost(oracle.best_positions, truth);
  for (std::size_t i = 0; i < oracle.best_positions.size(); ++i) {
    for (const Point2 delta : {Point2{0.05, 0.0}, Point2{-0.05, 0.0}, Point2{0.0, 0.05}, Point2{0.0, -0.05}}) {
      std::vector<Point2> moved = oracle.best_positions;
      const Point2 p = moved[i] + delta;
      if (!domain.contains(p)) continue;
      moved[i] = p;
      CHECK(coverage_cost(moved, truth) > base);
    }
  }
}

TEST_CASE("oracle finds the center of the uniform square for one robot") {
  const ConvexDomain domain = ConvexDomain::unit_square(100);
  const ScalarField2D ones(domain, 1.0);
  const OracleResult oracle = cvt_oracle(ones, 1, 3, 7);
  CHECK(oracle.best_cost == Catch::Approx(1.0 / 6.0).margin(1e-3));
  CHECK(distance(oracle.best_positions.front(), {0.5, 0.5}) < 1e-2);
}

TEST_CASE("lloyd sweeps never increase the cost") {
  const ConvexDomain domain = ConvexDomain::unit_square(60);
  const ScalarField2D truth = three_peaks().discretize(domain);
  RngStream stream(55);
  std::vector<Point2> positions;
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int i = 0; i < 5; ++i) positions.push_back({stream.uniform(0.05, 0.95), stream.uniform(0.05, 0.95)});
  double prev = coverage_cost(positions, truth);
  for (int sweep = 0; sweep < 40; ++sweep) {
    const VoronoiPartition part = compute_partition(positions, domain);
    for (int i = 0; i < 5; ++i)
      positions[static_cast<std::size_t>(i)] = cell_mass_centroid(part.cell(i), truth).centroid;
    const double cost = coverage_cost(positions, truth);
    CHECK(cost <= prev + 1e-9 * std::abs(prev));
    prev = cost;
  }
}

TEST_CASE("oracle restarts saturate") {
  const ConvexDomain domain = ConvexDomain::unit_square(50);
  const ScalarField2D truth = three_peaks().discretize(domain);
  const double c50 = cvt_oracle(truth, 7, 50, 31).best_cost;
  const double c100 = cvt_oracle(truth, 7, 100, 31).best_cost;
  CHECK(std::abs(c50 - c100) / c100 < 0.01);
}

TEST_CASE("regret is zero at the oracle configuration and bounded below elsewhere") {
  const ConvexDomain domain = ConvexDomain::unit_square(60);
  const ScalarField2D truth = three_peaks().discretize(domain);
  const OracleResult oracle = cvt_oracle(truth, 5, 20, 9);
  CHECK(regret(oracle.best_positions, truth, oracle.best_cost) == 0.0);
  RngStream stream(77);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Point2> positions;
    for (int i = 0; i < 5; ++i)
      positions.push_back({stream.uniform(0.02, 0.98), stream.uniform(0.02, 0.98)});
    CHECK(regret(positions, truth, oracle.best_cost) >= -1e-6);
  }
}

TEST_CASE("composite estimate basics") {
  const ConvexDomain domain = ConvexDomain::unit_square(40);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<RobotState> robots(3);
  for (std::size_t i = 0; i < robots.size(); ++i) {
    robots[i].id = static_cast<int>(i);
    robots[i].estimate = ScalarField2D(domain);
    for (int id = 0; id < domain.lattice_size(); ++id) robots[i].estimate[id] = u(rng);
  }
  const CompositeEstimate composite = compose_estimates(robots);
  std::uniform_int_distribution<int> pick(0, domain.lattice_size() - 1);
  for (int k = 0; k < 100; ++k) {
    const int id = pick(rng);
    const double expected = std::max({robots[0].estimate[id], robots[1].estimate[id], robots[2].estimate[id]});
    CHECK(composite.field.values[id] == expected);
  }

  const std::vector<RobotState> single(robots.begin(), robots.begin() + 1);
  const CompositeEstimate one = compose_estimates(single);
  CHECK((one.field.values - robots[0].estimate.values).norm() == 0.0);

  std::vector<RobotState> same = robots;
  for (auto& r : same) r.estimate = robots[0].estimate;
  const CompositeEstimate idem = compose_estimates(same);
  CHECK((idem.field.values - robots[0].estimate.values).norm() == 0.0);
}

TEST_CASE("estimation error basics") {
  const ConvexDomain domain = ConvexDomain::unit_square(80);
  const ScalarField2D truth = three_peaks().discretize(domain);
  CHECK(estimation_error(truth, truth) == 0.0);
  ScalarField2D shifted = truth;
  shifted.values.array() += 0.1;
  CHECK(estimation_error(shifted, truth) == Catch::Approx(0.1).margin(1e-9));
}

TEST_CASE("a single robot behaves identically in every mode") {
  ScenarioConfig cfg = small_scenario(1, 4, 50);
  const std::uint64_t seed = 2024;
  const RunResult vec = run(cfg, RunMode::Vec, seed, 0.0);
  const RunResult nc = run(cfg, RunMode::DvecNaive, seed, 0.0);
  const RunResult cc = run(cfg, RunMode::DvecConstrained, seed, 0.0);
  for (std::size_t k = 0; k < vec.metrics.per_iteration.size(); ++k) {
    CHECK(vec.metrics.per_iteration[k].error == nc.metrics.per_iteration[k].error);
    CHECK(vec.metrics.per_iteration[k].error == cc.metrics.per_iteration[k].error);
    CHECK(vec.metrics.per_iteration[k].regret == nc.metrics.per_iteration[k].regret);
    CHECK(vec.metrics.per_iteration[k].regret == cc.metrics.per_iteration[k].regret);
  }
  CHECK(distance(vec.robots[0].position, nc.robots[0].position) == 0.0);
  CHECK(distance(vec.robots[0].position, cc.robots[0].position) == 0.0);
}

TEST_CASE("pure coverage on the true density reaches a centroidal configuration") {
  ScenarioConfig cfg;
  cfg.domain = ConvexDomain::unit_square(60);
  cfg.density = uniform_density();
  cfg.robot_count = 5;
  cfg.iterations = 2;
  cfg.perfect_estimate = true;
  cfg.schedules = ScheduleParams::defaults(2);
  cfg.schedules.beta = {0.0, 0.0};
  cfg.schedules.gamma = {0.0, 0.0};
  cfg.schedules.eps_conv = 3e-4;
  cfg.schedules.max_steps = 4000;
  cfg.gp_search = SearchConfig::for_diameter(cfg.domain.diameter());

  const RunResult result = run(cfg, RunMode::Vec, 31, 0.0);
  std::vector<Point2> positions;
  for (const RobotState& robot : result.robots) positions.push_back(robot.position);
  const VoronoiPartition part = compute_partition(positions, cfg.domain);
  double worst = 0.0;
  for (int i = 0; i < cfg.robot_count; ++i) {
    const Point2 c = cell_mass_centroid(part.cell(i), result.true_field).centroid;
    worst = std::max(worst, distance(positions[static_cast<std::size_t>(i)], c));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("runs are deterministic") {
  ScenarioConfig cfg = small_scenario(4, 3, 50);
  const RunResult a = run(cfg, RunMode::DvecNaive, 99, 0.0);
  const RunResult b = run(cfg, RunMode::DvecNaive, 99, 0.0);
  CHECK(metrics_equal(a.metrics, b.metrics));
  for (std::size_t i = 0; i < a.robots.size(); ++i)
    CHECK(distance(a.robots[i].position, b.robots[i].position) == 0.0);
}

TEST_CASE("zero threshold makes the constrained mode identical to the naive mode") {
  ScenarioConfig cfg = small_scenario(5, 4, 50);
  cfg.theta = 0.0;
  cfg.direction = ThresholdDirection::AcceptIfGeq;
  const RunResult nc = run(cfg, RunMode::DvecNaive, 321, 0.0);
  const RunResult cc = run(cfg, RunMode::DvecConstrained, 321, 0.0);
  CHECK(metrics_equal(nc.metrics, cc.metrics));
  for (std::size_t i = 0; i < nc.robots.size(); ++i) {
    CHECK(distance(nc.robots[i].position, cc.robots[i].position) == 0.0);
    CHECK(nc.robots[i].samples.size() == cc.robots[i].samples.size());
  }
}

TEST_CASE("the central model aggregates every sample") {
  ScenarioConfig cfg = small_scenario(4, 3, 50);
  const RunResult vec = run(cfg, RunMode::Vec, 17, 0.0);
  CHECK(vec.robots.front().model.sample_count() == cfg.robot_count * (cfg.iterations + 1));
}

TEST_CASE("transfer counts are ordered across modes") {
  ScenarioConfig cfg = small_scenario(6, 5, 50);
  cfg.theta = 2.0;
  const RunResult vec = run(cfg, RunMode::Vec, 5, 0.0);
  const RunResult nc = run(cfg, RunMode::DvecNaive, 5, 0.0);
  const RunResult cc = run(cfg, RunMode::DvecConstrained, 5, 0.0);
  for (std::size_t k = 0; k < vec.metrics.per_iteration.size(); ++k) {
    const long v = vec.metrics.per_iteration[k].team_cumulative_transfers;
    const long n = nc.metrics.per_iteration[k].team_cumulative_transfers;
    const long c = cc.metrics.per_iteration[k].team_cumulative_transfers;
    CHECK(c <= n);
    CHECK(n <= v);
    if (k > 0) {
      CHECK(c >= cc.metrics.per_iteration[k - 1].team_cumulative_transfers);
      CHECK(n >= nc.metrics.per_iteration[k - 1].team_cumulative_transfers);
    }
  }
}

TEST_CASE("the inner loop flags when it runs out of steps") {
  ScenarioConfig cfg = small_scenario(4, 2, 40);
  cfg.schedules.max_steps = 1;
  const RunResult result = run(cfg, RunMode::DvecNaive, 8, 0.0);
  CHECK((result.metrics.per_iteration.front().warn_flags & kWarnInnerLoopMaxed) != 0);
}

TEST_CASE("regret decreases for most seeds of a centralized run") {
  ScenarioConfig cfg = small_scenario(7, 15, 80);
  const ScalarField2D truth = cfg.density.discretize(cfg.domain);
  const OracleResult oracle = cvt_oracle(truth, cfg.robot_count, 10, 77);
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RunResult result = run(cfg, RunMode::Vec, derive_seed(1234, seed), oracle.best_cost);
    if (result.metrics.per_iteration.back().regret <= result.metrics.per_iteration.front().regret)
      ++improved;
  }
  CHECK(improved >= 4);
}

TEST_CASE("estimates improve over a short learning run") {
  ScenarioConfig cfg = small_scenario(7, 8, 64);
  for (RunMode mode : {RunMode::Vec, RunMode::DvecNaive}) {
    const RunResult result = run(cfg, mode, 1, 0.0);
    const double first = result.metrics.per_iteration.front().error;
    const double last = result.metrics.per_iteration.back().error;
    INFO(mode_name(mode) << ": error " << first << " -> " << last);
    CHECK(last < first);
  }
}
