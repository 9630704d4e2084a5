#pragma once

// Run orchestration for the three estimation/coverage modes: a centralized
// baseline that fits one shared model from every sample, and the two
// decentralized variants that keep per-robot models fed through naive or
// Delta-K-constrained neighbor exchange. Also the evaluation machinery:
// coverage cost, regret against a multi-restart Lloyd oracle, composite
// estimates and estimation error.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vorocover/agent.hpp"
#include "vorocover/comm.hpp"
#include "vorocover/geometry.hpp"
#include "vorocover/gp.hpp"
#include "vorocover/rng.hpp"

namespace vorocover {

enum class RunMode { Vec, DvecNaive, DvecConstrained };

inline const char* mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::Vec: return "vec";
    case RunMode::DvecNaive: return "dvec_nc";
    case RunMode::DvecConstrained: return "dvec_cc";
  }
  return "?";
}

struct GaussianComponent {
  double weight = 1.0;
  Point2 mean;
  double std = 0.1;
};

// Density as a Gaussian mixture plus a constant offset.
struct DensitySpec {
  std::string name = "density";
  std::vector<GaussianComponent> components;
  double offset = 0.0;

  double evaluate(Point2 p) const {
    double v = offset;
    for (const GaussianComponent& c : components) {
      const double s2 = c.std * c.std;
      v += c.weight / (2.0 * M_PI * s2) * std::exp(-squared_norm(p - c.mean) / (2.0 * s2));
    }
    return v;
  }

  ScalarField2D discretize(const ConvexDomain& domain) const {
    return ScalarField2D::from_function(domain, [this](Point2 p) { return evaluate(p); });
  }
};

// Everything one run needs. Lengths in domain units except where noted.
struct ScenarioConfig {
  ConvexDomain domain = ConvexDomain::unit_square(100);
  DensitySpec density;
  int robot_count = 7;
  int iterations = 15;
  double min_separation = 1e-3;  // fraction of the domain diameter
  ScheduleParams schedules = ScheduleParams::defaults(15);
  MeasurementModel measurement;
  SearchConfig gp_search = SearchConfig::for_diameter(std::sqrt(2.0));
  double theta = 0.0;
  ThresholdDirection direction = ThresholdDirection::AcceptIfGeq;
  InvalidBoundPolicy invalid_policy = InvalidBoundPolicy::Accept;
  int oracle_restarts = 20;
  std::uint64_t oracle_seed = 9001;
  // Bypasses learning entirely: every robot covers the true density and no
  // samples are taken or exchanged. Used for pure-coverage studies.
  bool perfect_estimate = false;

  void validate() const {
    if (robot_count < 1) throw std::invalid_argument("scenario: robot_count must be >= 1");
    if (iterations < 1) throw std::invalid_argument("scenario: iterations must be >= 1");
    if (static_cast<int>(schedules.beta.size()) < iterations)
      throw std::invalid_argument("scenario: schedules shorter than the iteration count");
    schedules.validate();
    if (min_separation <= 0.0 || min_separation >= 0.5)
      throw std::invalid_argument("scenario: min_separation out of range");
    if (measurement.noise_std < 0.0) throw std::invalid_argument("scenario: negative noise std");
    if (!perfect_estimate && measurement.noise_std <= 0.0)
      throw std::invalid_argument("scenario: learning runs need positive measurement noise");
    if (gp_search.tau_min <= 0.0 || gp_search.tau_max <= gp_search.tau_min)
      throw std::invalid_argument("scenario: bad tau search bounds");
    if (theta < 0.0) throw std::invalid_argument("scenario: theta must be nonnegative");
    if (oracle_restarts < 1) throw std::invalid_argument("scenario: oracle_restarts must be >= 1");
    for (const GaussianComponent& c : density.components)
      if (c.std <= 0.0) throw std::invalid_argument("scenario: density component std must be positive");
    ScalarField2D f = density.discretize(domain);
    for (int id : domain.interior_ids())
      if (f.values[id] < 0.0)
        throw std::invalid_argument("scenario: density is negative inside the domain");
  }
};

constexpr unsigned kWarnInnerLoopMaxed = 1u;
constexpr unsigned kWarnDegenerateMass = 2u;

// Floor applied to lower-confidence estimates before mass/centroid use; the
// underestimate can dip negative and the centroid needs positive mass.
constexpr double kDensityFloor = 1e-6;

struct IterationMetrics {
  int iteration = 0;
  double error = 0.0;
  double regret = 0.0;
  long team_cumulative_transfers = 0;
  double mean_per_robot_transfers = 0.0;
  int inner_loop_steps = 0;
  long accepted = 0;    // exchange outcome of this iteration
  long candidates = 0;  // samples offered this iteration
  unsigned warn_flags = 0;
};

struct PhaseTimes {
  double motion_s = 0.0;
  double gp_s = 0.0;
  double exchange_s = 0.0;
  double metrics_s = 0.0;
};

struct RunMetrics {
  std::vector<IterationMetrics> per_iteration;  // n = 1..N
  PhaseTimes phases;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<RobotState> robots;
  ScalarField2D true_field;
  ScalarField2D composite;
};

struct CompositeEstimate {
  ScalarField2D field;
};

// Pointwise maximum of the robots' current estimates. Since every estimate
// underestimates in proportion to its local uncertainty, the max picks the
// best-informed robot at each point.
inline CompositeEstimate compose_estimates(const std::vector<RobotState>& robots) {
  if (robots.empty()) throw std::invalid_argument("compose_estimates: no robots");
  CompositeEstimate out{robots.front().estimate};
  for (std::size_t i = 1; i < robots.size(); ++i) {
    require_same_grid(out.field, robots[i].estimate);
    out.field.values = out.field.values.cwiseMax(robots[i].estimate.values);
  }
  return out;
}

inline double estimation_error(const ScalarField2D& estimate, const ScalarField2D& true_density) {
  return integrate_abs_difference(estimate, true_density);
}

// Locational cost H: density-weighted squared distances to the assigned
// (Voronoi) robot, midpoint rule over the grid.
inline double coverage_cost(const std::vector<Point2>& positions, const ScalarField2D& density) {
  const ConvexDomain& domain = *density.domain;
  const VoronoiPartition partition = compute_partition(positions, domain);
  double total = 0.0;
  for (const VoronoiCell& cell : partition.cells()) {
    const Point2 x = positions[static_cast<std::size_t>(cell.generator_id)];
    double acc = 0.0;
    for (int id : cell.grid_point_ids)
      acc += squared_norm(domain.lattice_point(id) - x) * density.values[id];
    total += acc;
  }
  return total * domain.cell_area();
}

inline double regret(const std::vector<Point2>& positions, const ScalarField2D& true_density,
                     double oracle_cost) {
  return coverage_cost(positions, true_density) - oracle_cost;
}

namespace detail {

inline std::vector<Point2> init_positions(int count, const ConvexDomain& domain, RngStream& stream,
                                          double min_separation_frac) {
  const double min_sep = min_separation_frac * domain.diameter();
  std::vector<Point2> positions;
  positions.reserve(static_cast<std::size_t>(count));
  const Point2 lo = domain.bbox_min();
  const Point2 hi = domain.bbox_max();
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100000)
        throw std::runtime_error("init_positions: cannot place robots with the requested separation");
      const Point2 p{stream.uniform(lo.x, hi.x), stream.uniform(lo.y, hi.y)};
      if (!domain.contains(p)) continue;
      bool ok = true;
      for (const Point2& q : positions)
        if (distance(p, q) < min_sep) {
          ok = false;
          break;
        }
      if (ok) {
        positions.push_back(p);
        break;
      }
    }
  }
  return positions;
}

class PhaseTimer {
 public:
  explicit PhaseTimer(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

struct OracleResult {
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<Point2> best_positions;
};

// Multi-restart Lloyd descent on the true density; stands in for the global
// minimum of the coverage cost, which is NP-hard to find.
inline OracleResult cvt_oracle(const ScalarField2D& true_density, int robot_count, int restarts,
                               std::uint64_t seed) {
  const ConvexDomain& domain = *true_density.domain;
  OracleResult out;
  for (int r = 0; r < restarts; ++r) {
    RngStream stream(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::vector<Point2> positions;
    try {
      positions = detail::init_positions(robot_count, domain, stream, 1e-3);
      for (int sweep = 0; sweep < 1000; ++sweep) {
        const VoronoiPartition partition = compute_partition(positions, domain);
        double disp = 0.0;
        std::vector<Point2> next(positions.size());
        for (int i = 0; i < robot_count; ++i) {
          next[static_cast<std::size_t>(i)] = cell_mass_centroid(partition.cell(i), true_density).centroid;
          disp = std::max(disp, distance(next[static_cast<std::size_t>(i)],
                                         positions[static_cast<std::size_t>(i)]));
        }
        positions = std::move(next);
        if (disp < 1e-6) break;
      }
      const double cost = coverage_cost(positions, true_density);
      if (cost < out.best_cost) {
        out.best_cost = cost;
        out.best_positions = positions;
      }
    } catch (const std::exception&) {
      continue;  // degenerate restart (coincident centroids); try the next one
    }
  }
  if (out.best_positions.empty()) throw std::runtime_error("cvt_oracle: every restart degenerated");
  return out;
}

// One seeded run of the chosen mode. oracle_cost is subtracted from the
// coverage cost to report regret; pass 0 to record raw cost.
inline RunResult run(const ScenarioConfig& config, RunMode mode, std::uint64_t run_seed,
                     double oracle_cost = 0.0) {
  config.validate();
  const ConvexDomain& domain = config.domain;
  const int m = config.robot_count;
  const int total_iterations = config.iterations;
  const double noise_var = std::max(config.measurement.noise_std * config.measurement.noise_std, 1e-12);
  const double eps_conv_abs = config.schedules.eps_conv * domain.diameter();

  RunResult result;
  result.true_field = config.density.discretize(domain);

  RngStream position_stream(derive_seed(run_seed, 1));
  std::vector<RngStream> robot_streams;
  robot_streams.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    robot_streams.emplace_back(derive_seed(run_seed, 100 + static_cast<std::uint64_t>(i)));

  std::vector<Point2> positions =
      detail::init_positions(m, domain, position_stream, config.min_separation);
  result.robots.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    result.robots[static_cast<std::size_t>(i)].id = i;
    result.robots[static_cast<std::size_t>(i)].position = positions[static_cast<std::size_t>(i)];
  }
  std::vector<RobotState>& robots = result.robots;

  TransferLedger ledger;
  SampleSet central_samples;                         // VEC only
  GpModel central_model;                             // VEC only
  ScalarField2D central_mean, central_std;           // VEC posterior fields
  std::vector<ScalarField2D> mean_fields(robots.size());  // DVEC posterior means

  VoronoiPartition partition = compute_partition(positions, domain);

  const bool centralized = mode == RunMode::Vec;

  auto exchange = [&](int iteration) {
    detail::PhaseTimer timer(result.metrics.phases.exchange_s);
    if (config.perfect_estimate) return;
    if (centralized) {
      for (int i = 0; i < m; ++i) central_samples.insert(*robots[static_cast<std::size_t>(i)].samples.find(i, iteration));
    } else if (mode == RunMode::DvecNaive) {
      naive_exchange(robots, partition, iteration, ledger);
    } else {
      constrained_exchange(robots, partition, iteration, config.theta, config.direction, ledger,
                           config.invalid_policy);
    }
  };

  auto refit = [&]() {
    detail::PhaseTimer timer(result.metrics.phases.gp_s);
    if (config.perfect_estimate) return;
    if (centralized) {
      central_model = GpModel::fit(central_samples, noise_var, config.gp_search);
      std::tie(central_mean, central_std) = central_model.posterior_field(domain);
    } else {
      for (RobotState& robot : robots) {
        robot.model = GpModel::fit(robot.samples, noise_var, config.gp_search);
        std::tie(mean_fields[static_cast<std::size_t>(robot.id)], robot.uncertainty) =
            robot.model.posterior_field(domain);
      }
    }
  };

  // Initialization: sample at the random starting positions, exchange, fit.
  if (config.perfect_estimate) {
    for (RobotState& robot : robots) {
      robot.estimate = result.true_field;
      robot.uncertainty = ScalarField2D(domain, 0.0);
    }
  } else {
    for (int i = 0; i < m; ++i)
      robots[static_cast<std::size_t>(i)].samples.insert(take_sample(
          robots[static_cast<std::size_t>(i)], result.true_field, config.measurement,
          robot_streams[static_cast<std::size_t>(i)], 0));
    exchange(0);
    refit();
  }

  std::vector<ScalarField2D> clamped(robots.size());
  std::vector<Point2> goals(positions.size());

  for (int n = 1; n <= total_iterations; ++n) {
    const double beta_n = config.schedules.beta_at(n);
    const double gamma_n = config.schedules.gamma_at(n);
    IterationMetrics iter_metrics;
    iter_metrics.iteration = n;

    // Lower-confidence estimates from the previous iteration's posterior.
    if (!config.perfect_estimate) {
      if (centralized) {
        const ScalarField2D estimate = lower_confidence_from_fields(central_mean, central_std, beta_n);
        for (RobotState& robot : robots) {
          robot.estimate = estimate;
          robot.uncertainty = central_std;
        }
      } else {
        for (RobotState& robot : robots)
          robot.estimate = lower_confidence_from_fields(
              mean_fields[static_cast<std::size_t>(robot.id)], robot.uncertainty, beta_n);
      }
    }
    for (std::size_t i = 0; i < robots.size(); ++i)
      clamped[i] = clamped_below(robots[i].estimate, kDensityFloor);

    // Exploration target: most uncertain grid point of the current cell.
    for (int i = 0; i < m; ++i) {
      RobotState& robot = robots[static_cast<std::size_t>(i)];
      robot.goal_explore = partition.cell(i).grid_point_ids.empty()
                               ? robot.position
                               : argmax_in_cell(partition.cell(i), robot.uncertainty);
    }

    // Inner loop: chase the interpolated goal while the centroid (hence the
    // partition) evolves with the team. The exploration point and estimate
    // fields stay frozen for the iteration.
    {
      detail::PhaseTimer timer(result.metrics.phases.motion_s);
      int steps = 0;
      bool degenerate = false;
      for (;;) {
        partition = compute_partition(positions, domain);
        bool converged = true;
        for (int i = 0; i < m; ++i) {
          RobotState& robot = robots[static_cast<std::size_t>(i)];
          const MassCentroid mc = cell_mass_centroid(partition.cell(i), clamped[static_cast<std::size_t>(i)]);
          degenerate = degenerate || mc.uniform_fallback;
          robot.goal_centroid = mc.centroid;
          goals[static_cast<std::size_t>(i)] = goal_point(mc.centroid, robot.goal_explore, gamma_n);
          if (distance(positions[static_cast<std::size_t>(i)], goals[static_cast<std::size_t>(i)]) >=
              eps_conv_abs)
            converged = false;
        }
        if (converged) break;
        if (steps >= config.schedules.max_steps) {
          iter_metrics.warn_flags |= kWarnInnerLoopMaxed;
          break;
        }
        for (int i = 0; i < m; ++i) {
          positions[static_cast<std::size_t>(i)] =
              motion_step(positions[static_cast<std::size_t>(i)], goals[static_cast<std::size_t>(i)],
                          config.schedules.kappa, config.schedules.dt, domain);
          robots[static_cast<std::size_t>(i)].position = positions[static_cast<std::size_t>(i)];
        }
        ++steps;
      }
      iter_metrics.inner_loop_steps = steps;
      if (degenerate) iter_metrics.warn_flags |= kWarnDegenerateMass;
    }

    // Sample, exchange, refit.
    if (!config.perfect_estimate) {
      for (int i = 0; i < m; ++i)
        robots[static_cast<std::size_t>(i)].samples.insert(take_sample(
            robots[static_cast<std::size_t>(i)], result.true_field, config.measurement,
            robot_streams[static_cast<std::size_t>(i)], n));
      exchange(n);
      refit();
    }

    // Metrics for this iteration.
    {
      detail::PhaseTimer timer(result.metrics.phases.metrics_s);
      if (centralized || config.perfect_estimate) {
        iter_metrics.error = estimation_error(robots.front().estimate, result.true_field);
      } else {
        result.composite = compose_estimates(robots).field;
        iter_metrics.error = estimation_error(result.composite, result.true_field);
      }
      iter_metrics.regret = regret(positions, result.true_field, oracle_cost);
      if (config.perfect_estimate) {
        iter_metrics.team_cumulative_transfers = 0;
        iter_metrics.mean_per_robot_transfers = 0.0;
      } else if (centralized) {
        // Equivalent cost of centralized estimation: every robot's regression
        // consumes all M fresh samples each iteration, initialization included.
        iter_metrics.team_cumulative_transfers = static_cast<long>(m) * m * (n + 1);
        iter_metrics.mean_per_robot_transfers = static_cast<double>(m) * (n + 1);
        iter_metrics.accepted = static_cast<long>(m) * m;
        iter_metrics.candidates = static_cast<long>(m) * m;
      } else {
        iter_metrics.team_cumulative_transfers = ledger.cumulative_team(n);
        iter_metrics.mean_per_robot_transfers =
            static_cast<double>(iter_metrics.team_cumulative_transfers) / m;
        iter_metrics.accepted = ledger.accepted_team(n);
        iter_metrics.candidates = ledger.candidates_team(n);
      }
    }
    result.metrics.per_iteration.push_back(iter_metrics);
  }

  if (centralized) {
    // the shared model is what every robot queries; expose it on the states
    for (RobotState& robot : robots) robot.model = central_model;
  }
  if (centralized || config.perfect_estimate)
    result.composite = robots.front().estimate;
  else
    result.composite = compose_estimates(robots).field;
  return result;
}

}  // namespace vorocover
