#pragma once

// Per-robot state and the explore/cover control pieces: lower-confidence
// field estimate, goal interpolation, single-integrator motion and noisy
// sampling of the true field.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vorocover/geometry.hpp"
#include "vorocover/gp.hpp"
#include "vorocover/rng.hpp"

namespace vorocover {

struct RobotState {
  int id = -1;
  Point2 position;
  SampleSet samples;
  GpModel model;
  ScalarField2D estimate;     // lower-confidence estimate f_i for the current iteration
  ScalarField2D uncertainty;  // posterior std field from the previous fit
  Point2 goal_centroid;
  Point2 goal_explore;
};

// Iteration schedules and motion constants. beta weights the uncertainty
// underestimate, gamma interpolates between coverage and exploration goals.
struct ScheduleParams {
  std::vector<double> beta;   // indexed by iteration 1..N
  std::vector<double> gamma;  // indexed by iteration 1..N
  double kappa = 1.0;
  double dt = 0.05;
  double eps_conv = 1e-3;  // fraction of the domain diameter
  int max_steps = 500;

  static ScheduleParams defaults(int iterations) {
    ScheduleParams p;
    p.beta.resize(iterations);
    p.gamma.resize(iterations);
    for (int n = 1; n <= iterations; ++n) {
      p.beta[n - 1] = 2.0 * std::log(n + 1.0);
      p.gamma[n - 1] = 0.9 * std::pow(0.7, n - 1);
    }
    return p;
  }

  double beta_at(int n) const { return beta.at(static_cast<std::size_t>(n - 1)); }
  double gamma_at(int n) const { return gamma.at(static_cast<std::size_t>(n - 1)); }

  void validate() const {
    if (beta.empty() || gamma.empty() || beta.size() != gamma.size())
      throw std::invalid_argument("schedules: beta and gamma must cover every iteration");
    for (std::size_t k = 0; k < beta.size(); ++k) {
      if (beta[k] < 0.0) throw std::invalid_argument("schedules: beta must be nonnegative");
      if (k > 0 && beta[k] < beta[k - 1])
        throw std::invalid_argument("schedules: beta must be non-decreasing");
      if (gamma[k] < 0.0 || gamma[k] >= 1.0)
        throw std::invalid_argument("schedules: gamma must lie in [0, 1)");
      // strictly decreasing until exploration is switched off entirely
      if (k > 0 && gamma[k] >= gamma[k - 1] && gamma[k] != 0.0)
        throw std::invalid_argument("schedules: gamma must be strictly decreasing");
    }
    if (kappa <= 0.0) throw std::invalid_argument("schedules: kappa must be positive");
    if (dt <= 0.0 || kappa * dt >= 1.0)
      throw std::invalid_argument("schedules: kappa*dt must lie in (0, 1)");
    if (eps_conv <= 0.0) throw std::invalid_argument("schedules: eps_conv must be positive");
    if (max_steps < 1) throw std::invalid_argument("schedules: max_steps must be positive");
  }
};

struct MeasurementModel {
  double noise_std = 0.1;
};

// f(q) = mu(q) - sqrt(beta) * sigma(q), the deliberate underestimate that
// steers coverage toward certain high-density regions.
inline ScalarField2D lower_confidence_from_fields(const ScalarField2D& mean,
                                                  const ScalarField2D& std_dev, double beta_n) {
  require_same_grid(mean, std_dev);
  ScalarField2D out = mean;
  out.values -= std::sqrt(beta_n) * std_dev.values;
  return out;
}

inline ScalarField2D lower_confidence_estimate(const GpModel& model, double beta_n,
                                               const ConvexDomain& domain) {
  if (beta_n < 0.0) throw std::invalid_argument("lower_confidence_estimate: beta must be nonnegative");
  auto [mean, sd] = model.posterior_field(domain);
  return lower_confidence_from_fields(mean, sd, beta_n);
}

// Interpolated goal (1-gamma)*centroid + gamma*explore; stays in the cell by
// convexity.
inline Point2 goal_point(Point2 centroid, Point2 explore, double gamma_n) {
  return (1.0 - gamma_n) * centroid + gamma_n * explore;
}

// Forward-Euler step of xdot = kappa * (goal - x). Roundoff can nudge the
// result past the boundary, in which case it is projected back.
inline Point2 motion_step(Point2 position, Point2 goal, double kappa, double dt,
                          const ConvexDomain& domain) {
  const Point2 next = position + (dt * kappa) * (goal - position);
  return domain.contains(next) ? next : domain.project_inside(next);
}

inline Sample take_sample(const RobotState& robot, const ScalarField2D& true_field,
                          const MeasurementModel& meas, RngStream& stream, int iteration) {
  Sample s;
  s.location = robot.position;
  s.value = true_field.interpolate(robot.position);
  if (meas.noise_std > 0.0) s.value += stream.normal(0.0, meas.noise_std);
  s.origin_robot = robot.id;
  s.iteration = iteration;
  return s;
}

}  // namespace vorocover
