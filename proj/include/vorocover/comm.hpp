#pragma once

// Sample exchange between Voronoi neighbors: the naive protocol forwards
// every fresh sample, the constrained protocol filters through the Delta-K
// prediction-impact bound. A ledger tracks offered and accepted transfers
// per robot and iteration.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "vorocover/agent.hpp"
#include "vorocover/geometry.hpp"
#include "vorocover/gp.hpp"

namespace vorocover {

class TransferLedger {
 public:
  void begin_iteration(int iteration, int robot_count) {
    ensure(iteration, robot_count);
  }

  void record_candidate(int robot, int iteration) { ++candidates_[iteration][robot]; }
  void record_accept(int robot, int iteration) { ++accepted_[iteration][robot]; }

  int iterations() const { return static_cast<int>(accepted_.size()); }

  long accepted_team(int iteration) const {
    return std::accumulate(accepted_[iteration].begin(), accepted_[iteration].end(), 0L);
  }
  long candidates_team(int iteration) const {
    return std::accumulate(candidates_[iteration].begin(), candidates_[iteration].end(), 0L);
  }
  long accepted_robot(int robot, int iteration) const { return accepted_[iteration][robot]; }

  // Cumulative accepted transfers over iterations 0..n.
  long cumulative_team(int n) const {
    long total = 0;
    for (int m = 0; m <= n && m < iterations(); ++m) total += accepted_team(m);
    return total;
  }
  long cumulative_robot(int robot, int n) const {
    long total = 0;
    for (int m = 0; m <= n && m < iterations(); ++m) total += accepted_[m][robot];
    return total;
  }

 private:
  void ensure(int iteration, int robot_count) {
    while (static_cast<int>(accepted_.size()) <= iteration) {
      accepted_.emplace_back(robot_count, 0L);
      candidates_.emplace_back(robot_count, 0L);
    }
  }

  std::vector<std::vector<long>> accepted_;
  std::vector<std::vector<long>> candidates_;
};

struct ImpactBound {
  double z_bound = 0.0;
  double y_bound = 0.0;
  double x_bound = 0.0;
  double delta_k = 0.0;
  bool valid = false;
};

enum class ThresholdDirection { AcceptIfGeq, AcceptIfLeq };

// Policy for candidates whose Delta-K bound is uninformative (denominator
// <= 0). Accept takes every such sample; Reject drops them, which keeps the
// filter active late in a run when accumulated near-duplicate samples push
// the inverse norm to its 1/noise_var ceiling and no bound stays valid.
enum class InvalidBoundPolicy { Accept, Reject };

// Upper bound on the factor by which adding a candidate sample can change any
// posterior prediction. With A = K + s2*I, k the candidate's kernel vector
// and kappa = k(chi, chi) = 1:
//   ||Z|| <= (1/kappa + (||k||/kappa)^2 ||A^-1||) / (1 - ((||k||/kappa) ||A^-1||)^2)
//   ||Y|| <= ||A^-1 k|| ||Z||,   ||X|| <= ||A^-1 k||^2 ||Z||
//   DeltaK = max(||X||, ||Z||) + ||Y||
// The bound is uninformative (valid = false) when the denominator is not
// positive. Norms are spectral. The candidate value does not enter the bound;
// it scales the realized change through ||y|| instead.
inline ImpactBound impact_bound(const GpModel& model, Point2 candidate_location,
                                double /*candidate_value*/) {
  if (model.empty()) throw std::invalid_argument("impact_bound: model has no samples");
  ImpactBound out;
  const Eigen::VectorXd k = model.kernel_vector(candidate_location);
  const double k_norm = k.norm();
  const double a_inv = model.inverse_norm();
  const double denominator = 1.0 - (k_norm * a_inv) * (k_norm * a_inv);
  if (denominator <= 0.0) {
    out.z_bound = out.y_bound = out.x_bound = out.delta_k =
        std::numeric_limits<double>::infinity();
    out.valid = false;
    return out;
  }
  const double w = model.solve_noise_cov(k).norm();  // ||A^-1 k||
  out.z_bound = (1.0 + k_norm * k_norm * a_inv) / denominator;
  out.y_bound = w * out.z_bound;
  out.x_bound = w * w * out.z_bound;
  out.delta_k = std::max(out.x_bound, out.z_bound) + out.y_bound;
  out.valid = true;
  return out;
}

namespace detail {

// Snapshot of every robot's fresh sample, taken by value: inserting received
// samples may reallocate the per-robot stores mid-exchange.
inline std::vector<Sample> fresh_samples(const std::vector<RobotState>& robots, int iteration) {
  std::vector<Sample> fresh(robots.size());
  for (std::size_t i = 0; i < robots.size(); ++i) {
    const Sample* own = robots[i].samples.find(static_cast<int>(i), iteration);
    if (own == nullptr)
      throw std::logic_error("exchange: robot " + std::to_string(i) +
                             " holds no fresh sample for this iteration");
    fresh[i] = *own;
  }
  return fresh;
}

}  // namespace detail

// Every robot receives the fresh sample of each Voronoi neighbor. Duplicate
// (origin, iteration) keys are ignored; the ledger counts accepted receives.
inline void naive_exchange(std::vector<RobotState>& robots, const VoronoiPartition& partition,
                           int iteration, TransferLedger& ledger) {
  const auto fresh = detail::fresh_samples(robots, iteration);
  ledger.begin_iteration(iteration, static_cast<int>(robots.size()));
  for (std::size_t i = 0; i < robots.size(); ++i) {
    for (int j : partition.neighbors(static_cast<int>(i))) {
      ledger.record_candidate(static_cast<int>(i), iteration);
      if (robots[i].samples.insert(fresh[static_cast<std::size_t>(j)]))
        ledger.record_accept(static_cast<int>(i), iteration);
    }
  }
}

// Thresholded exchange: each robot judges every neighbor sample against its
// pre-exchange model, so decisions are independent of enumeration order.
// Empty models accept unconditionally; uninformative bounds follow the
// configured policy (accept by default).
inline void constrained_exchange(std::vector<RobotState>& robots, const VoronoiPartition& partition,
                                 int iteration, double theta, ThresholdDirection direction,
                                 TransferLedger& ledger,
                                 InvalidBoundPolicy invalid_policy = InvalidBoundPolicy::Accept) {
  if (theta < 0.0) throw std::invalid_argument("constrained_exchange: theta must be nonnegative");
  const auto fresh = detail::fresh_samples(robots, iteration);
  ledger.begin_iteration(iteration, static_cast<int>(robots.size()));
  for (std::size_t i = 0; i < robots.size(); ++i) {
    for (int j : partition.neighbors(static_cast<int>(i))) {
      const Sample& candidate = fresh[static_cast<std::size_t>(j)];
      ledger.record_candidate(static_cast<int>(i), iteration);
      bool accept = true;
      if (!robots[i].model.empty()) {
        const ImpactBound bound = impact_bound(robots[i].model, candidate.location, candidate.value);
        if (bound.valid)
          accept = direction == ThresholdDirection::AcceptIfGeq ? bound.delta_k >= theta
                                                                : bound.delta_k <= theta;
        else
          accept = invalid_policy == InvalidBoundPolicy::Accept;
      }
      if (accept && robots[i].samples.insert(candidate))
        ledger.record_accept(static_cast<int>(i), iteration);
    }
  }
}

}  // namespace vorocover
