#pragma once

// Gaussian-process regression with linear mean rho'x and unit-variance
// squared-exponential kernel. Hyperparameters are fitted by minimizing
//   log|K(tau) + s2*I| + (mu(rho) - y)' (K(tau) + s2*I)^-1 (mu(rho) - y)
// with rho profiled in closed form (generalized least squares) for each
// candidate tau on a log grid, then tau refined by golden-section search.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "vorocover/geometry.hpp"

namespace vorocover {

struct Hyperparams {
  Eigen::Vector2d rho = Eigen::Vector2d::Zero();  // mean slope
  double tau = 1.0;                               // kernel length scale, > 0
};

// One noisy measurement, identified by (origin_robot, iteration).
struct Sample {
  Point2 location;
  double value = 0.0;
  int origin_robot = -1;
  int iteration = -1;
};

// Insertion-ordered sample store with set semantics on the (robot, iteration)
// key. Order only matters for bitwise reproducibility of downstream sums.
class SampleSet {
 public:
  bool insert(const Sample& s) {
    if (!keys_.insert(key(s.origin_robot, s.iteration)).second) return false;
    items_.push_back(s);
    return true;
  }

  bool contains(int origin_robot, int iteration) const {
    return keys_.count(key(origin_robot, iteration)) > 0;
  }

  const Sample* find(int origin_robot, int iteration) const {
    if (!contains(origin_robot, iteration)) return nullptr;
    for (const Sample& s : items_)
      if (s.origin_robot == origin_robot && s.iteration == iteration) return &s;
    return nullptr;
  }

  int size() const { return static_cast<int>(items_.size()); }
  bool empty() const { return items_.empty(); }
  const std::vector<Sample>& items() const { return items_; }

  Eigen::Matrix<double, Eigen::Dynamic, 2> locations() const {
    Eigen::Matrix<double, Eigen::Dynamic, 2> X(size(), 2);
    for (int a = 0; a < size(); ++a) {
      X(a, 0) = items_[a].location.x;
      X(a, 1) = items_[a].location.y;
    }
    return X;
  }

  Eigen::VectorXd values() const {
    Eigen::VectorXd y(size());
    for (int a = 0; a < size(); ++a) y[a] = items_[a].value;
    return y;
  }

 private:
  static std::uint64_t key(int robot, int iteration) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(robot)) << 32) |
           static_cast<std::uint32_t>(iteration);
  }

  std::vector<Sample> items_;
  std::unordered_set<std::uint64_t> keys_;
};

inline double kernel(Point2 a, Point2 b, double tau) {
  return std::exp(-squared_norm(a - b) / (2.0 * tau * tau));
}

inline double mean_prior(Point2 x, const Eigen::Vector2d& rho) { return rho[0] * x.x + rho[1] * x.y; }

namespace detail {

// K + noise_var*I; only the upper triangle is evaluated, then mirrored.
inline Eigen::MatrixXd noise_kernel_matrix(const std::vector<Sample>& items, double tau,
                                           double noise_var) {
  const int n = static_cast<int>(items.size());
  Eigen::MatrixXd A(n, n);
  for (int a = 0; a < n; ++a) {
    A(a, a) = 1.0 + noise_var;
    for (int b = a + 1; b < n; ++b) {
      const double k = kernel(items[a].location, items[b].location, tau);
      A(a, b) = k;
      A(b, a) = k;
    }
  }
  return A;
}

inline Eigen::VectorXd prior_mean_vector(const std::vector<Sample>& items,
                                         const Eigen::Vector2d& rho) {
  Eigen::VectorXd mu(items.size());
  for (std::size_t a = 0; a < items.size(); ++a) mu[a] = mean_prior(items[a].location, rho);
  return mu;
}

inline double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

inline double neg_log_marginal_likelihood(const SampleSet& samples, const Hyperparams& hyper,
                                          double noise_var) {
  if (samples.empty()) throw std::invalid_argument("nlml: needs at least one sample");
  if (noise_var <= 0.0) throw std::invalid_argument("nlml: noise variance must be positive");
  const Eigen::MatrixXd A = detail::noise_kernel_matrix(samples.items(), hyper.tau, noise_var);
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("nlml: Cholesky factorization failed (ill-conditioned kernel)");
  const Eigen::VectorXd r = detail::prior_mean_vector(samples.items(), hyper.rho) - samples.values();
  return detail::log_det_from_llt(llt) + r.dot(llt.solve(r));
}

struct SearchConfig {
  double tau_min = 0.02;
  double tau_max = 2.0;
  int grid_points = 40;        // logarithmic tau grid
  double tau_default = 0.2;    // used when too few samples to fit
  int golden_iterations = 48;  // refinement inside the best grid bracket

  // Default bounds scale with the domain diameter.
  static SearchConfig for_diameter(double diam) {
    SearchConfig cfg;
    cfg.tau_min = 0.02 * diam;
    cfg.tau_max = 2.0 * diam;
    cfg.tau_default = std::sqrt(cfg.tau_min * cfg.tau_max);
    return cfg;
  }
};

namespace detail {

struct TauEval {
  double nlml = std::numeric_limits<double>::infinity();
  Eigen::Vector2d rho = Eigen::Vector2d::Zero();
};

// Profiles rho by GLS for a fixed tau: rho = (X'A^-1 X)^-1 X'A^-1 y. Falls
// back to rho = 0 when the normal matrix is numerically singular (locations
// collinear through the origin).
inline TauEval evaluate_tau(const std::vector<Sample>& items,
                            const Eigen::Matrix<double, Eigen::Dynamic, 2>& X,
                            const Eigen::VectorXd& y, double tau, double noise_var) {
  TauEval out;
  const Eigen::MatrixXd A = noise_kernel_matrix(items, tau, noise_var);
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) return out;
  const Eigen::Matrix<double, Eigen::Dynamic, 2> AiX = llt.solve(X);
  const Eigen::VectorXd Aiy = llt.solve(y);
  const Eigen::Matrix2d G = X.transpose() * AiX;
  const Eigen::Vector2d b = X.transpose() * Aiy;
  const double det = G.determinant();
  Eigen::Vector2d rho = Eigen::Vector2d::Zero();
  if (std::abs(det) > 1e-12 * std::max(1.0, std::abs(G(0, 0) * G(1, 1)))) {
    rho[0] = (G(1, 1) * b[0] - G(0, 1) * b[1]) / det;
    rho[1] = (G(0, 0) * b[1] - G(1, 0) * b[0]) / det;
  }
  const Eigen::VectorXd r = X * rho - y;
  const Eigen::VectorXd Air = AiX * rho - Aiy;  // A^-1 r, reusing the solves above
  out.nlml = log_det_from_llt(llt) + r.dot(Air);
  out.rho = rho;
  return out;
}

}  // namespace detail

inline Hyperparams fit_hyperparams(const SampleSet& samples, double noise_var,
                                   const SearchConfig& search) {
  Hyperparams out;
  out.tau = search.tau_default;
  if (samples.size() < 3) return out;  // under-determined: prior-default hyperparameters

  const auto& items = samples.items();
  const Eigen::Matrix<double, Eigen::Dynamic, 2> X = samples.locations();
  const Eigen::VectorXd y = samples.values();

  const double lo = std::log(search.tau_min);
  const double hi = std::log(search.tau_max);
  const int g = std::max(search.grid_points, 2);
  auto eval_log_tau = [&](double t) { return detail::evaluate_tau(items, X, y, std::exp(t), noise_var); };

  int best_k = 0;
  detail::TauEval best;
  for (int k = 0; k < g; ++k) {
    const double t = lo + (hi - lo) * k / (g - 1);
    const detail::TauEval e = eval_log_tau(t);
    if (e.nlml < best.nlml) {
      best = e;
      best_k = k;
    }
  }
  double best_t = lo + (hi - lo) * best_k / (g - 1);

  // Golden-section refinement inside the bracket around the best grid point.
  const double step = (hi - lo) / (g - 1);
  double a = std::max(lo, best_t - step);
  double b = std::min(hi, best_t + step);
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  detail::TauEval f1 = eval_log_tau(x1);
  detail::TauEval f2 = eval_log_tau(x2);
  for (int it = 0; it < search.golden_iterations && (b - a) > 1e-10; ++it) {
    if (f1.nlml <= f2.nlml) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = eval_log_tau(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = eval_log_tau(x2);
    }
  }
  const detail::TauEval refined = f1.nlml <= f2.nlml ? f1 : f2;
  const double refined_t = f1.nlml <= f2.nlml ? x1 : x2;
  if (refined.nlml < best.nlml) {
    best = refined;
    best_t = refined_t;
  }
  out.rho = best.rho;
  out.tau = std::exp(best_t);
  return out;
}

// Immutable posterior model: caches the Cholesky factor of K + s2*I, the
// weight vector alpha = (K + s2*I)^-1 (y - mu), and the spectral norm of the
// inverse (needed by the communication impact bound).
class GpModel {
 public:
  GpModel() = default;

  GpModel(SampleSet samples, Hyperparams hyper, double noise_var)
      : samples_(std::move(samples)), hyper_(hyper), noise_var_(noise_var) {
    if (noise_var_ <= 0.0) throw std::invalid_argument("GpModel: noise variance must be positive");
    const int n = samples_.size();
    if (n == 0) return;
    X_ = samples_.locations();
    const Eigen::MatrixXd A = detail::noise_kernel_matrix(samples_.items(), hyper_.tau, noise_var_);
    llt_.compute(A);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("GpModel: Cholesky factorization failed");
    alpha_ = llt_.solve(samples_.values() - detail::prior_mean_vector(samples_.items(), hyper_.rho));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
    const double lambda_min = eig.eigenvalues().minCoeff();
    if (lambda_min <= 0.0) throw std::runtime_error("GpModel: kernel matrix not positive definite");
    inverse_norm_ = 1.0 / lambda_min;
  }

  static GpModel fit(SampleSet samples, double noise_var, const SearchConfig& search) {
    const Hyperparams hyper = fit_hyperparams(samples, noise_var, search);
    return GpModel(std::move(samples), hyper, noise_var);
  }

  int sample_count() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const SampleSet& samples() const { return samples_; }
  const Hyperparams& hyper() const { return hyper_; }
  double noise_var() const { return noise_var_; }

  // Kernel vector of a query point against the stored sample locations.
  Eigen::VectorXd kernel_vector(Point2 x) const {
    Eigen::VectorXd k(samples_.size());
    for (int a = 0; a < samples_.size(); ++a)
      k[a] = kernel(samples_.items()[static_cast<std::size_t>(a)].location, x, hyper_.tau);
    return k;
  }

  // (K + s2*I)^-1 v
  Eigen::VectorXd solve_noise_cov(const Eigen::VectorXd& v) const { return llt_.solve(v); }

  // Spectral norm of (K + s2*I)^-1, i.e. 1 / lambda_min.
  double inverse_norm() const { return inverse_norm_; }

  double posterior_mean(Point2 x) const {
    if (samples_.empty()) return mean_prior(x, hyper_.rho);
    return mean_prior(x, hyper_.rho) + kernel_vector(x).dot(alpha_);
  }

  double posterior_std(Point2 x) const {
    if (samples_.empty()) return std::sqrt(kernel(x, x, hyper_.tau));
    const Eigen::VectorXd k = kernel_vector(x);
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    return std::sqrt(std::max(0.0, 1.0 - v.squaredNorm()));
  }

  // Batched posterior over the whole domain lattice, reusing one
  // factorization. Semantically the pointwise queries above.
  std::pair<ScalarField2D, ScalarField2D> posterior_field(const ConvexDomain& domain) const {
    const int g = domain.lattice_size();
    ScalarField2D mean(domain);
    ScalarField2D sd(domain);
    const int n = samples_.size();
    if (n == 0) {
      for (int id = 0; id < g; ++id) mean.values[id] = mean_prior(domain.lattice_point(id), hyper_.rho);
      sd.values.setOnes();
      return {std::move(mean), std::move(sd)};
    }
    Eigen::MatrixXd Q(g, 2);
    for (int id = 0; id < g; ++id) {
      const Point2 p = domain.lattice_point(id);
      Q(id, 0) = p.x;
      Q(id, 1) = p.y;
    }
    Eigen::MatrixXd Kq(n, g);
    const double scale = -0.5 / (hyper_.tau * hyper_.tau);
    for (int a = 0; a < n; ++a) {
      Kq.row(a) = (((Q.col(0).array() - X_(a, 0)).square() + (Q.col(1).array() - X_(a, 1)).square()) *
                   scale)
                      .exp();
    }
    mean.values = Q * hyper_.rho + Kq.transpose() * alpha_;
    llt_.matrixL().solveInPlace(Kq);
    sd.values = (1.0 - Kq.colwise().squaredNorm().array()).max(0.0).sqrt();
    return {std::move(mean), std::move(sd)};
  }

 private:
  SampleSet samples_;
  Hyperparams hyper_;
  double noise_var_ = 0.01;
  Eigen::Matrix<double, Eigen::Dynamic, 2> X_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double inverse_norm_ = 0.0;
};

}  // namespace vorocover
