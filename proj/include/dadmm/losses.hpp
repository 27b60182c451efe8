#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace dadmm {

/// Overflow-safe log(1 + exp(x)).
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Smooth convex loss oracle together with certified curvature constants.
///
/// `strong_convexity` is a lower bound on the Hessian that may only hold on
/// the compact domain |u_m| <= domain_bound; callers are responsible for
/// keeping iterates inside that domain (typically via a box regularizer).
struct SmoothLoss {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  double lipschitz_grad = 0.0;
  double strong_convexity = 0.0;
  double domain_bound = std::numeric_limits<double>::infinity();
};

/// Binary logistic loss sum_m log(1 + exp(-b_m u_m)) for labels b in {-1,+1}.
///
/// `u_bound` declares the compact domain |u_m| <= u_bound on which the loss is
/// strongly convex; the certified constant is sigmoid'(u_bound), the smallest
/// Hessian entry on that box.
inline SmoothLoss logistic_loss(const Eigen::VectorXd& labels, double u_bound) {
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) != 1.0 && labels(i) != -1.0) {
      throw std::invalid_argument("logistic_loss: labels must be +1 or -1, got " +
                                  std::to_string(labels(i)) + " at index " + std::to_string(i));
    }
  }
  if (!(u_bound > 0.0) || !std::isfinite(u_bound)) {
    throw std::invalid_argument("logistic_loss: u_bound must be positive and finite");
  }

  SmoothLoss loss;
  const Eigen::VectorXd b = labels;
  loss.value = [b](const Eigen::VectorXd& u) {
    if (u.size() != b.size()) throw std::invalid_argument("logistic value: dimension mismatch");
    double s = 0.0;
    for (Eigen::Index m = 0; m < u.size(); ++m) s += softplus(-b(m) * u(m));
    return s;
  };
  loss.gradient = [b](const Eigen::VectorXd& u) {
    if (u.size() != b.size()) throw std::invalid_argument("logistic gradient: dimension mismatch");
    Eigen::VectorXd g(u.size());
    for (Eigen::Index m = 0; m < u.size(); ++m) g(m) = -b(m) * sigmoid(-b(m) * u(m));
    return g;
  };
  loss.lipschitz_grad = 0.25;
  const double s = sigmoid(u_bound);
  loss.strong_convexity = s * (1.0 - s);
  loss.domain_bound = u_bound;
  return loss;
}

/// Squared residual ||b - u||^2 (note: no 1/2 factor, so L = sigma^2 = 2).
inline SmoothLoss quadratic_loss(const Eigen::VectorXd& target) {
  SmoothLoss loss;
  const Eigen::VectorXd b = target;
  loss.value = [b](const Eigen::VectorXd& u) {
    if (u.size() != b.size()) throw std::invalid_argument("quadratic value: dimension mismatch");
    return (b - u).squaredNorm();
  };
  loss.gradient = [b](const Eigen::VectorXd& u) {
    if (u.size() != b.size()) throw std::invalid_argument("quadratic gradient: dimension mismatch");
    return Eigen::VectorXd(2.0 * (u - b));
  };
  loss.lipschitz_grad = 2.0;
  loss.strong_convexity = 2.0;
  return loss;
}

}  // namespace dadmm
