#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace dadmm {

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method.
/// Intended for the small dense problems that show up here (agent counts
/// and per-agent block dimensions stay in the hundreds at most).
inline Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (m.cols() != n) {
    throw std::invalid_argument("symmetric_eigenvalues: matrix must be square");
  }
  if (!m.isApprox(m.transpose(), 1e-12)) {
    throw std::invalid_argument("symmetric_eigenvalues: matrix must be symmetric");
  }
  if (n == 0) return Eigen::VectorXd();

  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1.0);
  const double tol = 1e-15 * scale;

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= tol) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        // Stable rotation choice: t = sign(theta) / (|theta| + sqrt(theta^2 + 1)).
        double t;
        if (theta >= 0) {
          t = 1.0 / (theta + std::sqrt(theta * theta + 1.0));
        } else {
          t = -1.0 / (-theta + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Eigen::Index i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double api = a(p, i);
          const double aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
      }
    }
  }

  Eigen::VectorXd evals = a.diagonal();
  std::sort(evals.data(), evals.data() + n);
  return evals;
}

inline double lambda_max_symmetric(const Eigen::MatrixXd& m) {
  return symmetric_eigenvalues(m).maxCoeff();
}

inline double lambda_min_symmetric(const Eigen::MatrixXd& m) {
  return symmetric_eigenvalues(m).minCoeff();
}

/// Largest eigenvalue of A^T A, computed by power iteration on the Gram
/// operator (A is applied twice per step; A^T A is never formed).
inline double lambda_max_gram(const Eigen::MatrixXd& a, double tol = 1e-10,
                              int max_iterations = 100000) {
  const Eigen::Index k = a.cols();
  if (k == 0 || a.rows() == 0) return 0.0;
  if (a.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  // Deterministic pseudo-random start; a plain ones vector can be orthogonal
  // to the top eigenvector on structured inputs.
  Eigen::VectorXd v(k);
  std::uint64_t state = 0x9e3779b97f4a7c15ull;
  for (Eigen::Index i = 0; i < k; ++i) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    v(i) = 1.0 + static_cast<double>((state >> 11) & 0xffff) / 65536.0;
  }
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd w = a.transpose() * (a * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double lambda_new = v.dot(w);
    w /= norm;
    const bool converged = std::abs(lambda_new - lambda) <= tol * std::max(1.0, std::abs(lambda_new));
    lambda = lambda_new;
    v = w;
    if (converged && it > 0) break;
  }
  return lambda;
}

}  // namespace dadmm
