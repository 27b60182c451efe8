#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dadmm/graph.hpp"
#include "dadmm/problem.hpp"
#include "dadmm/regularizer.hpp"

namespace dadmm {

/// Composite objective smooth(y) + g(y) handed to the accelerated
/// proximal-gradient loop. smooth_value is optional; it enables the
/// backtracking line search and descent diagnostics.
struct CompositeSubproblem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> smooth_gradient;
  std::function<double(const Eigen::VectorXd&)> smooth_value;  // may be empty
  Regularizer reg = Regularizer::zero();
  Eigen::Index dim = 0;
};

struct InnerConfig {
  double step_size = 0.0;       // fixed step rho; <= 0 means the caller derives one
  bool line_search = false;     // backtracking halving (requires smooth_value)
  double pgr_tolerance = 1e-5;  // stop when ||z - y~|| / (rho sqrt(K)) falls below
  int max_inner_iterations = 100000;
};

struct InnerResult {
  Eigen::VectorXd solution;
  int inner_iterations_used = 0;
  double final_pgr = 0.0;
  bool hit_iteration_limit = false;
};

/// Thrown when a gradient evaluation stops being finite; carries the iterate.
struct NonFiniteGradientError : std::runtime_error {
  explicit NonFiniteGradientError(Eigen::VectorXd at)
      : std::runtime_error("non-finite gradient encountered"), iterate(std::move(at)) {}
  Eigen::VectorXd iterate;
};

/// Accelerated proximal gradient with momentum (l-1)/(l+2):
///   y~^(l) = prox_g^{1/rho}[ z^(l-1) - rho grad(z^(l-1)) ]
///   z^(l)  = y~^(l) + ((l-1)/(l+2)) (y~^(l) - y~^(l-1))
/// stopping on the proximal-gradient residue ||z^(l-1) - y~^(l)|| / (rho sqrt(K)).
inline InnerResult fista_solve(const CompositeSubproblem& sub, const Eigen::VectorXd& start,
                               const InnerConfig& cfg) {
  if (!(cfg.pgr_tolerance > 0.0)) throw std::invalid_argument("fista_solve: pgr_tolerance must be positive");
  if (cfg.max_inner_iterations < 1) throw std::invalid_argument("fista_solve: need at least one iteration");
  if (!(cfg.step_size > 0.0) && !cfg.line_search) {
    throw std::invalid_argument("fista_solve: either a positive step size or line search is required");
  }
  if (cfg.line_search && !sub.smooth_value) {
    throw std::invalid_argument("fista_solve: line search requires a smooth_value oracle");
  }

  const double sqrt_k = std::sqrt(static_cast<double>(start.size()));
  Eigen::VectorXd y_prev = start;
  Eigen::VectorXd z = start;
  double rho = cfg.step_size > 0.0 ? cfg.step_size : 1.0;

  InnerResult result;
  for (int l = 1; l <= cfg.max_inner_iterations; ++l) {
    const Eigen::VectorXd grad = sub.smooth_gradient(z);
    if (!grad.allFinite()) throw NonFiniteGradientError(z);

    Eigen::VectorXd y_tilde = sub.reg.prox(z - rho * grad, 1.0 / rho);
    if (cfg.line_search) {
      const double fz = sub.smooth_value(z);
      for (int halvings = 0; halvings < 60; ++halvings) {
        const Eigen::VectorXd d = y_tilde - z;
        const double model = fz + grad.dot(d) + d.squaredNorm() / (2.0 * rho);
        if (sub.smooth_value(y_tilde) <= model + 1e-14 * std::abs(model)) break;
        rho *= 0.5;
        y_tilde = sub.reg.prox(z - rho * grad, 1.0 / rho);
      }
    }

    const double pgr = (z - y_tilde).norm() / (rho * sqrt_k);
    result.solution = y_tilde;
    result.inner_iterations_used = l;
    result.final_pgr = pgr;
    if (pgr < cfg.pgr_tolerance) return result;

    const double momentum = static_cast<double>(l - 1) / static_cast<double>(l + 2);
    z = y_tilde + momentum * (y_tilde - y_prev);
    y_prev = y_tilde;
  }
  result.hit_iteration_limit = true;
  return result;
}

struct ReferenceSolution {
  Eigen::VectorXd minimizer;
  double objective = 0.0;
  InnerResult inner;
};

/// Solves the pooled problem sum_i phi_i(y) with the accelerated
/// proximal-gradient loop; the returned objective is the accuracy
/// denominator used by the distributed runs.
inline ReferenceSolution centralized_reference(const ProblemP1& p, const InnerConfig& cfg) {
  p.validate();
  CompositeSubproblem sub;
  sub.dim = p.dim;
  sub.smooth_gradient = [&p](const Eigen::VectorXd& y) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(y.size());
    for (const auto& a : p.agents) g += a.smooth_gradient(y);
    return g;
  };
  sub.smooth_value = [&p](const Eigen::VectorXd& y) {
    double v = 0.0;
    for (const auto& a : p.agents) {
      if (a.has_smooth()) v += a.loss.value(a.smooth_coupling * y);
    }
    return v;
  };
  std::vector<Regularizer> regs;
  regs.reserve(p.agents.size());
  for (const auto& a : p.agents) regs.push_back(a.reg);
  sub.reg = sum_regularizers(regs);

  InnerConfig effective = cfg;
  if (!(effective.step_size > 0.0) && !effective.line_search) {
    double lip = 0.0;
    for (const auto& a : p.agents) {
      if (a.has_smooth()) lip += a.loss.lipschitz_grad * a.lambda_max_ata;
    }
    effective.step_size = lip > 0.0 ? 1.0 / lip : 1.0;
  }

  ReferenceSolution ref;
  ref.inner = fista_solve(sub, Eigen::VectorXd::Zero(p.dim), effective);
  ref.minimizer = ref.inner.solution;
  ref.objective = p.objective(ref.minimizer);
  return ref;
}

/// Metropolis mixing weights: w_ij = 1/(1 + max(d_i, d_j)) on edges,
/// diagonal absorbing the rest. Symmetric and doubly stochastic on any
/// connected graph.
inline Eigen::MatrixXd metropolis_weights(const Graph& g) {
  const int n = g.n_agents();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j : g.neighbors(i)) {
      w(i, j) = 1.0 / (1.0 + std::max(g.degree(i), g.degree(j)));
      row += w(i, j);
    }
    w(i, i) = 1.0 - row;
  }
  return w;
}

/// One round of the consensus-subgradient baseline: Metropolis averaging
/// followed by a diminishing step step_scale/k along a subgradient of the
/// local objective (0 picked at the l1 kink, box handled by projection).
inline std::vector<Eigen::VectorXd> subgradient_baseline_step(
    const std::vector<Eigen::VectorXd>& states, const Graph& g, const ProblemP1& p, int k,
    double step_scale = 10.0) {
  if (k < 1) throw std::invalid_argument("subgradient_baseline_step: k must be at least 1");
  if (states.size() != p.agents.size() || static_cast<int>(states.size()) != g.n_agents()) {
    throw std::invalid_argument("subgradient_baseline_step: state/agent count mismatch");
  }
  const Eigen::MatrixXd w = metropolis_weights(g);
  const double step = step_scale / static_cast<double>(k);

  std::vector<Eigen::VectorXd> next(states.size());
  for (int i = 0; i < g.n_agents(); ++i) {
    Eigen::VectorXd mixed = w(i, i) * states[static_cast<std::size_t>(i)];
    for (int j : g.neighbors(i)) mixed += w(i, j) * states[static_cast<std::size_t>(j)];

    const auto& agent = p.agents[static_cast<std::size_t>(i)];
    Eigen::VectorXd sub = agent.smooth_gradient(mixed);
    for (Eigen::Index c = 0; c < mixed.size(); ++c) {
      const double wl1 = agent.reg.l1_weight_at(c, mixed.size());
      if (mixed(c) > 0.0) sub(c) += wl1;
      else if (mixed(c) < 0.0) sub(c) -= wl1;
      // subgradient 0 at the kink
    }
    Eigen::VectorXd stepped = mixed - step * sub;
    for (Eigen::Index c = 0; c < stepped.size(); ++c) {
      const double a = agent.reg.box_bound_at(c, stepped.size());
      stepped(c) = std::min(a, std::max(-a, stepped(c)));
    }
    next[static_cast<std::size_t>(i)] = std::move(stepped);
  }
  return next;
}

}  // namespace dadmm
