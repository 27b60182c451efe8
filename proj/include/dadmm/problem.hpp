#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dadmm/eigensolve.hpp"
#include "dadmm/losses.hpp"
#include "dadmm/regularizer.hpp"

namespace dadmm {

/// One agent's objective phi(x) = f(A x) + g(x), plus the constraint
/// coupling E used by the linearly coupled problem form. A and E may each be
/// absent (0 rows); g is always present (possibly zero).
struct AgentObjective {
  Eigen::MatrixXd smooth_coupling;      // A, (M_f x K); 0x0 when no smooth part
  SmoothLoss loss;                      // meaningful only when smooth part present
  Regularizer reg = Regularizer::zero();
  Eigen::MatrixXd constraint_coupling;  // E, (M x K); 0x0 for the consensus problem
  double lambda_max_ata = 0.0;          // cached lambda_max(A^T A)
  Eigen::Index dim = 0;                 // K, the local variable dimension

  bool has_smooth() const { return smooth_coupling.rows() > 0; }

  double value(const Eigen::VectorXd& x) const {
    double v = reg.value(x);
    if (has_smooth()) v += loss.value(smooth_coupling * x);
    return v;
  }

  /// A^T grad f(A x); zero when there is no smooth part.
  Eigen::VectorXd smooth_gradient(const Eigen::VectorXd& x) const {
    if (!has_smooth()) return Eigen::VectorXd::Zero(x.size());
    return smooth_coupling.transpose() * loss.gradient(smooth_coupling * x);
  }
};

inline AgentObjective make_agent(Eigen::MatrixXd a, SmoothLoss loss, Regularizer reg) {
  AgentObjective agent;
  agent.dim = a.cols();
  agent.smooth_coupling = std::move(a);
  agent.loss = std::move(loss);
  agent.reg = std::move(reg);
  agent.lambda_max_ata = lambda_max_gram(agent.smooth_coupling);
  return agent;
}

/// Regularizer-only agent (used by the column-partitioned blocks).
inline AgentObjective make_prox_agent(Eigen::Index dim, Regularizer reg) {
  AgentObjective agent;
  agent.dim = dim;
  agent.reg = std::move(reg);
  return agent;
}

/// Shared-variable problem: min_y sum_i phi_i(y), all agents over the same y.
struct ProblemP1 {
  std::vector<AgentObjective> agents;
  Eigen::Index dim = 0;

  void validate() const {
    if (agents.empty()) throw std::invalid_argument("ProblemP1: no agents");
    for (const auto& a : agents) {
      if (a.dim != dim) throw std::invalid_argument("ProblemP1: all agents must share the dimension");
      if (a.constraint_coupling.rows() > 0) {
        throw std::invalid_argument("ProblemP1: agents must not carry constraint couplings");
      }
    }
  }

  double objective(const Eigen::VectorXd& y) const {
    double v = 0.0;
    for (const auto& a : agents) v += a.value(y);
    return v;
  }
};

/// Linearly coupled problem: min sum_i phi_i(x_i) s.t. sum_i E_i x_i = q.
/// Local block dimensions may differ (the slack-augmented block is wider).
struct ProblemP2 {
  std::vector<AgentObjective> agents;
  Eigen::VectorXd coupling_target;  // q

  void validate() const {
    if (agents.empty()) throw std::invalid_argument("ProblemP2: no agents");
    for (const auto& a : agents) {
      if (a.constraint_coupling.rows() != coupling_target.size()) {
        throw std::invalid_argument("ProblemP2: every E_i must have rows matching q");
      }
      if (a.constraint_coupling.cols() != a.dim) {
        throw std::invalid_argument("ProblemP2: E_i columns must match the local dimension");
      }
    }
  }

  double objective(const std::vector<Eigen::VectorXd>& x) const {
    if (x.size() != agents.size()) throw std::invalid_argument("ProblemP2: state size mismatch");
    double v = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i) v += agents[i].value(x[i]);
    return v;
  }

  Eigen::VectorXd constraint_residual(const std::vector<Eigen::VectorXd>& x) const {
    Eigen::VectorXd r = -coupling_target;
    for (std::size_t i = 0; i < agents.size(); ++i) r += agents[i].constraint_coupling * x[i];
    return r;
  }
};

/// Step-size threshold of the inexact consensus update:
/// (L^2/sigma^2) lambda_max(A^T A) - c lambda_min(D+W). Callers pick beta
/// strictly above max(0, value); the certified regime additionally needs the
/// value itself positive.
inline double beta_min_ic(const AgentObjective& agent, double c, double lambda_min_dw) {
  if (!(c > 0.0)) throw std::invalid_argument("beta_min_ic: c must be positive");
  if (lambda_min_dw < 0.0) throw std::invalid_argument("beta_min_ic: lambda_min must be nonnegative");
  double smooth_term = 0.0;
  if (agent.has_smooth()) {
    const double sigma2 = agent.loss.strong_convexity;
    if (!(sigma2 > 0.0)) {
      throw std::invalid_argument("beta_min_ic: smooth loss must have positive strong convexity");
    }
    const double l = agent.loss.lipschitz_grad;
    smooth_term = (l * l / sigma2) * agent.lambda_max_ata;
  }
  return smooth_term - c * lambda_min_dw;
}

/// Step-size threshold of the inexact dual consensus update:
/// lambda_max( (L^2/sigma^2) A^T A + (1/(2 |N_i| c)) E^T E ).
inline double beta_min_idc(const AgentObjective& agent, double c, int degree) {
  if (!(c > 0.0)) throw std::invalid_argument("beta_min_idc: c must be positive");
  if (degree < 1) throw std::invalid_argument("beta_min_idc: degree must be at least 1");
  const Eigen::Index k = agent.dim;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
  if (agent.has_smooth()) {
    const double sigma2 = agent.loss.strong_convexity;
    if (!(sigma2 > 0.0)) {
      throw std::invalid_argument("beta_min_idc: smooth loss must have positive strong convexity");
    }
    const double l = agent.loss.lipschitz_grad;
    m += (l * l / sigma2) * (agent.smooth_coupling.transpose() * agent.smooth_coupling);
  }
  if (agent.constraint_coupling.rows() > 0) {
    m += (1.0 / (2.0 * degree * c)) *
         (agent.constraint_coupling.transpose() * agent.constraint_coupling);
  }
  if (m.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  return lambda_max_symmetric(m);
}

/// Default beta selection: a fixed multiplicative margin above the threshold
/// plus a small floor, so the strict inequality stays checkable.
inline double choose_beta(double beta_min_value, double margin = 1.05, double floor = 1e-3) {
  return margin * std::max(0.0, beta_min_value) + floor;
}

/// Row-partitioned split: agent i receives rows [i*M, (i+1)*M).
inline std::vector<Eigen::MatrixXd> partition_rows(const Eigen::MatrixXd& a, int n_agents) {
  if (n_agents < 1) throw std::invalid_argument("partition_rows: need at least one agent");
  if (a.rows() % n_agents != 0) {
    throw std::invalid_argument("partition_rows: row count " + std::to_string(a.rows()) +
                                " not divisible by " + std::to_string(n_agents));
  }
  const Eigen::Index m = a.rows() / n_agents;
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) blocks.push_back(a.middleRows(i * m, m));
  return blocks;
}

inline std::vector<Eigen::VectorXd> partition_rows(const Eigen::VectorXd& b, int n_agents) {
  if (n_agents < 1) throw std::invalid_argument("partition_rows: need at least one agent");
  if (b.size() % n_agents != 0) {
    throw std::invalid_argument("partition_rows: length " + std::to_string(b.size()) +
                                " not divisible by " + std::to_string(n_agents));
  }
  const Eigen::Index m = b.size() / n_agents;
  std::vector<Eigen::VectorXd> blocks;
  blocks.reserve(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) blocks.push_back(b.segment(i * m, m));
  return blocks;
}

/// Column-partitioned split: agent i receives columns [i*K, (i+1)*K).
inline std::vector<Eigen::MatrixXd> partition_columns(const Eigen::MatrixXd& e, int n_agents) {
  if (n_agents < 1) throw std::invalid_argument("partition_columns: need at least one agent");
  if (e.cols() % n_agents != 0) {
    throw std::invalid_argument("partition_columns: column count " + std::to_string(e.cols()) +
                                " not divisible by " + std::to_string(n_agents));
  }
  const Eigen::Index k = e.cols() / n_agents;
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) blocks.push_back(e.middleCols(i * k, k));
  return blocks;
}

/// Column-partitioned logistic regression in coupled form. The slack
/// z = sum_i E_i x_i carrying the logistic loss is co-located with agent 0 as
/// an augmented block [x_0; z] with coupling [E_0, -I] and q = 0, so the
/// generic coupled-problem updates apply verbatim per block.
///
/// `slack_box` bounds |z_m|; it certifies strong convexity of the logistic
/// term and leaves the optimum unchanged as long as it is inactive there.
/// Pass 0 to derive the exact reformulation bound max_m sum_i ||e_im||_1 * a.
inline ProblemP2 build_cpd_logistic_p2(const std::vector<Eigen::MatrixXd>& e_blocks,
                                       const Eigen::VectorXd& labels, double l1_weight,
                                       double box_bound, double slack_box = 0.0) {
  if (e_blocks.empty()) throw std::invalid_argument("build_cpd_logistic_p2: no blocks");
  const Eigen::Index m = e_blocks.front().rows();
  if (labels.size() != m) {
    throw std::invalid_argument("build_cpd_logistic_p2: labels must match the row count");
  }
  for (const auto& e : e_blocks) {
    if (e.rows() != m) throw std::invalid_argument("build_cpd_logistic_p2: inconsistent row counts");
  }
  if (!(box_bound > 0.0)) throw std::invalid_argument("build_cpd_logistic_p2: box bound must be positive");

  if (slack_box <= 0.0) {
    for (Eigen::Index r = 0; r < m; ++r) {
      double row_l1 = 0.0;
      for (const auto& e : e_blocks) row_l1 += e.row(r).cwiseAbs().sum();
      slack_box = std::max(slack_box, row_l1 * box_bound);
    }
    if (slack_box <= 0.0) slack_box = 1.0;  // all-zero data
  }

  ProblemP2 p2;
  p2.coupling_target = Eigen::VectorXd::Zero(m);

  // Agent 0: augmented block [x_0; z].
  {
    const Eigen::Index k0 = e_blocks.front().cols();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, k0 + m);
    a.rightCols(m) = Eigen::MatrixXd::Identity(m, m);
    AgentObjective agent = make_agent(
        a, logistic_loss(labels, slack_box),
        Regularizer::blocks({{k0, l1_weight, box_bound}, {m, 0.0, slack_box}}));
    agent.constraint_coupling.resize(m, k0 + m);
    agent.constraint_coupling << e_blocks.front(), -Eigen::MatrixXd::Identity(m, m);
    p2.agents.push_back(std::move(agent));
  }
  for (std::size_t i = 1; i < e_blocks.size(); ++i) {
    AgentObjective agent =
        make_prox_agent(e_blocks[i].cols(), Regularizer::l1_box(l1_weight, box_bound));
    agent.constraint_coupling = e_blocks[i];
    p2.agents.push_back(std::move(agent));
  }
  p2.validate();
  return p2;
}

}  // namespace dadmm
