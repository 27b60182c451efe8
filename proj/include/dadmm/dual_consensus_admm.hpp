#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dadmm/consensus_admm.hpp"
#include "dadmm/graph.hpp"
#include "dadmm/inner_solvers.hpp"
#include "dadmm/metrics.hpp"
#include "dadmm/problem.hpp"

namespace dadmm {

/// Per-agent iterates of the dual consensus solvers: primal block x_i, local
/// dual copy nu_i, aggregated edge dual p_i. nu_prev keeps the previous
/// round's dual copies for the coupling identity between primal feasibility
/// and dual consensus.
struct DualConsensusState {
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> nu;
  std::vector<Eigen::VectorXd> nu_prev;
  std::vector<Eigen::VectorXd> p;
  int k = 0;
};

inline DualConsensusState init_dual_consensus_state(const ProblemP2& p2) {
  DualConsensusState s;
  const Eigen::Index m = p2.coupling_target.size();
  s.x.reserve(p2.agents.size());
  for (const auto& agent : p2.agents) s.x.push_back(Eigen::VectorXd::Zero(agent.dim));
  s.nu.assign(p2.agents.size(), Eigen::VectorXd::Zero(m));
  s.nu_prev = s.nu;
  s.p.assign(p2.agents.size(), Eigen::VectorXd::Zero(m));
  return s;
}

struct DualConsensusConfig {
  double c = 0.0;
  std::vector<double> beta;  // per-agent, inexact variant only
  InnerConfig inner;         // exact variant only
  int max_outer = 1000;
  double acc_target = 0.0;
  double feasibility_target = 0.0;
  double dual_consensus_target = 0.0;
};

struct DualRoundStats {
  std::vector<int> inner_iterations;
};

namespace detail {

inline void check_dual_inputs(const DualConsensusState& state, const ProblemP2& p2, const Graph& g,
                              double c) {
  if (!(c > 0.0)) throw std::invalid_argument("dual consensus round: c must be positive");
  if (state.x.size() != p2.agents.size() || static_cast<int>(state.x.size()) != g.n_agents()) {
    throw std::invalid_argument("dual consensus round: state/problem/graph size mismatch");
  }
}

}  // namespace detail

/// Closed-form dual-copy update shared by both variants:
///   nu_i = (1/(2|N_i|)) [ S_i - p_i/c + (E_i x_i - q/N)/c ],
/// where S_i sums previous-round (nu_i + nu_j) over neighbors.
inline Eigen::VectorXd nu_closed_form(const Eigen::VectorXd& neighbor_nu_sum,
                                      const Eigen::VectorXd& p_new,
                                      const Eigen::VectorXd& coupling_at_x, double c, int degree) {
  return (neighbor_nu_sum - p_new / c + coupling_at_x / c) / (2.0 * static_cast<double>(degree));
}

/// One exact dual consensus-ADMM round. Per agent: (1) dual aggregate update
/// from the nu snapshot, (2) the primal subproblem
///   min phi_i(x) + (c/(4|N_i|)) || (E_i x - q/N)/c - p_i/c + S_i ||^2
/// solved by the inner loop, (3) the closed-form nu update at the new x.
inline DualConsensusState dc_admm_round(const DualConsensusState& state, const ProblemP2& p2,
                                        const Graph& g, const DualConsensusConfig& cfg,
                                        DualRoundStats* stats = nullptr) {
  detail::check_dual_inputs(state, p2, g, cfg.c);
  const Eigen::VectorXd q_over_n = p2.coupling_target / static_cast<double>(g.n_agents());

  DualConsensusState next;
  next.k = state.k + 1;
  next.p = detail::dual_aggregate_update(state.p, state.nu, g, cfg.c);
  next.x.resize(state.x.size());
  next.nu.resize(state.nu.size());
  next.nu_prev = state.nu;
  if (stats) stats->inner_iterations.assign(state.x.size(), 0);

  for (int i = 0; i < g.n_agents(); ++i) {
    const auto& agent = p2.agents[static_cast<std::size_t>(i)];
    const int degree = g.degree(i);
    const Eigen::VectorXd& pi = next.p[static_cast<std::size_t>(i)];

    Eigen::VectorXd nu_sum = static_cast<double>(degree) * state.nu[static_cast<std::size_t>(i)];
    for (int j : g.neighbors(i)) nu_sum += state.nu[static_cast<std::size_t>(j)];

    // Constant part of w(x) = (E_i x - q/N - p_i)/c + S_i.
    const Eigen::VectorXd w0 = (-q_over_n - pi) / cfg.c + nu_sum;

    CompositeSubproblem sub;
    sub.dim = agent.dim;
    sub.reg = agent.reg;
    sub.smooth_gradient = [&agent, &w0, degree, c = cfg.c](const Eigen::VectorXd& x) {
      const Eigen::VectorXd w = agent.constraint_coupling * x / c + w0;
      Eigen::VectorXd grad = agent.constraint_coupling.transpose() * w / (2.0 * degree);
      if (agent.has_smooth()) grad += agent.smooth_gradient(x);
      return grad;
    };
    sub.smooth_value = [&agent, &w0, degree, c = cfg.c](const Eigen::VectorXd& x) {
      const Eigen::VectorXd w = agent.constraint_coupling * x / c + w0;
      double v = (c / (4.0 * degree)) * w.squaredNorm();
      if (agent.has_smooth()) v += agent.loss.value(agent.smooth_coupling * x);
      return v;
    };

    InnerConfig inner = cfg.inner;
    if (!(inner.step_size > 0.0) && !inner.line_search) {
      const double lip =
          (agent.has_smooth() ? agent.loss.lipschitz_grad * agent.lambda_max_ata : 0.0) +
          lambda_max_gram(agent.constraint_coupling) / (2.0 * degree * cfg.c);
      inner.step_size = lip > 0.0 ? 1.0 / lip : 1.0;  // flat smooth part
    }

    try {
      const InnerResult res = fista_solve(sub, state.x[static_cast<std::size_t>(i)], inner);
      next.x[static_cast<std::size_t>(i)] = res.solution;
      if (stats) stats->inner_iterations[static_cast<std::size_t>(i)] = res.inner_iterations_used;
    } catch (const NonFiniteGradientError&) {
      throw std::runtime_error("dc_admm_round: inner solve failed for agent " + std::to_string(i) +
                               " at outer round " + std::to_string(next.k));
    }

    const Eigen::VectorXd coupling =
        agent.constraint_coupling * next.x[static_cast<std::size_t>(i)] - q_over_n;
    next.nu[static_cast<std::size_t>(i)] = nu_closed_form(nu_sum, pi, coupling, cfg.c, degree);
  }
  return next;
}

/// One inexact dual consensus-ADMM round: the primal subproblem is replaced
/// by a single proximal-gradient step
///   x_i <- prox_g^beta[ x_i - (1/beta) A^T grad f(A x_i)
///                       - (1/(2 beta |N_i|)) E^T w(x_i) ],
/// followed by the same closed-form nu update at the new x.
inline DualConsensusState idc_admm_round(const DualConsensusState& state, const ProblemP2& p2,
                                         const Graph& g, const DualConsensusConfig& cfg) {
  detail::check_dual_inputs(state, p2, g, cfg.c);
  if (cfg.beta.size() != state.x.size()) {
    throw std::invalid_argument("idc_admm_round: one beta per agent is required");
  }
  const Eigen::VectorXd q_over_n = p2.coupling_target / static_cast<double>(g.n_agents());

  DualConsensusState next;
  next.k = state.k + 1;
  next.p = detail::dual_aggregate_update(state.p, state.nu, g, cfg.c);
  next.x.resize(state.x.size());
  next.nu.resize(state.nu.size());
  next.nu_prev = state.nu;

  for (int i = 0; i < g.n_agents(); ++i) {
    const auto& agent = p2.agents[static_cast<std::size_t>(i)];
    const int degree = g.degree(i);
    const double beta = cfg.beta[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& pi = next.p[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& xi = state.x[static_cast<std::size_t>(i)];

    Eigen::VectorXd nu_sum = static_cast<double>(degree) * state.nu[static_cast<std::size_t>(i)];
    for (int j : g.neighbors(i)) nu_sum += state.nu[static_cast<std::size_t>(j)];

    const Eigen::VectorXd w =
        (agent.constraint_coupling * xi - q_over_n - pi) / cfg.c + nu_sum;
    Eigen::VectorXd grad = agent.constraint_coupling.transpose() * w / (2.0 * degree);
    if (agent.has_smooth()) grad += agent.smooth_gradient(xi);
    if (!grad.allFinite()) {
      throw std::runtime_error("idc_admm_round: non-finite gradient for agent " +
                               std::to_string(i) + " at outer round " + std::to_string(next.k));
    }

    next.x[static_cast<std::size_t>(i)] = agent.reg.prox(xi - grad / beta, beta);

    const Eigen::VectorXd coupling =
        agent.constraint_coupling * next.x[static_cast<std::size_t>(i)] - q_over_n;
    next.nu[static_cast<std::size_t>(i)] = nu_closed_form(nu_sum, pi, coupling, cfg.c, degree);
  }
  return next;
}

struct KktResiduals {
  Eigen::VectorXd stationarity;  // per agent: dist(0, d phi_i(x_i) + E_i^T nu_i)
  double feasibility = 0.0;      // || sum_i E_i x_i - q ||
  double dual_consensus = 0.0;   // sum_i sum_{j in N_i} || nu_i - nu_j ||^2
};

/// Saddle-point residuals at the current iterates. Stationarity uses the
/// minimal-norm subgradient selection for the l1/box kinks.
inline KktResiduals kkt_residuals(const DualConsensusState& state, const ProblemP2& p2,
                                  const Graph& g) {
  KktResiduals res;
  res.stationarity.resize(static_cast<Eigen::Index>(p2.agents.size()));

  for (int i = 0; i < g.n_agents(); ++i) {
    const auto& agent = p2.agents[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& xi = state.x[static_cast<std::size_t>(i)];
    Eigen::VectorXd v = agent.constraint_coupling.transpose() * state.nu[static_cast<std::size_t>(i)];
    if (agent.has_smooth()) v += agent.smooth_gradient(xi);

    double sq = 0.0;
    for (Eigen::Index j = 0; j < xi.size(); ++j) {
      const double w = agent.reg.l1_weight_at(j, xi.size());
      const double a = agent.reg.box_bound_at(j, xi.size());
      double r;
      if (xi(j) >= a) {
        r = std::max(v(j) + w, 0.0);
      } else if (xi(j) <= -a) {
        r = std::max(w - v(j), 0.0);
      } else if (xi(j) > 0.0) {
        r = v(j) + w;
      } else if (xi(j) < 0.0) {
        r = v(j) - w;
      } else {
        r = std::max(std::abs(v(j)) - w, 0.0);
      }
      sq += r * r;
    }
    res.stationarity(i) = std::sqrt(sq);
  }

  res.feasibility = p2.constraint_residual(state.x).norm();

  double dc = 0.0;
  for (int i = 0; i < g.n_agents(); ++i) {
    for (int j : g.neighbors(i)) {
      dc += (state.nu[static_cast<std::size_t>(i)] - state.nu[static_cast<std::size_t>(j)])
                .squaredNorm();
    }
  }
  res.dual_consensus = dc;
  return res;
}

/// Residual of the identity coupling primal feasibility to dual consensus:
///   sum_i E_i x_i - q  =  c sum_i sum_{j in N_i} (nu_i + nu_j - nu_i' - nu_j')
/// with primes denoting the previous round. Holds for every iterate pair.
inline double coupling_identity_residual(const DualConsensusState& state, const ProblemP2& p2,
                                         const Graph& g, double c) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p2.coupling_target.size());
  for (int i = 0; i < g.n_agents(); ++i) {
    for (int j : g.neighbors(i)) {
      rhs += state.nu[static_cast<std::size_t>(i)] + state.nu[static_cast<std::size_t>(j)] -
             state.nu_prev[static_cast<std::size_t>(i)] - state.nu_prev[static_cast<std::size_t>(j)];
    }
  }
  rhs *= c;
  return (p2.constraint_residual(state.x) - rhs).norm();
}

enum class DualConsensusVariant { Exact, Inexact };

/// Runs one of the dual consensus solvers until |acc|, feasibility and
/// dual consensus all fall below their targets or the round budget runs out.
inline Trace run_dual_consensus(DualConsensusVariant variant, const ProblemP2& p2, const Graph& g,
                                const DualConsensusConfig& cfg, double reference_obj) {
  p2.validate();
  if (static_cast<int>(p2.agents.size()) != g.n_agents()) {
    throw std::invalid_argument("run_dual_consensus: problem/graph agent count mismatch");
  }

  Trace trace;
  trace.algorithm = variant == DualConsensusVariant::Exact ? "dc-admm" : "idc-admm";
  const Algorithm alg =
      variant == DualConsensusVariant::Exact ? Algorithm::DcAdmm : Algorithm::IdcAdmm;

  if (variant == DualConsensusVariant::Inexact) {
    for (std::size_t i = 0; i < p2.agents.size(); ++i) {
      const double bm = beta_min_idc(p2.agents[i], cfg.c, g.degree(static_cast<int>(i)));
      if (cfg.beta.at(i) <= bm) {
        trace.warnings.push_back("beta[" + std::to_string(i) + "]=" + format_double(cfg.beta[i]) +
                                 " does not exceed the convergence threshold " + format_double(bm));
      }
    }
  }

  DualConsensusState state = init_dual_consensus_state(p2);
  const auto t0 = std::chrono::steady_clock::now();
  std::int64_t flops = 0;
  double divergence_baseline = 0.0;

  auto record_round = [&](std::int64_t round_inner) {
    IterationRecord rec;
    rec.k = state.k;
    rec.objective = p2.objective(state.x);
    const AccuracyValue acc = accuracy(rec.objective, reference_obj);
    rec.acc = acc.value;
    trace.acc_absolute = acc.absolute;
    const KktResiduals kkt = kkt_residuals(state, p2, g);
    rec.feasibility = kkt.feasibility;
    rec.dual_consensus = kkt.dual_consensus;
    if (round_inner >= 0) rec.inner_iterations = round_inner;
    rec.cumulative_flops = flops;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.records.push_back(rec);

    Eigen::VectorXd psum = Eigen::VectorXd::Zero(p2.coupling_target.size());
    double pnorm_total = 1.0;
    for (const auto& pi : state.p) {
      psum += pi;
      pnorm_total += pi.norm();
    }
    trace.max_psum_violation = std::max(trace.max_psum_violation, psum.norm() / pnorm_total);
    if (state.k > 0) {
      trace.max_coupling_identity_residual =
          std::max(trace.max_coupling_identity_residual,
                   coupling_identity_residual(state, p2, g, cfg.c));
      if (variant == DualConsensusVariant::Exact) {
        trace.max_stationarity = std::max(trace.max_stationarity, kkt.stationarity.maxCoeff());
      }
    }
    return rec;
  };

  IterationRecord rec = record_round(-1);
  divergence_baseline = rec.dual_consensus;

  while (state.k < cfg.max_outer) {
    if (std::abs(rec.acc) < cfg.acc_target && rec.feasibility < cfg.feasibility_target &&
        rec.dual_consensus < cfg.dual_consensus_target) {
      trace.converged = true;
      return trace;
    }

    std::int64_t round_inner = -1;
    if (variant == DualConsensusVariant::Exact) {
      DualRoundStats stats;
      state = dc_admm_round(state, p2, g, cfg, &stats);
      round_inner = 0;
      for (std::size_t i = 0; i < stats.inner_iterations.size(); ++i) {
        round_inner += stats.inner_iterations[i];
        flops += flop_estimate(alg, p2.coupling_target.size(), p2.agents[i].dim,
                               stats.inner_iterations[i]);
      }
    } else {
      state = idc_admm_round(state, p2, g, cfg);
      for (const auto& agent : p2.agents) {
        flops += flop_estimate(alg, p2.coupling_target.size(), agent.dim, 1);
      }
    }

    rec = record_round(round_inner);

    if (!std::isfinite(rec.objective) || !std::isfinite(rec.dual_consensus)) {
      throw std::runtime_error("run_dual_consensus: non-finite diagnostics at round " +
                               std::to_string(state.k));
    }
    if (divergence_baseline <= 0.0) divergence_baseline = rec.dual_consensus;
    if (divergence_baseline > 0.0 && rec.dual_consensus > 1e6 * divergence_baseline) {
      throw std::runtime_error("run_dual_consensus: dual consensus error grew 1e6x over baseline " +
                               format_double(divergence_baseline) + " at round " +
                               std::to_string(state.k));
    }
  }

  trace.converged = std::abs(rec.acc) < cfg.acc_target &&
                    rec.feasibility < cfg.feasibility_target &&
                    rec.dual_consensus < cfg.dual_consensus_target;
  return trace;
}

}  // namespace dadmm
