#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dadmm/graph.hpp"
#include "dadmm/inner_solvers.hpp"
#include "dadmm/metrics.hpp"
#include "dadmm/problem.hpp"

namespace dadmm {

/// Per-agent iterates of the consensus solvers. p_i aggregates the edge
/// duals; it starts at zero and sums to zero across agents at every round.
struct ConsensusState {
  std::vector<Eigen::VectorXd> y;
  std::vector<Eigen::VectorXd> p;
  int k = 0;
};

inline ConsensusState init_consensus_state(const ProblemP1& p1,
                                           const Eigen::VectorXd& y0 = Eigen::VectorXd()) {
  ConsensusState s;
  const Eigen::VectorXd start = y0.size() > 0 ? y0 : Eigen::VectorXd::Zero(p1.dim);
  if (start.size() != p1.dim) throw std::invalid_argument("init_consensus_state: y0 dimension mismatch");
  s.y.assign(p1.agents.size(), start);
  s.p.assign(p1.agents.size(), Eigen::VectorXd::Zero(p1.dim));
  return s;
}

struct ConsensusConfig {
  double c = 0.0;
  std::vector<double> beta;  // per-agent, inexact variant only
  InnerConfig inner;         // exact variant only
  int max_outer = 1000;
  double acc_target = 0.0;
  double cserr_target = 0.0;
  Eigen::VectorXd y0;  // empty -> zeros

  double gamma(int i, double degree_times_2c) const { return beta.at(static_cast<std::size_t>(i)) + degree_times_2c; }
};

struct RoundStats {
  std::vector<int> inner_iterations;
};

namespace detail {

inline void check_consensus_inputs(const ConsensusState& state, const ProblemP1& p1, const Graph& g,
                                   double c) {
  if (!(c > 0.0)) throw std::invalid_argument("consensus round: c must be positive");
  if (state.y.size() != p1.agents.size() || state.p.size() != p1.agents.size() ||
      static_cast<int>(state.y.size()) != g.n_agents()) {
    throw std::invalid_argument("consensus round: state/problem/graph size mismatch");
  }
}

/// p_i <- p_i + c sum_{j in N_i} (y_i - y_j), from the previous round's snapshot.
inline std::vector<Eigen::VectorXd> dual_aggregate_update(const std::vector<Eigen::VectorXd>& p,
                                                          const std::vector<Eigen::VectorXd>& y,
                                                          const Graph& g, double c) {
  std::vector<Eigen::VectorXd> next(p.size());
  for (int i = 0; i < g.n_agents(); ++i) {
    Eigen::VectorXd acc = p[static_cast<std::size_t>(i)];
    for (int j : g.neighbors(i)) {
      acc += c * (y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(j)]);
    }
    next[static_cast<std::size_t>(i)] = std::move(acc);
  }
  return next;
}

}  // namespace detail

/// One exact consensus-ADMM round: dual aggregate update, then for every
/// agent the subproblem
///   min f_i(A_i y) + g_i(y) + y^T p_i + c sum_{j in N_i} ||y - (y_i + y_j)/2||^2
/// solved by the inner loop, warm-started at the previous iterate. All agents
/// read only round-(k-1) neighbor state.
inline ConsensusState c_admm_round(const ConsensusState& state, const ProblemP1& p1, const Graph& g,
                                   const ConsensusConfig& cfg, RoundStats* stats = nullptr) {
  detail::check_consensus_inputs(state, p1, g, cfg.c);
  ConsensusState next;
  next.k = state.k + 1;
  next.p = detail::dual_aggregate_update(state.p, state.y, g, cfg.c);
  next.y.resize(state.y.size());
  if (stats) stats->inner_iterations.assign(state.y.size(), 0);

  for (int i = 0; i < g.n_agents(); ++i) {
    const auto& agent = p1.agents[static_cast<std::size_t>(i)];
    const double degree = static_cast<double>(g.degree(i));
    const Eigen::VectorXd& pi = next.p[static_cast<std::size_t>(i)];

    // sum_j (y_i + y_j)/2 over neighbors, from the snapshot
    Eigen::VectorXd midpoint_sum = degree * 0.5 * state.y[static_cast<std::size_t>(i)];
    for (int j : g.neighbors(i)) midpoint_sum += 0.5 * state.y[static_cast<std::size_t>(j)];

    CompositeSubproblem sub;
    sub.dim = p1.dim;
    sub.reg = agent.reg;
    sub.smooth_gradient = [&agent, &pi, &midpoint_sum, degree, c = cfg.c](const Eigen::VectorXd& y) {
      return Eigen::VectorXd(agent.smooth_gradient(y) + pi +
                             2.0 * c * (degree * y - midpoint_sum));
    };
    sub.smooth_value = [&agent, &pi, &midpoint_sum, degree, c = cfg.c](const Eigen::VectorXd& y) {
      double v = agent.has_smooth() ? agent.loss.value(agent.smooth_coupling * y) : 0.0;
      v += y.dot(pi);
      v += c * (degree * y.squaredNorm() - 2.0 * y.dot(midpoint_sum));
      return v;  // constant terms dropped
    };

    InnerConfig inner = cfg.inner;
    if (!(inner.step_size > 0.0) && !inner.line_search) {
      const double lip =
          (agent.has_smooth() ? agent.loss.lipschitz_grad * agent.lambda_max_ata : 0.0) +
          2.0 * cfg.c * degree;
      inner.step_size = 1.0 / lip;
    }

    try {
      const InnerResult res = fista_solve(sub, state.y[static_cast<std::size_t>(i)], inner);
      next.y[static_cast<std::size_t>(i)] = res.solution;
      if (stats) stats->inner_iterations[static_cast<std::size_t>(i)] = res.inner_iterations_used;
    } catch (const NonFiniteGradientError&) {
      throw std::runtime_error("c_admm_round: inner solve failed for agent " + std::to_string(i) +
                               " at outer round " + std::to_string(next.k));
    }
  }
  return next;
}

/// One inexact consensus-ADMM round: dual aggregate update, then a single
/// proximal-gradient step per agent,
///   y_i <- prox_g^gamma[ (1/gamma)(beta y_i - A^T grad f(A y_i) - p_i
///                         + c sum_j (y_i + y_j)) ],  gamma = beta + 2 c |N_i|.
inline ConsensusState ic_admm_round(const ConsensusState& state, const ProblemP1& p1, const Graph& g,
                                    const ConsensusConfig& cfg) {
  detail::check_consensus_inputs(state, p1, g, cfg.c);
  if (cfg.beta.size() != state.y.size()) {
    throw std::invalid_argument("ic_admm_round: one beta per agent is required");
  }
  ConsensusState next;
  next.k = state.k + 1;
  next.p = detail::dual_aggregate_update(state.p, state.y, g, cfg.c);
  next.y.resize(state.y.size());

  for (int i = 0; i < g.n_agents(); ++i) {
    const auto& agent = p1.agents[static_cast<std::size_t>(i)];
    const double beta = cfg.beta[static_cast<std::size_t>(i)];
    const double gamma = beta + 2.0 * cfg.c * static_cast<double>(g.degree(i));
    const Eigen::VectorXd& yi = state.y[static_cast<std::size_t>(i)];

    Eigen::VectorXd neighbor_sum = static_cast<double>(g.degree(i)) * yi;
    for (int j : g.neighbors(i)) neighbor_sum += state.y[static_cast<std::size_t>(j)];

    const Eigen::VectorXd grad = agent.smooth_gradient(yi);
    if (!grad.allFinite()) {
      throw std::runtime_error("ic_admm_round: non-finite gradient for agent " + std::to_string(i) +
                               " at outer round " + std::to_string(next.k));
    }
    const Eigen::VectorXd arg =
        (beta * yi - grad - next.p[static_cast<std::size_t>(i)] + cfg.c * neighbor_sum) / gamma;
    next.y[static_cast<std::size_t>(i)] = agent.reg.prox(arg, gamma);
  }
  return next;
}

enum class ConsensusVariant { Exact, Inexact, Subgradient };

/// Runs one of the consensus solvers until both |acc| and cserr fall below
/// their targets or the round budget runs out. Deterministic given inputs.
inline Trace run_consensus(ConsensusVariant variant, const ProblemP1& p1, const Graph& g,
                           const ConsensusConfig& cfg, const ReferenceSolution& reference) {
  p1.validate();
  if (static_cast<int>(p1.agents.size()) != g.n_agents()) {
    throw std::invalid_argument("run_consensus: problem/graph agent count mismatch");
  }

  Trace trace;
  trace.algorithm = variant == ConsensusVariant::Exact      ? "c-admm"
                    : variant == ConsensusVariant::Inexact  ? "ic-admm"
                                                            : "subgrad";
  const Algorithm alg = variant == ConsensusVariant::Exact      ? Algorithm::CAdmm
                        : variant == ConsensusVariant::Inexact  ? Algorithm::IcAdmm
                                                                : Algorithm::Subgradient;

  if (variant == ConsensusVariant::Inexact) {
    const GraphSpectrum spec = compute_spectrum(g);
    for (std::size_t i = 0; i < p1.agents.size(); ++i) {
      const double bm = beta_min_ic(p1.agents[i], cfg.c, spec.lambda_min_d_plus_w);
      if (cfg.beta.at(i) <= bm) {
        trace.warnings.push_back("beta[" + std::to_string(i) + "]=" + format_double(cfg.beta[i]) +
                                 " does not exceed the convergence threshold " + format_double(bm));
      }
    }
  }

  ConsensusState state = init_consensus_state(p1, cfg.y0);
  const auto t0 = std::chrono::steady_clock::now();
  std::int64_t flops = 0;
  double divergence_baseline = 0.0;

  auto record_round = [&](std::int64_t round_inner) {
    IterationRecord rec;
    rec.k = state.k;
    const Eigen::VectorXd mean = agent_mean(state.y);
    rec.objective = p1.objective(mean);
    const AccuracyValue acc = accuracy(rec.objective, reference.objective);
    rec.acc = acc.value;
    trace.acc_absolute = acc.absolute;
    rec.cserr = consensus_error(state.y);
    if (round_inner >= 0) rec.inner_iterations = round_inner;
    rec.cumulative_flops = flops;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.records.push_back(rec);

    double psum_norm = 0.0;
    double pnorm_total = 1.0;
    Eigen::VectorXd psum = Eigen::VectorXd::Zero(p1.dim);
    for (const auto& pi : state.p) {
      psum += pi;
      pnorm_total += pi.norm();
    }
    psum_norm = psum.norm();
    trace.max_psum_violation = std::max(trace.max_psum_violation, psum_norm / pnorm_total);
    return rec;
  };

  IterationRecord rec = record_round(-1);
  divergence_baseline = rec.cserr;

  while (state.k < cfg.max_outer) {
    if (std::abs(rec.acc) < cfg.acc_target && rec.cserr < cfg.cserr_target) {
      trace.converged = true;
      return trace;
    }

    std::int64_t round_inner = -1;
    if (variant == ConsensusVariant::Exact) {
      RoundStats stats;
      state = c_admm_round(state, p1, g, cfg, &stats);
      round_inner = 0;
      for (std::size_t i = 0; i < stats.inner_iterations.size(); ++i) {
        round_inner += stats.inner_iterations[i];
        flops += flop_estimate(alg, p1.agents[i].smooth_coupling.rows(), p1.dim,
                               stats.inner_iterations[i]);
      }
    } else if (variant == ConsensusVariant::Inexact) {
      state = ic_admm_round(state, p1, g, cfg);
      for (const auto& agent : p1.agents) {
        flops += flop_estimate(alg, agent.smooth_coupling.rows(), p1.dim, 1);
      }
    } else {
      state.y = subgradient_baseline_step(state.y, g, p1, state.k + 1);
      state.k += 1;
      for (const auto& agent : p1.agents) {
        flops += flop_estimate(alg, agent.smooth_coupling.rows(), p1.dim, 1);
      }
    }

    rec = record_round(round_inner);

    if (!std::isfinite(rec.cserr) || !std::isfinite(rec.objective)) {
      throw std::runtime_error("run_consensus: non-finite diagnostics at round " +
                               std::to_string(state.k));
    }
    if (divergence_baseline <= 0.0) divergence_baseline = rec.cserr;
    if (divergence_baseline > 0.0 && rec.cserr > 1e6 * divergence_baseline) {
      throw std::runtime_error("run_consensus: consensus error grew 1e6x over its baseline " +
                               format_double(divergence_baseline) + " at round " +
                               std::to_string(state.k) + " (cserr=" + format_double(rec.cserr) +
                               ")");
    }
  }

  trace.converged = std::abs(rec.acc) < cfg.acc_target && rec.cserr < cfg.cserr_target;
  return trace;
}

}  // namespace dadmm
