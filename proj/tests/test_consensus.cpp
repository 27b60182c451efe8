#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "dadmm/consensus_admm.hpp"
#include "dadmm/graph.hpp"
#include "dadmm/metrics.hpp"

using dadmm::ConsensusConfig;
using dadmm::ConsensusState;
using dadmm::Regularizer;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

dadmm::Graph two_agents() {
  Eigen::MatrixXi adj(2, 2);
  adj << 0, 1, 1, 0;
  return dadmm::Graph(adj);
}

double sum_p_norm(const ConsensusState& s) {
  VectorXd total = VectorXd::Zero(s.p.front().size());
  for (const auto& p : s.p) total += p;
  return total.norm();
}

}  // namespace

TEST_CASE("exact round: stationary start is a fixed point") {
  const auto g = two_agents();
  dadmm::ProblemP1 p1;
  p1.dim = 2;
  VectorXd target(2);
  target << 0.4, -0.2;
  for (int i = 0; i < 2; ++i) {
    p1.agents.push_back(dadmm::make_agent(MatrixXd::Identity(2, 2), dadmm::quadratic_loss(target),
                                          Regularizer::zero()));
  }
  ConsensusConfig cfg;
  cfg.c = 0.5;
  cfg.inner.pgr_tolerance = 1e-12;

  ConsensusState state = dadmm::init_consensus_state(p1, target);
  const ConsensusState next = dadmm::c_admm_round(state, p1, g, cfg);
  for (int i = 0; i < 2; ++i) {
    CHECK(next.p[i].norm() == 0.0);
    CHECK((next.y[i] - target).norm() < 1e-10);
  }
}

TEST_CASE("exact round matches the hand-derived scalar closed form") {
  // Two agents, K = 1, f_i(y) = (y - t_i)^2, g = 0. The subproblem
  //   min (y - t_i)^2 + y p_i + c (y - (y1 + y2)/2)^2
  // has the closed form y = (2 t_i - p_i + c (y1 + y2)) / (2 + 2c)
  // with p_i updated first.
  const auto g = two_agents();
  const double t[2] = {0.8, -0.5};
  dadmm::ProblemP1 p1;
  p1.dim = 1;
  for (int i = 0; i < 2; ++i) {
    VectorXd ti(1);
    ti << t[i];
    p1.agents.push_back(
        dadmm::make_agent(MatrixXd::Identity(1, 1), dadmm::quadratic_loss(ti), Regularizer::zero()));
  }
  ConsensusConfig cfg;
  cfg.c = 0.7;
  cfg.inner.pgr_tolerance = 1e-13;

  ConsensusState state = dadmm::init_consensus_state(p1);
  state.y[0](0) = 0.5;
  state.y[1](0) = -0.3;

  const ConsensusState next = dadmm::c_admm_round(state, p1, g, cfg);

  const double y1 = 0.5, y2 = -0.3, c = cfg.c;
  const double p1_new = c * (y1 - y2);
  const double p2_new = c * (y2 - y1);
  const double y1_expected = (2.0 * t[0] - p1_new + c * (y1 + y2)) / (2.0 + 2.0 * c);
  const double y2_expected = (2.0 * t[1] - p2_new + c * (y1 + y2)) / (2.0 + 2.0 * c);

  CHECK(next.p[0](0) == Catch::Approx(p1_new).epsilon(1e-14));
  CHECK(next.p[1](0) == Catch::Approx(p2_new).epsilon(1e-14));
  CHECK(next.y[0](0) == Catch::Approx(y1_expected).margin(1e-9));
  CHECK(next.y[1](0) == Catch::Approx(y2_expected).margin(1e-9));
  CHECK(sum_p_norm(next) < 1e-15);
}

TEST_CASE("aggregated duals sum to zero after any round") {
  std::mt19937_64 rng(42);
  const auto g = dadmm::generate_connected_graph(6, 0.5, 9, true);
  dadmm::ProblemP1 p1;
  p1.dim = 3;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 6; ++i) {
    MatrixXd a(4, 3);
    VectorXd b(4);
    for (int r = 0; r < 4; ++r) {
      b(r) = normal(rng);
      for (int cc = 0; cc < 3; ++cc) a(r, cc) = normal(rng);
    }
    p1.agents.push_back(dadmm::make_agent(a, dadmm::quadratic_loss(b), Regularizer::l1(0.05)));
  }
  ConsensusConfig cfg;
  cfg.c = 0.3;
  cfg.inner.pgr_tolerance = 1e-8;
  cfg.beta.assign(6, 5.0);

  ConsensusState state = dadmm::init_consensus_state(p1);
  for (auto& y : state.y) {
    for (int j = 0; j < 3; ++j) y(j) = normal(rng);
  }
  for (int round = 0; round < 5; ++round) {
    state = dadmm::c_admm_round(state, p1, g, cfg);
    CHECK(sum_p_norm(state) < 1e-12);
  }
  ConsensusState inexact = dadmm::init_consensus_state(p1);
  for (int round = 0; round < 5; ++round) {
    inexact = dadmm::ic_admm_round(inexact, p1, g, cfg);
    CHECK(sum_p_norm(inexact) < 1e-12);
  }
}

TEST_CASE("inexact round: zero-gradient consensus start is a fixed point") {
  const auto g = two_agents();
  dadmm::ProblemP1 p1;
  p1.dim = 2;
  VectorXd y0(2);
  y0 << 0.25, -0.75;
  for (int i = 0; i < 2; ++i) {
    p1.agents.push_back(
        dadmm::make_agent(MatrixXd::Identity(2, 2), dadmm::quadratic_loss(y0), Regularizer::zero()));
  }
  ConsensusConfig cfg;
  cfg.c = 0.4;
  cfg.beta.assign(2, 3.0);
  ConsensusState state = dadmm::init_consensus_state(p1, y0);
  const ConsensusState next = dadmm::ic_admm_round(state, p1, g, cfg);
  for (int i = 0; i < 2; ++i) {
    CHECK(next.p[i].norm() == 0.0);
    CHECK((next.y[i] - y0).norm() < 1e-15);
  }
}

TEST_CASE("inexact round from a common point collapses to a plain prox-gradient step") {
  const auto g = two_agents();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  dadmm::ProblemP1 p1;
  p1.dim = 3;
  std::vector<MatrixXd> mats;
  for (int i = 0; i < 2; ++i) {
    MatrixXd a(4, 3);
    VectorXd b(4);
    for (int r = 0; r < 4; ++r) {
      b(r) = normal(rng);
      for (int cc = 0; cc < 3; ++cc) a(r, cc) = normal(rng);
    }
    mats.push_back(a);
    p1.agents.push_back(dadmm::make_agent(a, dadmm::quadratic_loss(b), Regularizer::l1(0.2)));
  }
  VectorXd y0(3);
  y0 << 0.3, -0.1, 0.7;
  ConsensusConfig cfg;
  cfg.c = 0.6;
  cfg.beta = {2.5, 4.0};

  ConsensusState state = dadmm::init_consensus_state(p1, y0);
  const ConsensusState next = dadmm::ic_admm_round(state, p1, g, cfg);

  for (int i = 0; i < 2; ++i) {
    const double gamma = cfg.beta[i] + 2.0 * cfg.c * 1.0;
    const VectorXd grad = p1.agents[i].smooth_gradient(y0);
    const VectorXd expected = p1.agents[i].reg.prox(y0 - grad / gamma, gamma);
    CHECK((next.y[i] - expected).norm() < 1e-14);
  }
}

TEST_CASE("inexact rounds match a straight-line transcription of the update") {
  // Independent re-implementation of the agent update for two scalar logistic
  // agents on an edge, executed for three rounds.
  const auto g = two_agents();
  const double a[2] = {0.9, -1.4};
  const double b[2] = {1.0, -1.0};
  const double lambda = 0.15, box = 2.0;
  dadmm::ProblemP1 p1;
  p1.dim = 1;
  for (int i = 0; i < 2; ++i) {
    MatrixXd ai(1, 1);
    ai << a[i];
    VectorXd bi(1);
    bi << b[i];
    p1.agents.push_back(dadmm::make_agent(ai, dadmm::logistic_loss(bi, std::abs(a[i]) * box),
                                          Regularizer::l1_box(lambda, box)));
  }
  ConsensusConfig cfg;
  cfg.c = 0.35;
  cfg.beta = {1.1, 0.9};

  ConsensusState state = dadmm::init_consensus_state(p1);
  state.y[0](0) = 0.4;
  state.y[1](0) = -0.6;

  // Transcription state.
  double ty[2] = {0.4, -0.6};
  double tp[2] = {0.0, 0.0};

  for (int round = 0; round < 3; ++round) {
    state = dadmm::ic_admm_round(state, p1, g, cfg);

    const double y_prev[2] = {ty[0], ty[1]};
    for (int i = 0; i < 2; ++i) {
      const int j = 1 - i;
      tp[i] = tp[i] + cfg.c * (y_prev[i] - y_prev[j]);
      const double gamma = cfg.beta[i] + 2.0 * cfg.c;
      const double u = a[i] * y_prev[i];
      const double sig = 1.0 / (1.0 + std::exp(b[i] * u));
      const double grad = a[i] * (-b[i] * sig);
      double arg = (cfg.beta[i] * y_prev[i] - grad - tp[i] + cfg.c * (y_prev[i] + y_prev[j])) / gamma;
      // shrink by lambda/gamma, then clip to [-box, box]
      const double t = lambda / gamma;
      double shrunk = 0.0;
      if (arg > t) shrunk = arg - t;
      else if (arg < -t) shrunk = arg + t;
      ty[i] = std::min(box, std::max(-box, shrunk));
    }

    for (int i = 0; i < 2; ++i) {
      CHECK(state.y[i](0) == Catch::Approx(ty[i]).margin(1e-13));
      CHECK(state.p[i](0) == Catch::Approx(tp[i]).margin(1e-13));
    }
  }
}

TEST_CASE("rounds are pure functions of the snapshot") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto g = dadmm::generate_connected_graph(5, 0.6, 4, true);
  dadmm::ProblemP1 p1;
  p1.dim = 2;
  for (int i = 0; i < 5; ++i) {
    MatrixXd a(3, 2);
    VectorXd b(3);
    for (int r = 0; r < 3; ++r) {
      b(r) = normal(rng);
      for (int cc = 0; cc < 2; ++cc) a(r, cc) = normal(rng);
    }
    p1.agents.push_back(dadmm::make_agent(a, dadmm::quadratic_loss(b), Regularizer::l1(0.1)));
  }
  ConsensusConfig cfg;
  cfg.c = 0.5;
  cfg.beta.assign(5, 4.0);
  cfg.inner.pgr_tolerance = 1e-9;

  ConsensusState state = dadmm::init_consensus_state(p1);
  for (auto& y : state.y)
    for (int j = 0; j < 2; ++j) y(j) = normal(rng);
  state = dadmm::c_admm_round(state, p1, g, cfg);

  const ConsensusState once = dadmm::c_admm_round(state, p1, g, cfg);
  const ConsensusState twice = dadmm::c_admm_round(state, p1, g, cfg);
  for (int i = 0; i < 5; ++i) {
    CHECK(once.y[i] == twice.y[i]);
    CHECK(once.p[i] == twice.p[i]);
  }
  const ConsensusState i1 = dadmm::ic_admm_round(state, p1, g, cfg);
  const ConsensusState i2 = dadmm::ic_admm_round(state, p1, g, cfg);
  for (int i = 0; i < 5; ++i) {
    CHECK(i1.y[i] == i2.y[i]);
    CHECK(i1.p[i] == i2.p[i]);
  }
}

TEST_CASE("optimum with stationary multipliers is a fixed point of the inexact round") {
  // l1-regularized two-agent quadratic with the closed-form optimum
  // y*_j = shrink(mean target, lambda/4); the certifying per-agent
  // subgradients define p* = -(grad f_i + s_i).
  const auto g = two_agents();
  const double lambda = 0.6;
  VectorXd t1(2), t2(2);
  t1 << 0.9, 0.05;
  t2 << 0.5, -0.02;

  dadmm::ProblemP1 p1;
  p1.dim = 2;
  p1.agents.push_back(dadmm::make_agent(MatrixXd::Identity(2, 2), dadmm::quadratic_loss(t1),
                                        Regularizer::l1(lambda / 2.0)));
  p1.agents.push_back(dadmm::make_agent(MatrixXd::Identity(2, 2), dadmm::quadratic_loss(t2),
                                        Regularizer::l1(lambda / 2.0)));

  VectorXd y_star(2), s_bar(2);
  for (int j = 0; j < 2; ++j) {
    const double mean = 0.5 * (t1(j) + t2(j));
    const double shrink = lambda / 4.0;
    y_star(j) = (mean > shrink) ? mean - shrink : ((mean < -shrink) ? mean + shrink : 0.0);
    s_bar(j) = (y_star(j) != 0.0) ? (y_star(j) > 0 ? 1.0 : -1.0)
                                  : 2.0 * (t1(j) + t2(j)) / lambda;
    REQUIRE(std::abs(s_bar(j)) <= 1.0 + 1e-12);
  }

  ConsensusConfig cfg;
  cfg.c = 0.45;
  cfg.beta = {2.0, 3.0};

  ConsensusState state = dadmm::init_consensus_state(p1, y_star);
  for (int i = 0; i < 2; ++i) {
    const VectorXd grad = p1.agents[i].smooth_gradient(y_star);
    state.p[i] = -(grad + (lambda / 2.0) * s_bar);
  }
  VectorXd psum = state.p[0] + state.p[1];
  REQUIRE(psum.norm() < 1e-12);

  const ConsensusState next = dadmm::ic_admm_round(state, p1, g, cfg);
  for (int i = 0; i < 2; ++i) {
    CHECK((next.y[i] - y_star).norm() < 1e-8);
  }
}

TEST_CASE("run stops immediately when started at the reference optimum") {
  const auto g = two_agents();
  dadmm::ProblemP1 p1;
  p1.dim = 2;
  VectorXd target(2);
  target << 0.3, -0.4;
  for (int i = 0; i < 2; ++i) {
    p1.agents.push_back(dadmm::make_agent(MatrixXd::Identity(2, 2), dadmm::quadratic_loss(target),
                                          Regularizer::zero()));
  }
  dadmm::InnerConfig ref_cfg;
  ref_cfg.pgr_tolerance = 1e-10;
  const auto ref = dadmm::centralized_reference(p1, ref_cfg);

  ConsensusConfig cfg;
  cfg.c = 0.5;
  cfg.beta.assign(2, 5.0);
  cfg.acc_target = 1e-4;
  cfg.cserr_target = 1e-5;
  cfg.max_outer = 100;
  cfg.y0 = ref.minimizer;

  const dadmm::Trace trace = dadmm::run_consensus(dadmm::ConsensusVariant::Inexact, p1, g, cfg, ref);
  CHECK(trace.records.size() == 1);
  CHECK(trace.converged);
}

TEST_CASE("runs are deterministic") {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto g = dadmm::generate_connected_graph(4, 0.7, 2, true);
  dadmm::ProblemP1 p1;
  p1.dim = 2;
  for (int i = 0; i < 4; ++i) {
    MatrixXd a(3, 2);
    VectorXd b(3);
    for (int r = 0; r < 3; ++r) {
      b(r) = normal(rng);
      for (int cc = 0; cc < 2; ++cc) a(r, cc) = normal(rng);
    }
    p1.agents.push_back(dadmm::make_agent(a, dadmm::quadratic_loss(b), Regularizer::l1(0.05)));
  }
  dadmm::InnerConfig ref_cfg;
  ref_cfg.pgr_tolerance = 1e-10;
  const auto ref = dadmm::centralized_reference(p1, ref_cfg);

  ConsensusConfig cfg;
  cfg.c = 0.4;
  const auto spec = dadmm::compute_spectrum(g);
  for (int i = 0; i < 4; ++i) {
    cfg.beta.push_back(
        dadmm::choose_beta(dadmm::beta_min_ic(p1.agents[i], cfg.c, spec.lambda_min_d_plus_w)));
  }
  cfg.acc_target = 1e-6;
  cfg.cserr_target = 1e-8;
  cfg.max_outer = 200;

  const auto tr1 = dadmm::run_consensus(dadmm::ConsensusVariant::Inexact, p1, g, cfg, ref);
  const auto tr2 = dadmm::run_consensus(dadmm::ConsensusVariant::Inexact, p1, g, cfg, ref);
  REQUIRE(tr1.records.size() == tr2.records.size());
  for (std::size_t r = 0; r < tr1.records.size(); ++r) {
    CHECK(tr1.records[r].objective == tr2.records[r].objective);
    CHECK(tr1.records[r].acc == tr2.records[r].acc);
    CHECK(tr1.records[r].cserr == tr2.records[r].cserr);
    CHECK(tr1.records[r].cumulative_flops == tr2.records[r].cumulative_flops);
  }
}

TEST_CASE("runaway consensus error aborts with a diagnostic") {
  const auto g = two_agents();
  dadmm::ProblemP1 p1;
  p1.dim = 1;
  VectorXd t1(1), t2(1);
  t1 << 5.0;
  t2 << -5.0;
  p1.agents.push_back(
      dadmm::make_agent(MatrixXd::Identity(1, 1), dadmm::quadratic_loss(t1), Regularizer::zero()));
  p1.agents.push_back(
      dadmm::make_agent(MatrixXd::Identity(1, 1), dadmm::quadratic_loss(t2), Regularizer::zero()));
  dadmm::ReferenceSolution ref;
  ref.minimizer = VectorXd::Zero(1);
  ref.objective = 50.0;

  ConsensusConfig cfg;
  cfg.c = 0.01;
  cfg.beta.assign(2, 1e-4);  // far below the stability threshold
  cfg.acc_target = 0.0;
  cfg.cserr_target = 0.0;
  cfg.max_outer = 100000;

  CHECK_THROWS_WITH(dadmm::run_consensus(dadmm::ConsensusVariant::Inexact, p1, g, cfg, ref),
                    Catch::Matchers::ContainsSubstring("1e6x"));
}

TEST_CASE("warning is recorded when beta is below the threshold") {
  const auto g = two_agents();
  dadmm::ProblemP1 p1;
  p1.dim = 1;
  VectorXd t(1);
  t << 0.2;
  for (int i = 0; i < 2; ++i) {
    p1.agents.push_back(
        dadmm::make_agent(MatrixXd::Identity(1, 1), dadmm::quadratic_loss(t), Regularizer::zero()));
  }
  dadmm::InnerConfig ref_cfg;
  ref_cfg.pgr_tolerance = 1e-10;
  const auto ref = dadmm::centralized_reference(p1, ref_cfg);

  ConsensusConfig cfg;
  cfg.c = 0.05;
  cfg.beta.assign(2, 1.0);  // threshold here is 2 - c*lambda_min > 1
  cfg.acc_target = 1e-3;
  cfg.cserr_target = 1e-3;
  cfg.max_outer = 2000;
  const auto trace = dadmm::run_consensus(dadmm::ConsensusVariant::Inexact, p1, g, cfg, ref);
  CHECK_FALSE(trace.warnings.empty());
}

TEST_CASE("inexact iterates converge linearly on a smooth full-rank instance") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 3, m = 6, k = 2;
  const auto g = dadmm::generate_connected_graph(n, 0.9, 5, true);
  dadmm::ProblemP1 p1;
  p1.dim = k;
  MatrixXd gram = MatrixXd::Zero(k, k);
  VectorXd rhs = VectorXd::Zero(k);
  for (int i = 0; i < n; ++i) {
    MatrixXd a(m, k);
    VectorXd b(m);
    for (int r = 0; r < m; ++r) {
      b(r) = normal(rng);
      for (int cc = 0; cc < k; ++cc) a(r, cc) = normal(rng);
    }
    gram += a.transpose() * a;
    rhs += a.transpose() * b;
    p1.agents.push_back(dadmm::make_agent(a, dadmm::quadratic_loss(b), Regularizer::zero()));
  }
  // Independent least-squares oracle for the consensus optimum.
  const VectorXd y_star = gram.ldlt().solve(rhs);

  const auto spec = dadmm::compute_spectrum(g);
  ConsensusConfig cfg;
  cfg.c = 1.0;
  for (int i = 0; i < n; ++i) {
    cfg.beta.push_back(dadmm::choose_beta(dadmm::beta_min_ic(p1.agents[i], cfg.c, spec.lambda_min_d_plus_w)));
  }

  ConsensusState state = dadmm::init_consensus_state(p1);
  std::vector<double> errors;
  for (int round = 0; round < 120; ++round) {
    state = dadmm::ic_admm_round(state, p1, g, cfg);
    double err = 0.0;
    for (int i = 0; i < n; ++i) err += (state.y[i] - y_star).squaredNorm();
    errors.push_back(std::sqrt(err));
  }
  REQUIRE(errors.back() > 0.0);
  const auto fit = dadmm::linear_rate_fit(errors, 0.5);
  CHECK(fit.rate < 1.0);
  CHECK(fit.r_squared >= 0.95);
}
