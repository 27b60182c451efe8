#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dadmm/consensus_admm.hpp"
#include "dadmm/dual_consensus_admm.hpp"
#include "dadmm/graph.hpp"
#include "dadmm/inner_solvers.hpp"
#include "dadmm/io.hpp"
#include "dadmm/metrics.hpp"
#include "dadmm/problem.hpp"

namespace dadmm {

/// Counter-based split of a master seed into independent component seeds.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

enum class ProblemKind { RpdLogistic, RpdLasso, CpdLogistic };

inline std::string problem_kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::RpdLogistic: return "rpd-logistic";
    case ProblemKind::RpdLasso: return "rpd-lasso";
    case ProblemKind::CpdLogistic: return "cpd-logistic";
  }
  throw std::invalid_argument("problem_kind_name: unknown kind");
}

/// Full description of one experiment: problem shape, graph, algorithm,
/// penalties, tolerances, stopping targets, output, master seed. Serialized
/// as flat key=value text; unknown keys are errors.
struct ExperimentSpec {
  ProblemKind problem = ProblemKind::RpdLogistic;
  int n_agents = 10;
  int m_per_agent = 30;   // rows per agent (row-partitioned) or coupled rows (column-partitioned)
  int dim = 200;          // shared dimension K (row-partitioned) or per-agent block width
  double lambda = 0.1;
  double box_bound = 1.0;
  double graph_density = 0.4;
  bool force_non_bipartite = true;
  Algorithm algo = Algorithm::IcAdmm;
  double c = 0.05;
  bool beta_auto = true;              // auto-margin vs explicit list
  std::vector<double> beta_list;      // used when beta_auto is false
  double inner_pgr_tol = 1e-5;
  int inner_max_iter = 20000;
  double inner_step = 0.0;            // 0 -> derived from the Lipschitz bound
  bool inner_line_search = false;
  double ref_pgr_tol = 1e-6;
  int ref_max_iter = 2000000;
  double acc_target = 1e-4;
  double cserr_target = 1e-5;
  double feasibility_target = 1e-4;
  double dual_consensus_target = 1e-6;
  int max_outer = 50000;
  std::string out;
  std::uint64_t seed = 1;
  double feature_scale = 1.0;
  double sparsity = 0.1;              // fraction of nonzeros in the planted model
  double noise_flip_prob = 0.05;
  double slack_box = 0.0;             // 0 -> exact reformulation bound

  void validate() const {
    if (n_agents < 2) throw std::invalid_argument("spec: n_agents must be at least 2");
    if (m_per_agent < 1 || dim < 1) throw std::invalid_argument("spec: dims must be positive");
    if (lambda < 0.0) throw std::invalid_argument("spec: lambda must be nonnegative");
    if (!(box_bound > 0.0)) throw std::invalid_argument("spec: box_bound must be positive");
    if (!(graph_density > 0.0) || graph_density > 1.0) {
      throw std::invalid_argument("spec: graph_density must be in (0, 1]");
    }
    if (!(c > 0.0)) throw std::invalid_argument("spec: c must be positive");
    if (!(feature_scale > 0.0)) throw std::invalid_argument("spec: feature_scale must be positive");
    if (sparsity <= 0.0 || sparsity > 1.0) throw std::invalid_argument("spec: sparsity must be in (0, 1]");
    if (noise_flip_prob < 0.0 || noise_flip_prob >= 0.5) {
      throw std::invalid_argument("spec: noise_flip_prob must be in [0, 0.5)");
    }
    const bool p2 = problem == ProblemKind::CpdLogistic;
    const bool dual_algo = algo == Algorithm::DcAdmm || algo == Algorithm::IdcAdmm;
    if (p2 != dual_algo) {
      throw std::invalid_argument("spec: cpd problems pair with dc-admm/idc-admm and rpd problems "
                                  "with c-admm/ic-admm/subgrad");
    }
  }
};

namespace detail {

inline std::string bool_name(bool b) { return b ? "true" : "false"; }

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: invalid boolean for " + key + ": " + v);
}

inline Algorithm parse_algorithm(const std::string& v) {
  if (v == "c-admm") return Algorithm::CAdmm;
  if (v == "ic-admm") return Algorithm::IcAdmm;
  if (v == "dc-admm") return Algorithm::DcAdmm;
  if (v == "idc-admm") return Algorithm::IdcAdmm;
  if (v == "subgrad") return Algorithm::Subgradient;
  throw std::invalid_argument("config: unknown algorithm: " + v);
}

inline ProblemKind parse_problem_kind(const std::string& v) {
  if (v == "rpd-logistic") return ProblemKind::RpdLogistic;
  if (v == "rpd-lasso") return ProblemKind::RpdLasso;
  if (v == "cpd-logistic") return ProblemKind::CpdLogistic;
  throw std::invalid_argument("config: unknown problem kind: " + v);
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

inline std::string serialize_spec(const ExperimentSpec& s) {
  std::ostringstream out;
  out << "problem=" << problem_kind_name(s.problem) << "\n";
  out << "n_agents=" << s.n_agents << "\n";
  out << "m_per_agent=" << s.m_per_agent << "\n";
  out << "dim=" << s.dim << "\n";
  out << "lambda=" << format_double(s.lambda) << "\n";
  out << "box_bound=" << format_double(s.box_bound) << "\n";
  out << "graph_density=" << format_double(s.graph_density) << "\n";
  out << "force_non_bipartite=" << detail::bool_name(s.force_non_bipartite) << "\n";
  out << "algo=" << algorithm_name(s.algo) << "\n";
  out << "c=" << format_double(s.c) << "\n";
  out << "beta_mode=" << (s.beta_auto ? "auto-margin" : "explicit") << "\n";
  if (!s.beta_auto) {
    out << "beta_list=";
    for (std::size_t i = 0; i < s.beta_list.size(); ++i) {
      if (i) out << ",";
      out << format_double(s.beta_list[i]);
    }
    out << "\n";
  }
  out << "inner_pgr_tol=" << format_double(s.inner_pgr_tol) << "\n";
  out << "inner_max_iter=" << s.inner_max_iter << "\n";
  out << "inner_step=" << format_double(s.inner_step) << "\n";
  out << "inner_line_search=" << detail::bool_name(s.inner_line_search) << "\n";
  out << "ref_pgr_tol=" << format_double(s.ref_pgr_tol) << "\n";
  out << "ref_max_iter=" << s.ref_max_iter << "\n";
  out << "acc_target=" << format_double(s.acc_target) << "\n";
  out << "cserr_target=" << format_double(s.cserr_target) << "\n";
  out << "feasibility_target=" << format_double(s.feasibility_target) << "\n";
  out << "dual_consensus_target=" << format_double(s.dual_consensus_target) << "\n";
  out << "max_outer=" << s.max_outer << "\n";
  out << "out=" << s.out << "\n";
  out << "seed=" << s.seed << "\n";
  out << "feature_scale=" << format_double(s.feature_scale) << "\n";
  out << "sparsity=" << format_double(s.sparsity) << "\n";
  out << "noise_flip_prob=" << format_double(s.noise_flip_prob) << "\n";
  out << "slack_box=" << format_double(s.slack_box) << "\n";
  return out.str();
}

/// Parses flat key=value text. Every key must be an ExperimentSpec field;
/// anything else is an error.
inline ExperimentSpec parse_spec(const std::string& text) {
  ExperimentSpec s;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));

    if (key == "problem") s.problem = detail::parse_problem_kind(value);
    else if (key == "n_agents") s.n_agents = std::stoi(value);
    else if (key == "m_per_agent") s.m_per_agent = std::stoi(value);
    else if (key == "dim") s.dim = std::stoi(value);
    else if (key == "lambda") s.lambda = std::stod(value);
    else if (key == "box_bound") s.box_bound = std::stod(value);
    else if (key == "graph_density") s.graph_density = std::stod(value);
    else if (key == "force_non_bipartite") s.force_non_bipartite = detail::parse_bool(value, key);
    else if (key == "algo") s.algo = detail::parse_algorithm(value);
    else if (key == "c") s.c = std::stod(value);
    else if (key == "beta_mode") {
      if (value == "auto-margin") s.beta_auto = true;
      else if (value == "explicit") s.beta_auto = false;
      else throw std::invalid_argument("config: beta_mode must be auto-margin or explicit");
    } else if (key == "beta_list") {
      s.beta_list.clear();
      std::istringstream ls(value);
      std::string field;
      while (std::getline(ls, field, ',')) s.beta_list.push_back(std::stod(field));
    } else if (key == "inner_pgr_tol") s.inner_pgr_tol = std::stod(value);
    else if (key == "inner_max_iter") s.inner_max_iter = std::stoi(value);
    else if (key == "inner_step") s.inner_step = std::stod(value);
    else if (key == "inner_line_search") s.inner_line_search = detail::parse_bool(value, key);
    else if (key == "ref_pgr_tol") s.ref_pgr_tol = std::stod(value);
    else if (key == "ref_max_iter") s.ref_max_iter = std::stoi(value);
    else if (key == "acc_target") s.acc_target = std::stod(value);
    else if (key == "cserr_target") s.cserr_target = std::stod(value);
    else if (key == "feasibility_target") s.feasibility_target = std::stod(value);
    else if (key == "dual_consensus_target") s.dual_consensus_target = std::stod(value);
    else if (key == "max_outer") s.max_outer = std::stoi(value);
    else if (key == "out") s.out = value;
    else if (key == "seed") s.seed = std::stoull(value);
    else if (key == "feature_scale") s.feature_scale = std::stod(value);
    else if (key == "sparsity") s.sparsity = std::stod(value);
    else if (key == "noise_flip_prob") s.noise_flip_prob = std::stod(value);
    else if (key == "slack_box") s.slack_box = std::stod(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return s;
}

/// Synthetic regression data with a planted sparse model. Replaces any
/// external dataset dependency; fully reproducible from the seed.
struct SyntheticDataset {
  Eigen::MatrixXd features;  // (N*M) x K row-partitioned, or M x (N*K) column-partitioned
  Eigen::VectorXd response;  // +-1 labels (logistic) or real targets (lasso)
  Eigen::VectorXd planted;
  std::uint64_t seed = 0;
};

inline SyntheticDataset generate_dataset(const ExperimentSpec& spec) {
  spec.validate();
  const bool cpd = spec.problem == ProblemKind::CpdLogistic;
  const Eigen::Index rows = cpd ? spec.m_per_agent : static_cast<Eigen::Index>(spec.n_agents) * spec.m_per_agent;
  const Eigen::Index cols = cpd ? static_cast<Eigen::Index>(spec.n_agents) * spec.dim : spec.dim;

  SyntheticDataset data;
  data.seed = split_seed(spec.seed, 1);
  std::mt19937_64 rng(data.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  data.features.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) data.features(r, c) = spec.feature_scale * normal(rng);
  }

  data.planted = Eigen::VectorXd::Zero(cols);
  Eigen::Index support = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(spec.sparsity * static_cast<double>(cols)));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(cols));
  for (Eigen::Index i = 0; i < cols; ++i) order[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = cols - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  for (Eigen::Index s = 0; s < support; ++s) {
    data.planted(order[static_cast<std::size_t>(s)]) = unif(rng) < 0.5 ? -1.0 : 1.0;
  }

  const Eigen::VectorXd signal = data.features * data.planted;
  data.response.resize(rows);
  if (spec.problem == ProblemKind::RpdLasso) {
    for (Eigen::Index r = 0; r < rows; ++r) data.response(r) = signal(r) + 0.1 * normal(rng);
  } else {
    for (Eigen::Index r = 0; r < rows; ++r) {
      double label = signal(r) >= 0.0 ? 1.0 : -1.0;
      if (unif(rng) < spec.noise_flip_prob) label = -label;
      data.response(r) = label;
    }
  }
  return data;
}

namespace detail {

inline Regularizer make_p1_regularizer(double lambda_per_agent, double box_bound) {
  const bool has_l1 = lambda_per_agent > 0.0;
  const bool has_box = std::isfinite(box_bound);
  if (has_l1 && has_box) return Regularizer::l1_box(lambda_per_agent, box_bound);
  if (has_l1) return Regularizer::l1(lambda_per_agent);
  if (has_box) return Regularizer::box(box_bound);
  return Regularizer::zero();
}

inline double max_row_l1(const Eigen::MatrixXd& a) {
  double u = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) u = std::max(u, a.row(r).cwiseAbs().sum());
  return u;
}

}  // namespace detail

/// Row-partitioned problem assembly: agent i owns rows [i*M, (i+1)*M) of the
/// features and response, with g_i = (lambda/N) l1 + box.
inline ProblemP1 build_p1(const ExperimentSpec& spec, const SyntheticDataset& data) {
  const auto blocks = partition_rows(data.features, spec.n_agents);
  const auto responses = partition_rows(data.response, spec.n_agents);
  ProblemP1 p1;
  p1.dim = spec.dim;
  const double lambda_i = spec.lambda / static_cast<double>(spec.n_agents);
  for (int i = 0; i < spec.n_agents; ++i) {
    const auto& a = blocks[static_cast<std::size_t>(i)];
    const auto& b = responses[static_cast<std::size_t>(i)];
    SmoothLoss loss;
    if (spec.problem == ProblemKind::RpdLasso) {
      loss = quadratic_loss(b);
    } else {
      if (!std::isfinite(spec.box_bound)) {
        throw std::invalid_argument("build_p1: logistic problems need a finite box bound");
      }
      loss = logistic_loss(b, detail::max_row_l1(a) * spec.box_bound);
    }
    p1.agents.push_back(make_agent(a, std::move(loss),
                                   detail::make_p1_regularizer(lambda_i, spec.box_bound)));
  }
  p1.validate();
  return p1;
}

/// Column-partitioned coupled problem assembly.
inline ProblemP2 build_p2(const ExperimentSpec& spec, const SyntheticDataset& data) {
  const auto blocks = partition_columns(data.features, spec.n_agents);
  return build_cpd_logistic_p2(blocks, data.response, spec.lambda, spec.box_bound, spec.slack_box);
}

/// Pooled single-agent problem whose minimizer defines obj* for the
/// column-partitioned runs.
inline ProblemP1 build_p2_pooled(const ExperimentSpec& spec, const SyntheticDataset& data) {
  ProblemP1 pooled;
  pooled.dim = data.features.cols();
  pooled.agents.push_back(make_agent(
      data.features, logistic_loss(data.response, detail::max_row_l1(data.features) * spec.box_bound),
      Regularizer::l1_box(spec.lambda, spec.box_bound)));
  pooled.validate();
  return pooled;
}

struct BetaReport {
  std::vector<double> beta_min;
  std::vector<double> beta;
};

inline BetaReport resolve_beta(const ExperimentSpec& spec, const ProblemP1* p1, const ProblemP2* p2,
                               const Graph& g) {
  BetaReport report;
  const std::size_t n = static_cast<std::size_t>(g.n_agents());
  report.beta_min.resize(n, 0.0);
  if (p1) {
    const GraphSpectrum gs = compute_spectrum(g);
    for (std::size_t i = 0; i < n; ++i) {
      report.beta_min[i] = beta_min_ic(p1->agents[i], spec.c, gs.lambda_min_d_plus_w);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      report.beta_min[i] = beta_min_idc(p2->agents[i], spec.c, g.degree(static_cast<int>(i)));
    }
  }
  if (spec.beta_auto) {
    report.beta.resize(n);
    for (std::size_t i = 0; i < n; ++i) report.beta[i] = choose_beta(report.beta_min[i]);
  } else {
    if (spec.beta_list.size() == 1) {
      report.beta.assign(n, spec.beta_list.front());
    } else if (spec.beta_list.size() == n) {
      report.beta = spec.beta_list;
    } else {
      throw std::invalid_argument("resolve_beta: beta_list must have 1 or n_agents entries");
    }
  }
  return report;
}

struct ExperimentResult {
  Trace trace;
  ReferenceSolution reference;
  BetaReport beta;
  ExperimentSpec spec;

  const IterationRecord& final_record() const { return trace.records.back(); }
};

/// Builds graph, dataset and problem from the spec, computes the centralized
/// reference, runs the chosen algorithm, and (when `out` is set) persists the
/// trace CSV. Deterministic given the spec.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult result;
  result.spec = spec;

  const Graph g = generate_connected_graph(spec.n_agents, spec.graph_density, split_seed(spec.seed, 0),
                                           spec.force_non_bipartite);
  const SyntheticDataset data = generate_dataset(spec);

  InnerConfig ref_cfg;
  ref_cfg.pgr_tolerance = spec.ref_pgr_tol;
  ref_cfg.max_inner_iterations = spec.ref_max_iter;

  InnerConfig inner;
  inner.pgr_tolerance = spec.inner_pgr_tol;
  inner.max_inner_iterations = spec.inner_max_iter;
  inner.step_size = spec.inner_step;
  inner.line_search = spec.inner_line_search;

  if (spec.problem == ProblemKind::CpdLogistic) {
    const ProblemP2 p2 = build_p2(spec, data);
    result.reference = centralized_reference(build_p2_pooled(spec, data), ref_cfg);
    result.beta = resolve_beta(spec, nullptr, &p2, g);

    DualConsensusConfig cfg;
    cfg.c = spec.c;
    cfg.inner = inner;
    cfg.beta = result.beta.beta;
    cfg.max_outer = spec.max_outer;
    cfg.acc_target = spec.acc_target;
    cfg.feasibility_target = spec.feasibility_target;
    cfg.dual_consensus_target = spec.dual_consensus_target;

    const DualConsensusVariant variant = spec.algo == Algorithm::DcAdmm
                                             ? DualConsensusVariant::Exact
                                             : DualConsensusVariant::Inexact;
    result.trace = run_dual_consensus(variant, p2, g, cfg, result.reference.objective);
  } else {
    const ProblemP1 p1 = build_p1(spec, data);
    result.reference = centralized_reference(p1, ref_cfg);
    result.beta = resolve_beta(spec, &p1, nullptr, g);

    ConsensusConfig cfg;
    cfg.c = spec.c;
    cfg.inner = inner;
    cfg.beta = result.beta.beta;
    cfg.max_outer = spec.max_outer;
    cfg.acc_target = spec.acc_target;
    cfg.cserr_target = spec.cserr_target;

    const ConsensusVariant variant = spec.algo == Algorithm::CAdmm    ? ConsensusVariant::Exact
                                     : spec.algo == Algorithm::IcAdmm ? ConsensusVariant::Inexact
                                                                      : ConsensusVariant::Subgradient;
    result.trace = run_consensus(variant, p1, g, cfg, result.reference);
  }

  result.trace.seed = spec.seed;
  result.trace.config_echo = serialize_spec(spec);
  for (std::size_t i = 0; i < result.beta.beta.size(); ++i) {
    result.trace.config_echo += "beta[" + std::to_string(i) + "]=" + format_double(result.beta.beta[i]) +
                                " beta_min=" + format_double(result.beta.beta_min[i]) + "\n";
  }

  if (!spec.out.empty()) {
    std::ostringstream csv;
    write_trace_csv(result.trace, csv);
    write_file(spec.out, csv.str());
  }
  return result;
}

inline std::string summarize(const ExperimentResult& r) {
  const IterationRecord& last = r.final_record();
  std::ostringstream out;
  out << "algorithm=" << r.trace.algorithm << "\n";
  out << "outer_iterations=" << last.k << "\n";
  out << "converged=" << (r.trace.converged ? "true" : "false") << "\n";
  out << "final_objective=" << format_double(last.objective) << "\n";
  out << "final_acc=" << format_double(last.acc) << "\n";
  if (!std::isnan(last.cserr)) out << "final_cserr=" << format_double(last.cserr) << "\n";
  if (!std::isnan(last.feasibility)) out << "final_feasibility=" << format_double(last.feasibility) << "\n";
  if (!std::isnan(last.dual_consensus)) {
    out << "final_dual_consensus=" << format_double(last.dual_consensus) << "\n";
  }
  out << "total_flops=" << last.cumulative_flops << "\n";
  out << "wall_time_s=" << format_double(last.wall_time_s) << "\n";
  out << "reference_objective=" << format_double(r.reference.objective) << "\n";
  for (const auto& w : r.trace.warnings) out << "warning=" << w << "\n";
  return out.str();
}

/// Side-by-side comparison of runs sharing the same problem seed.
inline std::string compare(const std::vector<ExperimentSpec>& specs) {
  if (specs.size() < 2) throw std::invalid_argument("compare: need at least two specs");
  for (const auto& s : specs) {
    if (s.seed != specs.front().seed) {
      throw std::invalid_argument("compare: all specs must share the problem seed");
    }
  }

  std::vector<ExperimentResult> results;
  results.reserve(specs.size());
  for (const auto& s : specs) results.push_back(run_experiment(s));

  std::ostringstream out;
  auto row = [&](const std::string& name, auto getter) {
    out << name;
    for (const auto& r : results) out << "\t" << getter(r);
    out << "\n";
  };
  row("algorithm", [](const ExperimentResult& r) { return r.trace.algorithm; });
  row("outer_iterations", [](const ExperimentResult& r) { return std::to_string(r.final_record().k); });
  row("converged", [](const ExperimentResult& r) { return std::string(r.trace.converged ? "true" : "false"); });
  row("final_acc", [](const ExperimentResult& r) { return format_double(r.final_record().acc); });
  row("final_cserr", [](const ExperimentResult& r) {
    return std::isnan(r.final_record().cserr) ? std::string() : format_double(r.final_record().cserr);
  });
  row("final_feasibility", [](const ExperimentResult& r) {
    return std::isnan(r.final_record().feasibility) ? std::string()
                                                    : format_double(r.final_record().feasibility);
  });
  row("final_dual_consensus", [](const ExperimentResult& r) {
    return std::isnan(r.final_record().dual_consensus)
               ? std::string()
               : format_double(r.final_record().dual_consensus);
  });
  row("total_flops", [](const ExperimentResult& r) { return std::to_string(r.final_record().cumulative_flops); });
  row("wall_time_s", [](const ExperimentResult& r) { return format_double(r.final_record().wall_time_s); });
  return out.str();
}

}  // namespace dadmm
