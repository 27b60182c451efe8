#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dadmm {

inline double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

/// Per-round diagnostic record. Quantities that do not apply to a given
/// algorithm stay NaN (doubles) or -1 (counters) and serialize as empty
/// CSV fields.
struct IterationRecord {
  int k = 0;
  double objective = nan_value();
  double acc = nan_value();
  double cserr = nan_value();
  double feasibility = nan_value();
  double dual_consensus = nan_value();
  std::int64_t inner_iterations = -1;
  std::int64_t cumulative_flops = -1;
  double wall_time_s = nan_value();
};

struct Trace {
  std::vector<IterationRecord> records;
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string config_echo;
  bool acc_absolute = false;  // accuracy recorded as an absolute gap (obj* was 0)
  std::vector<std::string> warnings;

  // Worst-case structural violations observed across the run.
  double max_psum_violation = 0.0;
  double max_coupling_identity_residual = 0.0;
  double max_stationarity = 0.0;
  bool converged = false;
};

struct AccuracyValue {
  double value = 0.0;
  bool absolute = false;
};

/// Relative objective gap (obj - obj*)/obj*; falls back to the absolute gap
/// (flagged) when obj* is zero.
inline AccuracyValue accuracy(double obj_at_mean, double obj_star) {
  if (obj_star == 0.0) return {obj_at_mean - obj_star, true};
  return {(obj_at_mean - obj_star) / obj_star, false};
}

/// Mean squared deviation from the cross-agent mean.
inline double consensus_error(const std::vector<Eigen::VectorXd>& y) {
  if (y.empty()) throw std::invalid_argument("consensus_error: need at least one agent");
  Eigen::VectorXd mean = y.front();
  for (std::size_t i = 1; i < y.size(); ++i) mean += y[i];
  mean /= static_cast<double>(y.size());
  double total = 0.0;
  for (const auto& yi : y) total += (yi - mean).squaredNorm();
  return total / static_cast<double>(y.size());
}

inline Eigen::VectorXd agent_mean(const std::vector<Eigen::VectorXd>& y) {
  Eigen::VectorXd mean = y.front();
  for (std::size_t i = 1; i < y.size(); ++i) mean += y[i];
  return mean / static_cast<double>(y.size());
}

enum class Algorithm { CAdmm, IcAdmm, DcAdmm, IdcAdmm, Subgradient };

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::CAdmm: return "c-admm";
    case Algorithm::IcAdmm: return "ic-admm";
    case Algorithm::DcAdmm: return "dc-admm";
    case Algorithm::IdcAdmm: return "idc-admm";
    case Algorithm::Subgradient: return "subgrad";
  }
  throw std::invalid_argument("algorithm_name: unknown algorithm");
}

/// Per-agent multiplication count for one round: K + l (2MK + 2K) for the
/// exact updates (l inner iterations), K + (2MK + 2K) for the single-step
/// inexact and subgradient updates.
inline std::int64_t flop_estimate(Algorithm alg, std::int64_t m, std::int64_t k,
                                  std::int64_t inner_iterations) {
  const std::int64_t unit = 2 * m * k + 2 * k;
  switch (alg) {
    case Algorithm::CAdmm:
    case Algorithm::DcAdmm:
      return k + inner_iterations * unit;
    case Algorithm::IcAdmm:
    case Algorithm::IdcAdmm:
    case Algorithm::Subgradient:
      return k + unit;
  }
  throw std::invalid_argument("flop_estimate: unknown algorithm");
}

struct RateFit {
  double rate = 1.0;
  double r_squared = 1.0;
};

/// Least-squares fit of log(error) against the iteration index over the
/// trailing fraction of the sequence; rate = exp(slope).
inline RateFit linear_rate_fit(const std::vector<double>& errors, double tail_fraction = 0.5) {
  if (!(tail_fraction > 0.0) || tail_fraction > 1.0) {
    throw std::invalid_argument("linear_rate_fit: tail_fraction must be in (0, 1]");
  }
  for (double e : errors) {
    if (!(e > 0.0)) throw std::invalid_argument("linear_rate_fit: errors must be positive");
  }
  const std::size_t n = errors.size();
  std::size_t count = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n)));
  if (count < 2) count = std::min<std::size_t>(2, n);
  if (count < 2) throw std::invalid_argument("linear_rate_fit: need at least two errors");
  const std::size_t start = n - count;

  double sx = 0.0, sy = 0.0;
  for (std::size_t i = start; i < n; ++i) {
    sx += static_cast<double>(i);
    sy += std::log(errors[i]);
  }
  const double mx = sx / static_cast<double>(count);
  const double my = sy / static_cast<double>(count);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = start; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    const double dy = std::log(errors[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  const double slope = sxy / sxx;
  fit.rate = std::exp(slope);
  if (syy <= 1e-300) {
    fit.r_squared = 1.0;  // exact fit of a constant sequence
  } else {
    const double ss_res = syy - slope * sxy;
    fit.r_squared = 1.0 - ss_res / syy;
  }
  return fit;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv_field(std::ostream& out, double v) {
  if (!std::isnan(v)) out << format_double(v);
}

inline void write_csv_field(std::ostream& out, std::int64_t v) {
  if (v >= 0) out << v;
}

/// Trace CSV: config echo as '#' comment lines, then a fixed column order.
inline void write_trace_csv(const Trace& trace, std::ostream& out) {
  out << "# algorithm=" << trace.algorithm << "\n";
  out << "# seed=" << trace.seed << "\n";
  if (trace.acc_absolute) out << "# acc_mode=absolute\n";
  for (const auto& w : trace.warnings) out << "# warning: " << w << "\n";
  std::istringstream echo(trace.config_echo);
  std::string line;
  while (std::getline(echo, line)) {
    if (!line.empty()) out << "# " << line << "\n";
  }
  out << "k,objective,acc,cserr,feasibility,dual_consensus,inner_iterations,cumulative_flops,"
         "wall_time_s\n";
  for (const auto& r : trace.records) {
    out << r.k << ",";
    write_csv_field(out, r.objective);
    out << ",";
    write_csv_field(out, r.acc);
    out << ",";
    write_csv_field(out, r.cserr);
    out << ",";
    write_csv_field(out, r.feasibility);
    out << ",";
    write_csv_field(out, r.dual_consensus);
    out << ",";
    write_csv_field(out, r.inner_iterations);
    out << ",";
    write_csv_field(out, r.cumulative_flops);
    out << ",";
    write_csv_field(out, r.wall_time_s);
    out << "\n";
  }
}

}  // namespace dadmm
