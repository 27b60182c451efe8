#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dadmm {

/// Componentwise shrinkage sign(s_j) * max(|s_j| - t, 0).
inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& s, double threshold) {
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("soft_threshold: threshold must be positive");
  }
  Eigen::VectorXd out(s.size());
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    out(j) = std::max(s(j) - threshold, 0.0) - std::max(-s(j) - threshold, 0.0);
  }
  return out;
}

/// Exact proximity map of g(y) = w * ||y||_1 + indicator(|y_j| <= a) at
/// parameter gamma: clip-after-shrink, componentwise.
inline Eigen::VectorXd prox_l1_box(const Eigen::VectorXd& s, double l1_weight, double box_bound,
                                   double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("prox_l1_box: gamma must be positive");
  if (l1_weight < 0.0) throw std::invalid_argument("prox_l1_box: l1_weight must be nonnegative");
  if (!(box_bound > 0.0)) throw std::invalid_argument("prox_l1_box: box_bound must be positive");
  const double t = l1_weight / gamma;
  Eigen::VectorXd out(s.size());
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    const double shrunk = (t > 0.0) ? (std::max(s(j) - t, 0.0) - std::max(-s(j) - t, 0.0)) : s(j);
    out(j) = std::min(box_bound, std::max(-box_bound, shrunk));
  }
  return out;
}

/// Nonsmooth regularizer g(y) = sum_j w_j |y_j| + indicator(|y_j| <= a_j),
/// with (w_j, a_j) constant on contiguous segments. A single segment of
/// unspecified length applies uniformly to vectors of any dimension; the
/// segmented form is what the augmented slack block needs.
///
/// This family is closed under the exact clip-after-shrink prox; anything
/// beyond it is rejected at construction.
class Regularizer {
 public:
  struct Segment {
    Eigen::Index length;  // -1 for "uniform over the whole vector"
    double l1_weight;
    double box_bound;  // +inf for unboxed
  };

  static Regularizer zero() { return uniform(0.0, std::numeric_limits<double>::infinity()); }

  static Regularizer l1(double weight) {
    return uniform(weight, std::numeric_limits<double>::infinity());
  }

  static Regularizer box(double bound) { return uniform(0.0, bound); }

  static Regularizer l1_box(double weight, double bound) { return uniform(weight, bound); }

  static Regularizer blocks(std::vector<Segment> segments) {
    Regularizer r;
    if (segments.empty()) throw std::invalid_argument("Regularizer: empty segment list");
    for (const auto& seg : segments) {
      if (seg.length <= 0) throw std::invalid_argument("Regularizer: segment length must be positive");
      check_params(seg.l1_weight, seg.box_bound);
    }
    r.segments_ = std::move(segments);
    r.uniform_ = false;
    return r;
  }

  bool is_uniform() const { return uniform_; }
  const std::vector<Segment>& segments() const { return segments_; }

  /// Total segmented length (-1 when uniform).
  Eigen::Index fixed_length() const {
    if (uniform_) return -1;
    Eigen::Index n = 0;
    for (const auto& seg : segments_) n += seg.length;
    return n;
  }

  double value(const Eigen::VectorXd& y) const {
    double v = 0.0;
    Eigen::Index offset = 0;
    for_each_segment(y.size(), [&](const Segment& seg, Eigen::Index len) {
      for (Eigen::Index j = 0; j < len; ++j) {
        const double yj = y(offset + j);
        // Tiny relative slack absorbs roundoff from averaging box-feasible points.
        if (std::abs(yj) > seg.box_bound * (1.0 + 1e-9) + 1e-15) {
          v = std::numeric_limits<double>::infinity();
          return;
        }
        v += seg.l1_weight * std::abs(yj);
      }
      offset += len;
    });
    return v;
  }

  Eigen::VectorXd prox(const Eigen::VectorXd& s, double gamma) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("Regularizer::prox: gamma must be positive");
    Eigen::VectorXd out(s.size());
    Eigen::Index offset = 0;
    for_each_segment(s.size(), [&](const Segment& seg, Eigen::Index len) {
      const double t = seg.l1_weight / gamma;
      for (Eigen::Index j = 0; j < len; ++j) {
        const double sj = s(offset + j);
        const double shrunk = (t > 0.0) ? (std::max(sj - t, 0.0) - std::max(-sj - t, 0.0)) : sj;
        out(offset + j) = std::min(seg.box_bound, std::max(-seg.box_bound, shrunk));
      }
      offset += len;
    });
    return out;
  }

  /// Componentwise l1 weight / box bound, resolved against a vector length.
  double l1_weight_at(Eigen::Index j, Eigen::Index dim) const { return segment_at(j, dim).l1_weight; }
  double box_bound_at(Eigen::Index j, Eigen::Index dim) const { return segment_at(j, dim).box_bound; }

 private:
  static void check_params(double w, double a) {
    if (w < 0.0) throw std::invalid_argument("Regularizer: l1 weight must be nonnegative");
    if (!(a > 0.0)) throw std::invalid_argument("Regularizer: box bound must be positive");
  }

  static Regularizer uniform(double w, double a) {
    check_params(w, a);
    Regularizer r;
    r.segments_ = {Segment{-1, w, a}};
    r.uniform_ = true;
    return r;
  }

  template <typename F>
  void for_each_segment(Eigen::Index dim, F&& f) const {
    if (uniform_) {
      Segment seg = segments_[0];
      f(seg, dim);
      return;
    }
    Eigen::Index total = 0;
    for (const auto& seg : segments_) total += seg.length;
    if (total != dim) {
      throw std::invalid_argument("Regularizer: vector length " + std::to_string(dim) +
                                  " does not match segmented length " + std::to_string(total));
    }
    for (const auto& seg : segments_) f(seg, seg.length);
  }

  const Segment& segment_at(Eigen::Index j, Eigen::Index dim) const {
    if (uniform_) return segments_[0];
    Eigen::Index offset = 0;
    for (const auto& seg : segments_) {
      if (j < offset + seg.length) return seg;
      offset += seg.length;
    }
    throw std::out_of_range("Regularizer: coordinate index out of range");
    (void)dim;
  }

  std::vector<Segment> segments_;
  bool uniform_ = true;
};

/// Sum of per-agent regularizers sharing a common structure: l1 weights add,
/// boxes intersect. Used when pooling agents into one centralized problem.
inline Regularizer sum_regularizers(const std::vector<Regularizer>& parts) {
  if (parts.empty()) throw std::invalid_argument("sum_regularizers: empty list");
  const bool uniform = parts.front().is_uniform();
  for (const auto& r : parts) {
    if (r.is_uniform() != uniform) {
      throw std::invalid_argument("sum_regularizers: mixed uniform/segmented regularizers");
    }
  }
  if (uniform) {
    double w = 0.0;
    double a = std::numeric_limits<double>::infinity();
    for (const auto& r : parts) {
      w += r.segments()[0].l1_weight;
      a = std::min(a, r.segments()[0].box_bound);
    }
    return (a == std::numeric_limits<double>::infinity()) ? (w > 0 ? Regularizer::l1(w) : Regularizer::zero())
                                                          : Regularizer::l1_box(w, a);
  }
  std::vector<Regularizer::Segment> segs = parts.front().segments();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto& other = parts[i].segments();
    if (other.size() != segs.size()) throw std::invalid_argument("sum_regularizers: segment mismatch");
    for (std::size_t s = 0; s < segs.size(); ++s) {
      if (other[s].length != segs[s].length) {
        throw std::invalid_argument("sum_regularizers: segment mismatch");
      }
      segs[s].l1_weight += other[s].l1_weight;
      segs[s].box_bound = std::min(segs[s].box_bound, other[s].box_bound);
    }
  }
  return Regularizer::blocks(segs);
}

}  // namespace dadmm
