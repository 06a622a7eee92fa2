#pragma once

// Bernstein-basis trajectory segments.
//
// A segment is stored on normalized time s ∈ [0, 1]; the physical time is
// t = T_{i-1} + s·τ_i. Control points are positions, so the l-th physical
// derivative is τ^{-l} times the l-th derivative in s.

#include "drscc/common.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace drscc::bezier {

inline constexpr int kMaxDegree = 30;

namespace detail {

// Pascal's triangle up to 2·kMaxDegree; the Gram integrals need C(2p, ·).
inline const auto& pascal() {
  static const auto table = [] {
    constexpr int rows = 2 * kMaxDegree + 1;
    std::array<std::array<std::uint64_t, rows>, rows> c{};
    for (int n = 0; n < rows; ++n) {
      c[n][0] = c[n][n] = 1;
      for (int k = 1; k < n; ++k) c[n][k] = c[n - 1][k - 1] + c[n - 1][k];
    }
    return c;
  }();
  return table;
}

}  // namespace detail

inline std::uint64_t binomial(int n, int k) {
  if (n < 0 || n > 2 * kMaxDegree) throw InvalidArgument("binomial row out of table range");
  if (k < 0 || k > n) return 0;
  return detail::pascal()[n][k];
}

/// Bernstein basis polynomial b_n^j(t) = C(n,j) t^j (1−t)^{n−j}.
inline double basis(int n, int j, double t) {
  if (n < 0 || n > kMaxDegree) throw InvalidArgument("degree out of range [0, 30]");
  if (j < 0 || j > n) throw InvalidArgument("basis index " + std::to_string(j) + " outside [0, n]");
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("normalized time outside [0, 1]");
  return static_cast<double>(binomial(n, j)) * std::pow(t, j) * std::pow(1.0 - t, n - j);
}

class BezierSegment {
 public:
  /// `control_points` is (n+1) × m: one row per control point.
  BezierSegment(Matrix control_points, double duration)
      : points_(std::move(control_points)), duration_(duration) {
    if (points_.rows() < 1) throw InvalidArgument("segment needs at least one control point");
    if (points_.rows() - 1 > kMaxDegree) throw InvalidArgument("segment degree exceeds 30");
    if (!(duration_ > 0.0)) throw InvalidArgument("segment duration must be positive");
  }

  int degree() const { return static_cast<int>(points_.rows()) - 1; }
  Eigen::Index dimension() const { return points_.cols(); }
  const Matrix& control_points() const { return points_; }
  double duration() const { return duration_; }

 private:
  Matrix points_;
  double duration_;
};

class PiecewiseBezier {
 public:
  PiecewiseBezier(std::vector<BezierSegment> segments, double start_time)
      : segments_(std::move(segments)), start_time_(start_time) {
    if (segments_.empty()) throw InvalidArgument("trajectory needs at least one segment");
    for (const auto& s : segments_) {
      if (s.degree() != segments_.front().degree() || s.dimension() != segments_.front().dimension()) {
        throw StructuralError("trajectory segments differ in degree or dimension");
      }
    }
  }

  std::size_t size() const { return segments_.size(); }
  const BezierSegment& segment(std::size_t i) const { return segments_.at(i); }
  const std::vector<BezierSegment>& segments() const { return segments_; }
  double start_time() const { return start_time_; }
  int degree() const { return segments_.front().degree(); }
  Eigen::Index dimension() const { return segments_.front().dimension(); }

  double end_time() const {
    double t = start_time_;
    for (const auto& s : segments_) t += s.duration();
    return t;
  }

 private:
  std::vector<BezierSegment> segments_;
  double start_time_;
};

/// Linear map from the n+1 control points to the n−l+1 control points of
/// the l-th derivative in normalized time. Each differencing step k
/// contributes a factor (n−k+1), so the cumulative factor is n!/(n−l)!.
inline Matrix derivative_operator(int n, int l) {
  if (l < 0 || l > n) throw InvalidArgument("derivative order " + std::to_string(l) + " outside [0, n]");
  Matrix op = Matrix::Identity(n + 1, n + 1);
  for (int k = 1; k <= l; ++k) {
    const int rows = n - k + 1;
    Matrix diff = Matrix::Zero(rows, rows + 1);
    for (int j = 0; j < rows; ++j) {
      diff(j, j) = -(n - k + 1);
      diff(j, j + 1) = n - k + 1;
    }
    op = diff * op;
  }
  return op;
}

/// Control points a^{l,j} of the l-th derivative. With `physical`, values are
/// derivatives with respect to physical time (scaled by τ^{-l}).
inline Matrix derivative_control_points(const BezierSegment& segment, int l, bool physical = false) {
  Matrix a = derivative_operator(segment.degree(), l) * segment.control_points();
  if (physical) a *= std::pow(segment.duration(), -l);
  return a;
}

namespace detail {

inline Vector bernstein_sum(const Matrix& points, double t) {
  const int n = static_cast<int>(points.rows()) - 1;
  Vector out = Vector::Zero(points.cols());
  for (int j = 0; j <= n; ++j) out += basis(n, j, t) * points.row(j).transpose();
  return out;
}

}  // namespace detail

inline Vector evaluate(const BezierSegment& segment, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("normalized time outside [0, 1]");
  // Pin the endpoints exactly; the Bernstein sum would add rounding noise.
  if (t == 0.0) return segment.control_points().row(0).transpose();
  if (t == 1.0) return segment.control_points().row(segment.degree()).transpose();
  return detail::bernstein_sum(segment.control_points(), t);
}

/// l-th physical-time derivative at normalized time t.
inline Vector evaluate_derivative(const BezierSegment& segment, int l, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("normalized time outside [0, 1]");
  return detail::bernstein_sum(derivative_control_points(segment, l, true), t);
}

struct TimedPoint {
  double time;
  Vector position;
};

/// Uniform samples per segment, both segment endpoints included, so shared
/// junctions appear twice.
inline std::vector<TimedPoint> sample(const PiecewiseBezier& trajectory, int resolution) {
  if (resolution < 2) throw InvalidArgument("sample resolution must be >= 2");
  std::vector<TimedPoint> out;
  out.reserve(trajectory.size() * static_cast<std::size_t>(resolution));
  double t0 = trajectory.start_time();
  for (const auto& seg : trajectory.segments()) {
    for (int r = 0; r < resolution; ++r) {
      const double s = static_cast<double>(r) / (resolution - 1);
      out.push_back({t0 + s * seg.duration(), evaluate(seg, s)});
    }
    t0 += seg.duration();
  }
  return out;
}

/// Gram matrix G_{ij} = ∫₀¹ b_p^i(s) b_p^j(s) ds in closed form.
inline Matrix bernstein_gram(int p) {
  Matrix g(p + 1, p + 1);
  for (int i = 0; i <= p; ++i) {
    for (int j = 0; j <= p; ++j) {
      g(i, j) = static_cast<double>(binomial(p, i)) * static_cast<double>(binomial(p, j)) /
                ((2.0 * p + 1.0) * static_cast<double>(binomial(2 * p, i + j)));
    }
  }
  return g;
}

}  // namespace drscc::bezier
