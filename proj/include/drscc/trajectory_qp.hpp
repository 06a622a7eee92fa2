#pragma once

// Minimum-snap Bezier trajectory QP over a chain of boxes.
//
// Decision vector: all control points stacked dimension-major,
//   c = [c_{1,x}^0 … c_{N,x}^n, c_{1,y}^0 … c_{N,y}^n, …].
// Segment i is parameterized on s ∈ [0, 1] with duration τ_i, so the l-th
// physical derivative control points are τ_i^{-l} · D_l c_i.

#include "drscc/bezier.hpp"
#include "drscc/common.hpp"
#include "drscc/corridor.hpp"
#include "drscc/qp_solver.hpp"
#include "drscc/tightening.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace drscc {

struct DerivativeLimit {
  double min;
  double max;
};

struct SnapSpec {
  int degree = 7;
  int objective_order = 4;    // k: penalize ∫ ‖d^k p / dt^k‖²
  int continuity_order = -1;  // junctions match derivatives 0..continuity_order−1; −1 means k
  // Boundary derivatives of orders 1..k−1 (position comes from the path).
  // Missing entries default to zero, i.e. start and end at rest.
  std::vector<Vector> start_derivatives;
  std::vector<Vector> end_derivatives;
  // Limits for derivative orders g = 1..limits.size() (at most k−1).
  std::vector<DerivativeLimit> derivative_limits;

  int continuity() const { return continuity_order < 0 ? objective_order : continuity_order; }

  void check() const {
    if (objective_order < 1) throw InvalidArgument("objective order k must be >= 1");
    if (degree > bezier::kMaxDegree) throw InvalidArgument("degree n must be <= 30");
    if (degree < 2 * objective_order - 1) {
      throw InvalidArgument("degree n = " + std::to_string(degree) + " must be >= 2k-1 = " +
                            std::to_string(2 * objective_order - 1));
    }
    if (continuity() < 0 || continuity() > degree) throw InvalidArgument("continuity order outside [0, n]");
    if (static_cast<int>(start_derivatives.size()) > objective_order - 1 ||
        static_cast<int>(end_derivatives.size()) > objective_order - 1) {
      throw InvalidArgument("boundary derivatives given beyond order k-1");
    }
    if (static_cast<int>(derivative_limits.size()) > objective_order - 1) {
      throw InvalidArgument("derivative limits given beyond order k-1");
    }
    for (std::size_t g = 0; g < derivative_limits.size(); ++g) {
      if (!(derivative_limits[g].min < derivative_limits[g].max)) {
        throw InvalidArgument("derivative limit for order " + std::to_string(g + 1) + " needs min < max");
      }
    }
  }
};

struct TrajectoryQp {
  int segments = 0;
  int degree = 0;
  Eigen::Index dimension = 0;
  std::vector<double> durations;
  double start_time = 0.0;

  Matrix Q;  // objective cᵀQc
  Matrix eq_matrix;
  Vector eq_rhs;
  Eigen::Index dropped_equalities = 0;
  Vector var_lower;  // corridor rows, one per control point
  Vector var_upper;
  Matrix ineq_matrix;  // derivative-limit rows
  Vector ineq_lower;
  Vector ineq_upper;

  Eigen::Index variables() const { return Q.rows(); }

  Eigen::Index index(Eigen::Index dim, int segment, int j) const {
    return dim * segments * (degree + 1) + static_cast<Eigen::Index>(segment) * (degree + 1) + j;
  }

  /// ½xᵀPx + qᵀx form with P = 2Q; rows are [equalities; boxes; limits].
  qp::StandardQp standard_form() const {
    const auto nv = variables();
    const auto ne = eq_matrix.rows();
    const auto ni = ineq_matrix.rows();
    qp::StandardQp s;
    s.P = 2.0 * Q;
    s.q = Vector::Zero(nv);
    s.A = Matrix::Zero(ne + nv + ni, nv);
    s.A.topRows(ne) = eq_matrix;
    s.A.middleRows(ne, nv) = Matrix::Identity(nv, nv);
    s.A.bottomRows(ni) = ineq_matrix;
    s.lower.resize(ne + nv + ni);
    s.upper.resize(ne + nv + ni);
    s.lower << eq_rhs, var_lower, ineq_lower;
    s.upper << eq_rhs, var_upper, ineq_upper;
    return s;
  }

  bezier::PiecewiseBezier reshape(const Vector& c) const {
    if (c.size() != variables()) throw StructuralError("solution vector has wrong length");
    std::vector<bezier::BezierSegment> segs;
    for (int i = 0; i < segments; ++i) {
      Matrix pts(degree + 1, dimension);
      for (Eigen::Index d = 0; d < dimension; ++d) {
        for (int j = 0; j <= degree; ++j) pts(j, d) = c[index(d, i, j)];
      }
      segs.emplace_back(std::move(pts), durations[static_cast<std::size_t>(i)]);
    }
    return bezier::PiecewiseBezier(std::move(segs), start_time);
  }
};

/// Per-segment ∫₀^τ ‖p^{(k)}(t)‖² dt as a quadratic form in the control points:
/// τ^{1−2k} · D_kᵀ G_{n−k} D_k per segment and dimension, block diagonal.
inline Matrix assemble_objective(int segments, int degree, int order, const std::vector<double>& durations,
                                 Eigen::Index dimension) {
  if (degree < 2 * order - 1) {
    throw InvalidArgument("degree n = " + std::to_string(degree) + " must be >= 2k-1 = " +
                          std::to_string(2 * order - 1));
  }
  if (static_cast<int>(durations.size()) != segments) throw StructuralError("need one duration per segment");
  const Matrix dk = bezier::derivative_operator(degree, order);
  const Matrix h = dk.transpose() * bezier::bernstein_gram(degree - order) * dk;
  const int block = degree + 1;
  Matrix q = Matrix::Zero(dimension * segments * block, dimension * segments * block);
  for (Eigen::Index d = 0; d < dimension; ++d) {
    for (int i = 0; i < segments; ++i) {
      const double tau = durations[static_cast<std::size_t>(i)];
      if (!(tau > 0.0)) throw InvalidArgument("segment durations must be positive");
      const auto off = (d * segments + i) * block;
      q.block(off, off, block, block) = std::pow(tau, 1 - 2 * order) * h;
    }
  }
  return 0.5 * (q + q.transpose());
}

namespace detail {

// Drops linearly dependent equality rows (rank-revealing QR, tolerance
// 1e-10) and rejects inconsistent systems.
inline Eigen::Index prune_equalities(Matrix& a, Vector& b) {
  if (a.rows() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < rank; ++k) keep.push_back(qr.colsPermutation().indices()[k]);
  std::sort(keep.begin(), keep.end());

  Matrix ak(static_cast<Eigen::Index>(keep.size()), a.cols());
  Vector bk(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    ak.row(static_cast<Eigen::Index>(k)) = a.row(keep[k]);
    bk[static_cast<Eigen::Index>(k)] = b[keep[k]];
  }
  const Vector x = ak.completeOrthogonalDecomposition().solve(bk);
  if ((a * x - b).lpNorm<Eigen::Infinity>() > 1e-8 * std::max(1.0, b.lpNorm<Eigen::Infinity>())) {
    throw InvalidArgument("over-constrained boundary conditions: equality rows are inconsistent");
  }
  const Eigen::Index dropped = a.rows() - ak.rows();
  a = std::move(ak);
  b = std::move(bk);
  return dropped;
}

}  // namespace detail

/// Builds the full QP: corridor box rows on every control point, boundary
/// and junction equalities, and derivative-limit rows on derivative control
/// points.
inline TrajectoryQp assemble_constraints(const std::vector<BoxRegion>& boxes, const InitialPath& path,
                                         const SnapSpec& spec) {
  spec.check();
  const int segs = static_cast<int>(path.segments());
  if (static_cast<int>(boxes.size()) != segs) {
    throw StructuralError("need one box per path segment (" + std::to_string(boxes.size()) + " boxes, " +
                          std::to_string(segs) + " segments)");
  }
  const auto m = path.dimension();
  for (const auto& b : boxes) {
    if (b.dimension() != m || b.upper.size() != m) throw StructuralError("box dimension mismatch");
  }
  const int n = spec.degree;
  const int k = spec.objective_order;

  TrajectoryQp qp;
  qp.segments = segs;
  qp.degree = n;
  qp.dimension = m;
  qp.durations = path.durations();
  qp.start_time = path.start_time();
  qp.Q = assemble_objective(segs, n, k, qp.durations, m);

  const auto nv = qp.variables();
  const auto tau = [&](int i) { return qp.durations[static_cast<std::size_t>(i)]; };
  std::vector<Matrix> ops;
  for (int l = 0; l <= std::max(k, spec.continuity()); ++l) ops.push_back(l <= n ? bezier::derivative_operator(n, l) : Matrix());

  const auto boundary = [&](const std::vector<Vector>& given, int l, Eigen::Index d, const Vector& position) {
    if (l == 0) return position[d];
    const auto idx = static_cast<std::size_t>(l - 1);
    if (idx < given.size()) {
      if (given[idx].size() != m) throw StructuralError("boundary derivative dimension mismatch");
      return given[idx][d];
    }
    return 0.0;
  };

  std::vector<Vector> rows;
  std::vector<double> rhs;
  for (Eigen::Index d = 0; d < m; ++d) {
    for (int l = 0; l < k; ++l) {
      const Matrix& op = ops[static_cast<std::size_t>(l)];
      Vector start = Vector::Zero(nv);
      Vector end = Vector::Zero(nv);
      for (int j = 0; j <= n; ++j) {
        start[qp.index(d, 0, j)] = op(0, j) * std::pow(tau(0), -l);
        end[qp.index(d, segs - 1, j)] = op(op.rows() - 1, j) * std::pow(tau(segs - 1), -l);
      }
      rows.push_back(start);
      rhs.push_back(boundary(spec.start_derivatives, l, d, path.waypoints().front()));
      rows.push_back(end);
      rhs.push_back(boundary(spec.end_derivatives, l, d, path.waypoints().back()));
    }
    for (int i = 0; i + 1 < segs; ++i) {
      for (int phi = 0; phi < spec.continuity(); ++phi) {
        const Matrix& op = ops[static_cast<std::size_t>(phi)];
        Vector row = Vector::Zero(nv);
        for (int j = 0; j <= n; ++j) {
          row[qp.index(d, i, j)] += op(op.rows() - 1, j) * std::pow(tau(i), -phi);
          row[qp.index(d, i + 1, j)] -= op(0, j) * std::pow(tau(i + 1), -phi);
        }
        rows.push_back(row);
        rhs.push_back(0.0);
      }
    }
  }
  qp.eq_matrix.resize(static_cast<Eigen::Index>(rows.size()), nv);
  qp.eq_rhs.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    qp.eq_matrix.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    qp.eq_rhs[static_cast<Eigen::Index>(r)] = rhs[r];
  }
  qp.dropped_equalities = detail::prune_equalities(qp.eq_matrix, qp.eq_rhs);

  qp.var_lower.resize(nv);
  qp.var_upper.resize(nv);
  for (Eigen::Index d = 0; d < m; ++d) {
    for (int i = 0; i < segs; ++i) {
      for (int j = 0; j <= n; ++j) {
        qp.var_lower[qp.index(d, i, j)] = boxes[static_cast<std::size_t>(i)].lower[d];
        qp.var_upper[qp.index(d, i, j)] = boxes[static_cast<std::size_t>(i)].upper[d];
      }
    }
  }

  std::vector<Vector> lim_rows;
  std::vector<double> lim_lo;
  std::vector<double> lim_hi;
  for (Eigen::Index d = 0; d < m; ++d) {
    for (int i = 0; i < segs; ++i) {
      for (std::size_t g0 = 0; g0 < spec.derivative_limits.size(); ++g0) {
        const int g = static_cast<int>(g0) + 1;
        const Matrix& op = ops[static_cast<std::size_t>(g)];
        for (Eigen::Index j = 0; j < op.rows(); ++j) {
          Vector row = Vector::Zero(nv);
          for (int c = 0; c <= n; ++c) row[qp.index(d, i, c)] = op(j, c) * std::pow(tau(i), -g);
          lim_rows.push_back(row);
          lim_lo.push_back(spec.derivative_limits[g0].min);
          lim_hi.push_back(spec.derivative_limits[g0].max);
        }
      }
    }
  }
  qp.ineq_matrix.resize(static_cast<Eigen::Index>(lim_rows.size()), nv);
  qp.ineq_lower.resize(static_cast<Eigen::Index>(lim_rows.size()));
  qp.ineq_upper.resize(static_cast<Eigen::Index>(lim_rows.size()));
  for (std::size_t r = 0; r < lim_rows.size(); ++r) {
    qp.ineq_matrix.row(static_cast<Eigen::Index>(r)) = lim_rows[r].transpose();
    qp.ineq_lower[static_cast<Eigen::Index>(r)] = lim_lo[r];
    qp.ineq_upper[static_cast<Eigen::Index>(r)] = lim_hi[r];
  }
  return qp;
}

inline TrajectoryQp assemble_constraints(const SafeCorridor& corridor, const InitialPath& path,
                                         const SnapSpec& spec) {
  return assemble_constraints(corridor.regions(), path, spec);
}

inline TrajectoryQp assemble_constraints(const TightenedCorridor& corridor, const InitialPath& path,
                                         const SnapSpec& spec) {
  if (!corridor.feasible()) throw InfeasibleTightening(corridor);
  return assemble_constraints(corridor.regions, path, spec);
}

/// Sparse triplet dump: a "rows cols nnz" header line, then one "i j value"
/// line per nonzero (0-based indices, full precision).
inline void write_triplets(std::ostream& os, const Matrix& a) {
  Eigen::Index nnz = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) nnz += a(i, j) != 0.0;
  }
  os << a.rows() << ' ' << a.cols() << ' ' << nnz << '\n';
  const auto old = os.precision(17);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0) os << i << ' ' << j << ' ' << a(i, j) << '\n';
    }
  }
  os.precision(old);
}

}  // namespace drscc
