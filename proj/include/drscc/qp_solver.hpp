#pragma once

// Dense convex QP solver:
//
//     minimize ½ xᵀPx + qᵀx   subject to   l ≤ Ax ≤ u
//
// Operator splitting (ADMM in the OSQP form) on a Ruiz-equilibrated copy of
// the problem, followed by an active-set polish that solves the
// equality-constrained KKT system exactly and repairs the working set until
// primal feasibility and multiplier signs agree. Bounds may be ±infinity;
// rows with l == u are equalities.
//
// Multiplier convention: Px + q + Aᵀy = 0 with y_i ≤ 0 on rows held at their
// lower bound and y_i ≥ 0 on rows held at their upper bound.

#include "drscc/common.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace drscc::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct StandardQp {
  Matrix P;
  Vector q;
  Matrix A;
  Vector lower;
  Vector upper;

  Eigen::Index variables() const { return P.rows(); }
  Eigen::Index rows() const { return A.rows(); }

  double objective(const Vector& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }
};

enum class SolveStatus { Optimal, Infeasible, MaxIter };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIter: return "max_iter";
  }
  return "unknown";
}

struct KktResiduals {
  double stationarity = kInf;     // ‖Px + q + Aᵀy‖∞
  double primal = kInf;           // max bound violation of Ax
  double complementarity = kInf;  // max |y_i| · slack on the side y_i points to
};

struct SolverSettings {
  double tolerance = 1e-8;  // ADMM absolute and relative stopping tolerance
  int max_iter = 50000;
  double rho = 0.1;
  double sigma = 1e-6;
  double relaxation = 1.6;
  int check_interval = 25;
  int scaling_iterations = 10;
  bool polish = true;
  int polish_max_changes = 200;
  double infeasibility_tolerance = 1e-9;
  // Acceptance thresholds for declaring a solution optimal.
  double stationarity_tolerance = 1e-6;
  double feasibility_tolerance = 1e-8;
  double complementarity_tolerance = 1e-6;
};

struct QpSolution {
  SolveStatus status = SolveStatus::MaxIter;
  Vector x;
  Vector y;
  double objective = kInf;
  KktResiduals residuals;
  int iterations = 0;
  double wall_time = 0.0;  // seconds
  bool polished = false;
  std::vector<Eigen::Index> violated_rows;  // filled for Infeasible
};

inline KktResiduals kkt_residuals(const StandardQp& qp, const Vector& x, const Vector& y) {
  KktResiduals r;
  r.stationarity = (qp.P * x + qp.q + qp.A.transpose() * y).lpNorm<Eigen::Infinity>();
  const Vector ax = qp.A * x;
  r.primal = 0.0;
  r.complementarity = 0.0;
  for (Eigen::Index i = 0; i < qp.rows(); ++i) {
    r.primal = std::max({r.primal, qp.lower[i] - ax[i], ax[i] - qp.upper[i]});
    if (y[i] > 0.0) {
      const double slack = qp.upper[i] - ax[i];
      r.complementarity = std::max(r.complementarity, std::isfinite(slack) ? y[i] * std::abs(slack) : kInf);
    } else if (y[i] < 0.0) {
      const double slack = ax[i] - qp.lower[i];
      r.complementarity = std::max(r.complementarity, std::isfinite(slack) ? -y[i] * std::abs(slack) : kInf);
    }
  }
  return r;
}

namespace detail {

inline double clamp_norm(double v) { return v < 1e-4 ? 1.0 : std::min(v, 1e4); }

// Ruiz equilibration: P̄ = c·D P D, q̄ = c·D q, Ā = E A D, bounds scaled by E.
struct Scaled {
  StandardQp qp;
  Vector d;  // column scaling
  Vector e;  // row scaling
  double c = 1.0;
};

inline Scaled equilibrate(const StandardQp& qp, int iterations) {
  Scaled s{qp, Vector::Ones(qp.variables()), Vector::Ones(qp.rows()), 1.0};
  auto& p = s.qp;
  for (int it = 0; it < iterations; ++it) {
    Vector dt(p.variables());
    for (Eigen::Index j = 0; j < p.variables(); ++j) {
      double v = p.P.col(j).lpNorm<Eigen::Infinity>();
      if (p.rows() > 0) v = std::max(v, p.A.col(j).lpNorm<Eigen::Infinity>());
      dt[j] = 1.0 / std::sqrt(clamp_norm(v));
    }
    Vector et(p.rows());
    for (Eigen::Index i = 0; i < p.rows(); ++i) et[i] = 1.0 / std::sqrt(clamp_norm(p.A.row(i).lpNorm<Eigen::Infinity>()));

    p.P = dt.asDiagonal() * p.P * dt.asDiagonal();
    p.q = dt.cwiseProduct(p.q);
    p.A = et.asDiagonal() * p.A * dt.asDiagonal();
    s.d = s.d.cwiseProduct(dt);
    s.e = s.e.cwiseProduct(et);

    double mean_col = 0.0;
    for (Eigen::Index j = 0; j < p.variables(); ++j) mean_col += p.P.col(j).lpNorm<Eigen::Infinity>();
    mean_col /= static_cast<double>(std::max<Eigen::Index>(1, p.variables()));
    const double ct = 1.0 / clamp_norm(std::max(mean_col, p.q.lpNorm<Eigen::Infinity>()));
    p.P *= ct;
    p.q *= ct;
    s.c *= ct;
  }
  p.lower = s.e.cwiseProduct(qp.lower);
  p.upper = s.e.cwiseProduct(qp.upper);
  return s;
}

enum class Side { Lower, Upper, Equal };

struct Active {
  Eigen::Index row;
  Side side;
};

struct PolishResult {
  bool ok = false;
  Vector x;
  Vector y;
};

// Equality-constrained solve on the working set, repaired one row at a time
// (add most violated, drop most wrong-signed multiplier).
inline PolishResult polish(const StandardQp& qp, std::vector<Active> working, const SolverSettings& settings) {
  const auto n = qp.variables();
  const auto m = qp.rows();
  PolishResult out;

  for (int change = 0; change <= settings.polish_max_changes; ++change) {
    const auto w = static_cast<Eigen::Index>(working.size());
    Matrix kkt = Matrix::Zero(n + w, n + w);
    Vector rhs = Vector::Zero(n + w);
    kkt.topLeftCorner(n, n) = qp.P;
    rhs.head(n) = -qp.q;
    for (Eigen::Index k = 0; k < w; ++k) {
      const auto& a = working[k];
      kkt.block(n + k, 0, 1, n) = qp.A.row(a.row);
      kkt.block(0, n + k, n, 1) = qp.A.row(a.row).transpose();
      rhs[n + k] = a.side == Side::Upper ? qp.upper[a.row] : qp.lower[a.row];
    }
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
    Vector sol = cod.solve(rhs);
    sol += cod.solve(rhs - kkt * sol);  // one refinement step
    if (!sol.allFinite() || (kkt * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-9 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) {
      return out;
    }

    const Vector x = sol.head(n);
    Vector y = Vector::Zero(m);
    for (Eigen::Index k = 0; k < w; ++k) y[working[k].row] += sol[n + k];

    const Vector ax = qp.A * x;
    Eigen::Index worst_row = -1;
    Side worst_side = Side::Lower;
    double worst = 1e-12 * std::max(1.0, ax.lpNorm<Eigen::Infinity>());
    std::vector<bool> in_set(static_cast<std::size_t>(m), false);
    for (const auto& a : working) in_set[static_cast<std::size_t>(a.row)] = true;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_set[static_cast<std::size_t>(i)]) continue;
      if (qp.lower[i] - ax[i] > worst) {
        worst = qp.lower[i] - ax[i];
        worst_row = i;
        worst_side = Side::Lower;
      }
      if (ax[i] - qp.upper[i] > worst) {
        worst = ax[i] - qp.upper[i];
        worst_row = i;
        worst_side = Side::Upper;
      }
    }
    if (worst_row >= 0) {
      working.push_back({worst_row, worst_side});
      continue;
    }

    const double sign_tol = 1e-10 * std::max(1.0, y.lpNorm<Eigen::Infinity>());
    std::size_t drop = working.size();
    double wrong = sign_tol;
    for (std::size_t k = 0; k < working.size(); ++k) {
      const auto& a = working[k];
      const double lambda = sol[n + static_cast<Eigen::Index>(k)];
      const double bad = a.side == Side::Lower ? lambda : a.side == Side::Upper ? -lambda : 0.0;
      if (bad > wrong) {
        wrong = bad;
        drop = k;
      }
    }
    if (drop < working.size()) {
      working.erase(working.begin() + static_cast<std::ptrdiff_t>(drop));
      continue;
    }

    out.ok = true;
    out.x = x;
    out.y = y;
    return out;
  }
  return out;
}

}  // namespace detail

inline QpSolution solve(const StandardQp& problem, const SolverSettings& settings = {}) {
  const auto started = std::chrono::steady_clock::now();
  const auto n = problem.variables();
  const auto m = problem.rows();
  if (problem.P.cols() != n || problem.q.size() != n || problem.A.cols() != n || problem.lower.size() != m ||
      problem.upper.size() != m) {
    throw StructuralError("QP blocks have inconsistent sizes");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (problem.lower[i] > problem.upper[i]) {
      QpSolution s;
      s.status = SolveStatus::Infeasible;
      s.violated_rows.push_back(i);
      s.x = Vector::Zero(n);
      s.y = Vector::Zero(m);
      return s;
    }
  }

  const auto scaled = detail::equilibrate(problem, settings.scaling_iterations);
  const auto& sp = scaled.qp;

  Vector rho(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::isfinite(sp.lower[i]) && !std::isfinite(sp.upper[i])) {
      rho[i] = 1e-6;
    } else if (sp.lower[i] == sp.upper[i]) {
      rho[i] = 1e3 * settings.rho;
    } else {
      rho[i] = settings.rho;
    }
  }
  double rho_scale = 1.0;

  const auto factor = [&] {
    Matrix k = sp.P + settings.sigma * Matrix::Identity(n, n);
    k.noalias() += sp.A.transpose() * (rho_scale * rho).asDiagonal() * sp.A;
    return Eigen::LLT<Matrix>(k);
  };
  auto llt = factor();

  Vector x = Vector::Zero(n);
  Vector z = Vector::Zero(m);
  Vector y = Vector::Zero(m);
  Vector y_prev = y;
  const Vector d_inv = scaled.d.cwiseInverse();
  const Vector e_inv = scaled.e.cwiseInverse();
  const double c_inv = 1.0 / scaled.c;

  QpSolution result;
  double eps = settings.tolerance;
  bool converged = false;
  int iter = 0;

  const auto finish = [&](const Vector& xs, const Vector& ys, bool polished) {
    result.x = scaled.d.cwiseProduct(xs);
    result.y = scaled.e.cwiseProduct(ys) * c_inv;
    result.polished = polished;
    result.residuals = kkt_residuals(problem, result.x, result.y);
    result.objective = problem.objective(result.x);
  };
  const auto meets_kkt = [&] {
    return result.residuals.stationarity <= settings.stationarity_tolerance &&
           result.residuals.primal <= settings.feasibility_tolerance &&
           result.residuals.complementarity <= settings.complementarity_tolerance;
  };

  for (iter = 1; iter <= settings.max_iter; ++iter) {
    const Vector rho_eff = rho_scale * rho;
    const Vector rhs = settings.sigma * x - sp.q + sp.A.transpose() * (rho_eff.cwiseProduct(z) - y);
    const Vector x_tilde = llt.solve(rhs);
    const Vector z_tilde = sp.A * x_tilde;
    x = settings.relaxation * x_tilde + (1.0 - settings.relaxation) * x;
    const Vector z_relaxed = settings.relaxation * z_tilde + (1.0 - settings.relaxation) * z;
    y_prev = y;
    z = (z_relaxed + y.cwiseQuotient(rho_eff)).cwiseMax(sp.lower).cwiseMin(sp.upper);
    y += rho_eff.cwiseProduct(z_relaxed - z);

    if (iter % settings.check_interval != 0 && iter != settings.max_iter) continue;

    const Vector ax = sp.A * x;
    const Vector px = sp.P * x;
    const Vector aty = sp.A.transpose() * y;
    const double prim = m > 0 ? e_inv.cwiseProduct(ax - z).lpNorm<Eigen::Infinity>() : 0.0;
    const double dual = c_inv * d_inv.cwiseProduct(px + sp.q + aty).lpNorm<Eigen::Infinity>();
    const double prim_scale = m > 0 ? std::max(e_inv.cwiseProduct(ax).lpNorm<Eigen::Infinity>(),
                                               e_inv.cwiseProduct(z).lpNorm<Eigen::Infinity>())
                                    : 0.0;
    const double dual_scale = c_inv * std::max({d_inv.cwiseProduct(px).lpNorm<Eigen::Infinity>(),
                                                d_inv.cwiseProduct(aty).lpNorm<Eigen::Infinity>(),
                                                d_inv.cwiseProduct(sp.q).lpNorm<Eigen::Infinity>()});

    if (prim <= eps + eps * prim_scale && dual <= eps + eps * dual_scale) {
      if (settings.polish) {
        std::vector<detail::Active> working;
        for (Eigen::Index i = 0; i < m; ++i) {
          if (sp.lower[i] == sp.upper[i]) {
            working.push_back({i, detail::Side::Equal});
          } else if (z[i] - sp.lower[i] < -y[i]) {
            working.push_back({i, detail::Side::Lower});
          } else if (sp.upper[i] - z[i] < y[i]) {
            working.push_back({i, detail::Side::Upper});
          }
        }
        const auto pol = detail::polish(sp, std::move(working), settings);
        if (pol.ok) {
          finish(pol.x, pol.y, true);
          if (meets_kkt()) {
            converged = true;
            break;
          }
        }
      }
      finish(x, y, false);
      if (meets_kkt()) {
        converged = true;
        break;
      }
      // Not accurate enough yet: keep iterating with a stricter target.
      eps = std::max(eps * 1e-2, 1e-14);
    }

    // Primal infeasibility certificate from the dual increment.
    const Vector dy = y - y_prev;
    const Vector dy_unscaled = scaled.e.cwiseProduct(dy);
    const double dy_norm = dy_unscaled.lpNorm<Eigen::Infinity>();
    if (m > 0 && dy_norm > 1e-14) {
      const double at_dy = d_inv.cwiseProduct(sp.A.transpose() * dy).lpNorm<Eigen::Infinity>();
      double support = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (dy_unscaled[i] > 0.0) support += problem.upper[i] * dy_unscaled[i];
        if (dy_unscaled[i] < 0.0) support += problem.lower[i] * dy_unscaled[i];
      }
      const double tol = settings.infeasibility_tolerance * dy_norm;
      if (at_dy <= tol && std::isfinite(support) && support < -tol) {
        result.status = SolveStatus::Infeasible;
        finish(x, y, false);
        for (Eigen::Index i = 0; i < m; ++i) {
          if (std::abs(dy_unscaled[i]) > 1e-6 * dy_norm) result.violated_rows.push_back(i);
        }
        result.iterations = iter;
        result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return result;
      }
    }

    // Rebalance ρ when primal and dual residuals drift apart.
    const double ratio = std::sqrt((prim / std::max(prim_scale, 1e-30)) / std::max(dual / std::max(dual_scale, 1e-30), 1e-30));
    const double proposed = std::clamp(rho_scale * ratio, 1e-6, 1e6);
    if (std::isfinite(proposed) && (proposed > 5.0 * rho_scale || proposed < 0.2 * rho_scale)) {
      rho_scale = proposed;
      llt = factor();
    }
  }

  if (!converged) finish(x, y, false);
  result.status = converged ? SolveStatus::Optimal : SolveStatus::MaxIter;
  result.iterations = std::min(iter, settings.max_iter);
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace drscc::qp
