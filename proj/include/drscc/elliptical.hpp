#pragma once

// Elliptical reference distributions (normal, Student-t, logistic).
//
// Every family is described through its standardized 1-D marginal with
// location 0 and unit scale. "Scale" always refers to the scatter matrix,
// not the variance: along a direction e the marginal has scale
// sqrt(eᵀ Σ e), and its variance is
//   normal:     scale²
//   Student-t:  scale² · ν / (ν − 2)
//   logistic:   scale² · π² / 3

#include "drscc/common.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace drscc::elliptical {

enum class FamilyKind { Normal, StudentT, Logistic };

class GeneratorFamily {
 public:
  static GeneratorFamily normal() { return GeneratorFamily(FamilyKind::Normal, 0.0); }
  static GeneratorFamily logistic() { return GeneratorFamily(FamilyKind::Logistic, 0.0); }
  static GeneratorFamily student_t(double dof) {
    if (!(dof > 2.0) || !std::isfinite(dof)) {
      throw InvalidArgument("Student-t degrees of freedom must be finite and > 2");
    }
    return GeneratorFamily(FamilyKind::StudentT, dof);
  }

  FamilyKind kind() const { return kind_; }
  double dof() const { return dof_; }

  std::string name() const {
    switch (kind_) {
      case FamilyKind::Normal: return "normal";
      case FamilyKind::Logistic: return "logistic";
      case FamilyKind::StudentT: break;
    }
    return "student_t";
  }

  bool operator==(const GeneratorFamily&) const = default;

 private:
  GeneratorFamily(FamilyKind kind, double dof) : kind_(kind), dof_(dof) {}

  FamilyKind kind_;
  double dof_;
};

inline double std_pdf(const GeneratorFamily& family, double x) {
  switch (family.kind()) {
    case FamilyKind::Normal:
      return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    case FamilyKind::Logistic: {
      const double e = std::exp(-std::abs(x));
      return e / ((1.0 + e) * (1.0 + e));
    }
    case FamilyKind::StudentT:
      return boost::math::pdf(boost::math::students_t(family.dof()), x);
  }
  return 0.0;
}

inline double std_cdf(const GeneratorFamily& family, double x) {
  switch (family.kind()) {
    case FamilyKind::Normal:
      return 0.5 * std::erfc(-x / std::numbers::sqrt2);
    case FamilyKind::Logistic:
      return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    case FamilyKind::StudentT:
      if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
      return boost::math::cdf(boost::math::students_t(family.dof()), x);
  }
  return 0.0;
}

/// Upper tail 1 − F(x), computed without cancellation (all families are
/// symmetric).
inline double std_sf(const GeneratorFamily& family, double x) { return std_cdf(family, -x); }

inline double std_quantile(const GeneratorFamily& family, double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("quantile probability must lie in (0, 1)");
  switch (family.kind()) {
    case FamilyKind::Normal:
      return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
    case FamilyKind::Logistic:
      return std::log(p) - std::log1p(-p);
    case FamilyKind::StudentT:
      return boost::math::quantile(boost::math::students_t(family.dof()), p);
  }
  return 0.0;
}

/// F⁻¹(1 − q) evaluated as −F⁻¹(q).
inline double std_upper_quantile(const GeneratorFamily& family, double q) { return -std_quantile(family, q); }

/// κ = ∫_{a²/2}^{b²/2} k·g(z) dz. With z = x²/2 this becomes ∫_a^b x·f(x) dx
/// for the standardized density f, which is what gets integrated.
inline double kappa(const GeneratorFamily& family, double a, double b) {
  if (!(a >= 0.0)) throw InvalidArgument("kappa lower limit must be non-negative");
  if (!(b >= a)) throw InvalidArgument("kappa requires b >= a");
  if (b == a) return 0.0;

  const auto integrand = [&family](double x) { return x * std_pdf(family, x); };
  // Geometric pieces [a, a+1], [a+1, a+3], ... keep each panel well resolved
  // when b reaches far into a heavy tail.
  double total = 0.0;
  double left = a;
  double width = 1.0;
  while (left < b) {
    const double right = std::min(b, left + width);
    double error = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, left, right, 15, 1e-12,
                                                                            &error);
    if (error > 1e-10) throw NumericalError("kappa quadrature did not converge");
    left = right;
    width *= 2.0;
  }
  return total;
}

class EllipticalRef {
 public:
  EllipticalRef(Vector mean, Matrix scatter, GeneratorFamily family)
      : mean_(std::move(mean)), scatter_(std::move(scatter)), family_(family) {
    const auto m = mean_.size();
    if (m < 1) throw StructuralError("reference mean must be non-empty");
    if (scatter_.rows() != m || scatter_.cols() != m) {
      throw StructuralError("scatter must be " + std::to_string(m) + "x" + std::to_string(m));
    }
    if (!scatter_.allFinite() || !mean_.allFinite()) throw InvalidArgument("reference parameters must be finite");
    const double asym = (scatter_ - scatter_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, scatter_.cwiseAbs().maxCoeff())) {
      throw InvalidArgument("scatter matrix must be symmetric");
    }
    scatter_ = 0.5 * (scatter_ + scatter_.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(scatter_, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) throw InvalidArgument("scatter matrix must be positive definite");
    llt_.compute(scatter_);
    if (llt_.info() != Eigen::Success) throw InvalidArgument("scatter matrix must be positive definite");
  }

  /// Isotropic reference with scatter σ·I.
  static EllipticalRef isotropic(Vector mean, double sigma, GeneratorFamily family) {
    if (!(sigma > 0.0)) throw InvalidArgument("isotropic scatter sigma must be positive");
    const auto m = mean.size();
    return EllipticalRef(std::move(mean), sigma * Matrix::Identity(m, m), family);
  }

  Eigen::Index dimension() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& scatter() const { return scatter_; }
  const GeneratorFamily& family() const { return family_; }
  const Eigen::LLT<Matrix>& cholesky() const { return llt_; }

 private:
  Vector mean_;
  Matrix scatter_;
  GeneratorFamily family_;
  Eigen::LLT<Matrix> llt_;
};

struct Marginal {
  double location;
  double scale;
  GeneratorFamily family;
};

/// 1-D marginal of eᵀs̃ for s̃ following `ref`.
inline Marginal marginal(const EllipticalRef& ref, const Vector& direction) {
  if (direction.size() != ref.dimension()) throw StructuralError("direction dimension mismatch");
  if (direction.isZero(0.0)) throw InvalidArgument("marginal direction must be nonzero");
  return {direction.dot(ref.mean()), std::sqrt(direction.dot(ref.scatter() * direction)), ref.family()};
}

/// sqrt(xᵀ Σ⁻¹ x) through the cached Cholesky factor.
inline double mahalanobis(const Vector& x, const EllipticalRef& ref) {
  if (x.size() != ref.dimension()) throw StructuralError("mahalanobis dimension mismatch");
  return ref.cholesky().matrixL().solve(x).norm();
}

inline double mahalanobis(const Vector& x, const Matrix& scatter) {
  return mahalanobis(x, EllipticalRef(Vector::Zero(x.size()), scatter, GeneratorFamily::normal()));
}

/// One draw from `ref` using the caller's engine.
template <class Engine>
Vector draw(const EllipticalRef& ref, Engine& engine) {
  const auto m = ref.dimension();
  Vector z(m);
  switch (ref.family().kind()) {
    case FamilyKind::Normal: {
      std::normal_distribution<double> normal;
      for (Eigen::Index i = 0; i < m; ++i) z[i] = normal(engine);
      break;
    }
    case FamilyKind::StudentT: {
      std::normal_distribution<double> normal;
      for (Eigen::Index i = 0; i < m; ++i) z[i] = normal(engine);
      std::chi_squared_distribution<double> chi2(ref.family().dof());
      z /= std::sqrt(chi2(engine) / ref.family().dof());
      break;
    }
    case FamilyKind::Logistic: {
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      for (Eigen::Index i = 0; i < m; ++i) {
        double u = 0.0;
        while (u == 0.0) u = uniform(engine);
        z[i] = std_quantile(ref.family(), u);
      }
      break;
    }
  }
  return ref.mean() + ref.cholesky().matrixL() * z;
}

/// `count` independent draws, reproducible for a given seed.
inline std::vector<Vector> sample(const EllipticalRef& ref, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("sample count must be >= 1");
  std::mt19937_64 engine(seed);
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(ref, engine));
  return out;
}

}  // namespace drscc::elliptical
