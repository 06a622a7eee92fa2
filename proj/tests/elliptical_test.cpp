#include "drscc/elliptical.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace drscc;
using namespace drscc::elliptical;

namespace {

struct Pair {
  GeneratorFamily lib;
  oracle::Dist ref;
};

std::vector<Pair> families() {
  return {{GeneratorFamily::normal(), {oracle::Family::Normal}},
          {GeneratorFamily::student_t(3.0), {oracle::Family::StudentT, 3.0}},
          {GeneratorFamily::student_t(5.0), {oracle::Family::StudentT, 5.0}},
          {GeneratorFamily::logistic(), {oracle::Family::Logistic}}};
}

Vector v2(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST(Family, Construction) {
  EXPECT_THROW(GeneratorFamily::student_t(2.0), InvalidArgument);
  EXPECT_THROW(GeneratorFamily::student_t(INFINITY), InvalidArgument);
  EXPECT_EQ(GeneratorFamily::student_t(3.0).dof(), 3.0);
  EXPECT_EQ(GeneratorFamily::logistic().name(), "logistic");
  EXPECT_FALSE(GeneratorFamily::student_t(3.0) == GeneratorFamily::student_t(4.0));
}

TEST(Distribution, NormalCdfAtZero) { EXPECT_DOUBLE_EQ(std_cdf(GeneratorFamily::normal(), 0.0), 0.5); }

TEST(Distribution, LogisticQuantileClosedForm) {
  EXPECT_NEAR(std_quantile(GeneratorFamily::logistic(), 0.75), std::log(3.0), 1e-14);
}

TEST(Distribution, NormalQuantileMatchesBisection) {
  const auto fam = GeneratorFamily::normal();
  double lo = -10, hi = 10;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std_cdf(fam, mid) < 0.9 ? lo : hi) = mid;
  }
  EXPECT_NEAR(std_quantile(fam, 0.9), 0.5 * (lo + hi), 1e-9);
}

TEST(Distribution, MatchesIndependentForms) {
  for (const auto& f : families()) {
    for (double x = -8.0; x <= 8.0; x += 0.37) {
      EXPECT_NEAR(std_pdf(f.lib, x), f.ref.pdf(x), 1e-13) << f.lib.name() << " x=" << x;
      EXPECT_NEAR(std_sf(f.lib, x), f.ref.sf(x), 1e-13) << f.lib.name() << " x=" << x;
    }
  }
}

TEST(Distribution, QuantileRejectsOutOfRange) {
  EXPECT_THROW(std_quantile(GeneratorFamily::normal(), 0.0), InvalidArgument);
  EXPECT_THROW(std_quantile(GeneratorFamily::normal(), 1.0), InvalidArgument);
}

TEST(Distribution, CdfMonotoneAndPdfIntegratesToOne) {
  for (const auto& f : families()) {
    double prev = 0.0;
    for (double x = -12.0; x <= 12.0; x += 0.01) {
      const double c = std_cdf(f.lib, x);
      ASSERT_GE(c, prev);
      prev = c;
    }
    const double mass = oracle::gauss_legendre([&](double x) { return std_pdf(f.lib, x); }, -12.0, 12.0, 400);
    // Heavy Student-t tails hold mass outside [-12, 12]; compare to that.
    const double inside = 1.0 - 2.0 * f.ref.sf(12.0);
    EXPECT_NEAR(mass, inside, 1e-6) << f.lib.name();
    if (f.lib.kind() == FamilyKind::Normal) EXPECT_NEAR(mass, 1.0, 1e-6);
  }
}

TEST(Distribution, QuantileCdfRoundTrip) {
  for (const auto& f : families()) {
    for (int i = 0; i < 1000; ++i) {
      const double p = 1e-6 + (1.0 - 2e-6) * i / 999.0;
      const double x = std_quantile(f.lib, p);
      const double back = p < 0.5 ? std_cdf(f.lib, x) : 1.0 - std_sf(f.lib, x);
      ASSERT_NEAR(back, p, 1e-9) << f.lib.name() << " p=" << p;
    }
  }
}

TEST(Kappa, EmptyInterval) {
  for (const auto& f : families()) EXPECT_EQ(kappa(f.lib, 1.3, 1.3), 0.0);
}

TEST(Kappa, NormalClosedForm) {
  const auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); };
  EXPECT_NEAR(kappa(GeneratorFamily::normal(), 1.0, 2.0), phi(1.0) - phi(2.0), 1e-14);
}

TEST(Kappa, LogisticRiemannOracle) {
  const oracle::Dist d{oracle::Family::Logistic};
  const long steps = 10000000;
  const double h = 2.5 / steps;
  double sum = 0.0;
  for (long i = 0; i < steps; ++i) {
    const double x = 0.5 + (i + 0.5) * h;
    sum += x * d.pdf(x);
  }
  EXPECT_NEAR(kappa(GeneratorFamily::logistic(), 0.5, 3.0), sum * h, 1e-8);
}

TEST(Kappa, RandomIntervalsAgainstFixedStepQuadrature) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (const auto& f : families()) {
    for (int i = 0; i < 50; ++i) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      const double want = oracle::kappa_trapezoid(f.ref, a, b, 200000);
      EXPECT_NEAR(kappa(f.lib, a, b), want, 1e-8) << f.lib.name() << " [" << a << ", " << b << "]";
    }
  }
}

TEST(Kappa, RejectsBadInterval) {
  EXPECT_THROW(kappa(GeneratorFamily::normal(), 2.0, 1.0), InvalidArgument);
  EXPECT_THROW(kappa(GeneratorFamily::normal(), -1.0, 1.0), InvalidArgument);
}

TEST(Marginal, IdentityScatter) {
  const auto m = marginal(EllipticalRef(v2(1, 2), Matrix::Identity(2, 2), GeneratorFamily::normal()), v2(1, 0));
  EXPECT_DOUBLE_EQ(m.location, 1.0);
  EXPECT_DOUBLE_EQ(m.scale, 1.0);
  EXPECT_EQ(m.family, GeneratorFamily::normal());
}

TEST(Marginal, IsotropicSigmaTwo) {
  const auto m = marginal(EllipticalRef::isotropic(v2(0, 0), 2.0, GeneratorFamily::logistic()), v2(0, 1));
  EXPECT_DOUBLE_EQ(m.scale, std::sqrt(2.0));
}

TEST(Marginal, DiagonalExtraction) {
  Matrix s = Matrix::Zero(2, 2);
  s.diagonal() << 4, 9;
  const auto m = marginal(EllipticalRef(v2(0, 0), s, GeneratorFamily::normal()), v2(0, 1));
  EXPECT_DOUBLE_EQ(m.location, 0.0);
  EXPECT_DOUBLE_EQ(m.scale, 3.0);
  EXPECT_THROW(marginal(EllipticalRef(v2(0, 0), s, GeneratorFamily::normal()), v2(0, 0)), InvalidArgument);
}

TEST(Reference, RejectsBadScatter) {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(EllipticalRef(v2(0, 0), asym, GeneratorFamily::normal()), InvalidArgument);
  Matrix indef(2, 2);
  indef << 1, 2, 2, 1;
  EXPECT_THROW(EllipticalRef(v2(0, 0), indef, GeneratorFamily::normal()), InvalidArgument);
  EXPECT_THROW(EllipticalRef(v2(0, 0), Matrix::Identity(3, 3), GeneratorFamily::normal()), StructuralError);
}

TEST(Mahalanobis, Examples) {
  EXPECT_DOUBLE_EQ(mahalanobis(v2(0, 0), Matrix::Identity(2, 2)), 0.0);
  EXPECT_NEAR(mahalanobis(v2(3, 4), Matrix::Identity(2, 2)), 5.0, 1e-14);
  Matrix s = Matrix::Zero(2, 2);
  s.diagonal() << 4, 1;
  EXPECT_NEAR(mahalanobis(v2(2, 0), s), 1.0, 1e-14);
}

TEST(Sample, NormalMeans) {
  const auto draws = sample(EllipticalRef(v2(1, -2), Matrix::Identity(2, 2), GeneratorFamily::normal()), 100000, 5);
  Vector mean = Vector::Zero(2);
  for (const auto& d : draws) mean += d;
  mean /= draws.size();
  EXPECT_NEAR(mean[0], 1.0, 0.02);
  EXPECT_NEAR(mean[1], -2.0, 0.02);
}

TEST(Sample, Deterministic) {
  const EllipticalRef ref(v2(0, 0), Matrix::Identity(2, 2), GeneratorFamily::student_t(4.0));
  const auto a = sample(ref, 1000, 42);
  const auto b = sample(ref, 1000, 42);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
}

TEST(Sample, StudentTSymmetry) {
  const auto draws = sample(EllipticalRef(v2(0, 0), Matrix::Identity(2, 2), GeneratorFamily::student_t(5.0)), 100000, 9);
  long below = 0;
  for (const auto& d : draws) below += d[0] <= 0.0;
  EXPECT_NEAR(static_cast<double>(below) / draws.size(), 0.5, 0.01);
}

TEST(Sample, MarginalTailsMatchScatterSemantics) {
  // P(x_1 > mean + scale·q) = sf(q) under scatter semantics, per family.
  Matrix s(2, 2);
  s << 2.0, 0.6, 0.6, 1.0;
  for (const auto& f : families()) {
    const EllipticalRef ref(v2(0.5, 0), s, f.lib);
    const auto draws = sample(ref, 200000, 77);
    const double scale = std::sqrt(2.0);
    for (double q : {0.5, 1.0, 2.0}) {
      long hits = 0;
      for (const auto& d : draws) hits += d[0] > 0.5 + scale * q;
      const double p = f.ref.sf(q);
      const double se = std::sqrt(p * (1 - p) / draws.size());
      EXPECT_NEAR(static_cast<double>(hits) / draws.size(), p, 5 * se) << f.lib.name() << " q=" << q;
    }
  }
}
