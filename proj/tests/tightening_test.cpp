#include "drscc/tightening.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace drscc;
using elliptical::GeneratorFamily;

namespace {

Vector v2(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

struct Pair {
  GeneratorFamily lib;
  oracle::Dist ref;
};

std::vector<Pair> families() {
  return {{GeneratorFamily::normal(), {oracle::Family::Normal}},
          {GeneratorFamily::student_t(3.0), {oracle::Family::StudentT, 3.0}},
          {GeneratorFamily::logistic(), {oracle::Family::Logistic}}};
}

SafeCorridor one_box(double w = 12.0) { return SafeCorridor({{v2(0, 0), v2(w, w)}}); }

}  // namespace

TEST(EtaStar, SingletonBallGivesQuantile) {
  for (const auto& f : families()) {
    EXPECT_EQ(solve_eta_star(f.lib, 0.1, 0.0), elliptical::std_upper_quantile(f.lib, 0.1));
    EXPECT_NEAR(eta_residual(f.lib, 0.1, 0.0, solve_eta_star(f.lib, 0.1, 0.0)), 0.0, 1e-15);
  }
}

TEST(EtaStar, NormalGridOracle) {
  const double want = oracle::eta_star_grid({oracle::Family::Normal}, 0.1, 0.05);
  EXPECT_NEAR(solve_eta_star(GeneratorFamily::normal(), 0.1, 0.05), want, 1e-6);
}

TEST(EtaStar, LogisticGridOracle) {
  const double want = oracle::eta_star_grid({oracle::Family::Logistic}, 0.25, 0.1);
  EXPECT_NEAR(solve_eta_star(GeneratorFamily::logistic(), 0.25, 0.1), want, 1e-6);
}

TEST(EtaStar, RejectsBadArguments) {
  EXPECT_THROW(solve_eta_star(GeneratorFamily::normal(), 0.5, 0.1), InvalidArgument);
  EXPECT_THROW(solve_eta_star(GeneratorFamily::normal(), 0.0, 0.1), InvalidArgument);
  EXPECT_THROW(solve_eta_star(GeneratorFamily::normal(), 0.1, -0.1), InvalidArgument);
}

TEST(EtaStar, ResidualSlopeMatchesCdfGap) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& f : families()) {
    for (int i = 0; i < 100; ++i) {
      const double eps = 0.02 + 0.45 * u(rng);
      const double a = elliptical::std_upper_quantile(f.lib, eps);
      const double eta = a + 0.01 + 4.0 * u(rng);
      const double h = 1e-5;
      const double fd = (eta_residual(f.lib, eps, 0.1, eta + h) - eta_residual(f.lib, eps, 0.1, eta - h)) / (2 * h);
      const double slope = elliptical::std_cdf(f.lib, eta) - (1.0 - eps);
      EXPECT_NEAR(fd, slope, 1e-5);
      EXPECT_GE(slope, 0.0);
    }
  }
}

TEST(LowerRisk, SingletonBallExact) {
  for (const auto& f : families()) {
    for (double eps : {0.05, 0.1, 0.25, 0.4}) EXPECT_NEAR(lower_risk(f.lib, eps, 0.0), eps, 1e-12);
  }
}

TEST(LowerRisk, NormalMatchesGridOracle) {
  const oracle::Dist d{oracle::Family::Normal};
  const double want = d.sf(oracle::eta_star_grid(d, 0.25, 0.1));
  const double got = lower_risk(GeneratorFamily::normal(), 0.25, 0.1);
  EXPECT_LT(got, 0.25);
  EXPECT_NEAR(got, want, 1e-7);
}

TEST(LowerRisk, MonotoneInRadiusAndRisk) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& f : families()) {
    for (int i = 0; i < 50; ++i) {
      const double eps = 0.02 + 0.46 * u(rng);
      double t1 = 0.2 * u(rng), t2 = 0.2 * u(rng);
      if (t1 > t2) std::swap(t1, t2);
      const double l1 = lower_risk(f.lib, eps, t1);
      EXPECT_GE(l1 + 1e-12, lower_risk(f.lib, eps, t2));
      EXPECT_LE(l1, eps + 1e-12);
      const double eps2 = std::min(0.49, eps + 0.3 * u(rng));
      EXPECT_LE(l1, lower_risk(f.lib, eps2, t1) + 1e-12);
    }
  }
}

TEST(LowerRisk, LargeRadiusReportsFailure) {
  EXPECT_THROW(lower_risk(GeneratorFamily::normal(), 0.1, 1e9), NumericalError);
}

TEST(Tighten, NormalSigmaTwoShrink) {
  const auto corridor = one_box();
  const auto t = tighten(corridor, uniform_ambiguity(corridor, GeneratorFamily::normal(), 2.0, 0.05, 0.1));
  const oracle::Dist d{oracle::Family::Normal};
  const double shrink = std::sqrt(2.0) * d.upper_quantile(d.sf(oracle::eta_star_grid(d, 0.1, 0.05)));
  ASSERT_TRUE(t.feasible());
  for (int dim = 0; dim < 2; ++dim) {
    EXPECT_NEAR(t.regions[0].lower[dim], shrink, 1e-6);
    EXPECT_NEAR(t.regions[0].upper[dim], 12.0 - shrink, 1e-6);
  }
}

TEST(Tighten, VanishingAmbiguityRecoversCorners) {
  const auto corridor = one_box();
  const auto t = tighten(corridor, uniform_ambiguity(corridor, GeneratorFamily::normal(), 1e-12, 0.0, 0.4999));
  EXPECT_LT((t.regions[0].lower - corridor.region(0).lower).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((t.regions[0].upper - corridor.region(0).upper).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Tighten, CrossedBoundsReported) {
  // Width 0.1 box with about 0.5 shrink per side.
  const SafeCorridor corridor({{v2(0, 0), v2(0.1, 5)}});
  const double sigma = std::pow(0.5 / elliptical::std_upper_quantile(GeneratorFamily::normal(), 0.3), 2);
  const auto t = tighten(corridor, uniform_ambiguity(corridor, GeneratorFamily::normal(), sigma, 0.0, 0.3));
  ASSERT_FALSE(t.feasible());
  ASSERT_EQ(t.crossed.size(), 1u);
  EXPECT_EQ(t.crossed[0].region, 1u);
  EXPECT_EQ(t.crossed[0].dimension, 1);
  EXPECT_NE(t.report().find("region 1 infeasible in dimension 1"), std::string::npos);
}

TEST(Tighten, PerSideSpecsAndAnisotropicScatter) {
  const auto corridor = one_box();
  Matrix s(2, 2);
  s << 4.0, 1.0, 1.0, 9.0;
  AmbiguitySpec spec{{AmbiguitySide(elliptical::EllipticalRef(v2(0, 0), s, GeneratorFamily::logistic()), 0.0, 0.2),
                      AmbiguitySide(elliptical::EllipticalRef::isotropic(v2(12, 12), 1.0, GeneratorFamily::normal()),
                                    0.1, 0.1)}};
  const auto t = tighten(corridor, spec);
  const double ql = elliptical::std_upper_quantile(GeneratorFamily::logistic(), 0.2);
  EXPECT_NEAR(t.regions[0].lower[0], 2.0 * ql, 1e-12);
  EXPECT_NEAR(t.regions[0].lower[1], 3.0 * ql, 1e-12);
  const double eta = solve_eta_star(GeneratorFamily::normal(), 0.1, 0.1);
  EXPECT_NEAR(t.regions[0].upper[0], 12.0 - eta, 1e-12);
  EXPECT_EQ(t.lower_side[0].lower_risk, elliptical::std_sf(GeneratorFamily::logistic(), ql));
}

TEST(Tighten, StructuralMismatch) {
  const auto corridor = one_box();
  EXPECT_THROW(tighten(corridor, {}), StructuralError);
}

TEST(Ambiguity, ParameterChecks) {
  const auto ref = elliptical::EllipticalRef::isotropic(v2(0, 0), 1.0, GeneratorFamily::normal());
  EXPECT_THROW(AmbiguitySide(ref, 0.1, 0.5), InvalidArgument);
  EXPECT_THROW(AmbiguitySide(ref, -0.1, 0.1), InvalidArgument);
}

TEST(ChanceConstraint, CoverageAtSingletonBall) {
  const auto corridor = one_box();
  for (const auto& f : families()) {
    for (double eps : {0.1, 0.25}) {
      const auto t = tighten(corridor, uniform_ambiguity(corridor, f.lib, 1.0, 0.0, eps));
      const double c = t.regions[0].lower[0];
      const auto ref = elliptical::EllipticalRef::isotropic(corridor.region(0).lower, 1.0, f.lib);
      const auto draws = elliptical::sample(ref, 200000, 1234);
      long covered = 0;
      for (const auto& x : draws) covered += x[0] <= c;
      EXPECT_NEAR(static_cast<double>(covered) / draws.size(), 1.0 - eps, 0.004) << f.lib.name();
    }
  }
}

TEST(ChanceConstraint, PositiveRadiusIsConservative) {
  const auto corridor = one_box();
  for (const auto& f : families()) {
    const auto t = tighten(corridor, uniform_ambiguity(corridor, f.lib, 2.0, 0.05, 0.1));
    const auto ref = elliptical::EllipticalRef::isotropic(corridor.region(0).lower, 2.0, f.lib);
    const auto draws = elliptical::sample(ref, 200000, 99);
    long covered = 0;
    for (const auto& x : draws) covered += x[1] <= t.regions[0].lower[1];
    EXPECT_GE(static_cast<double>(covered) / draws.size(), 0.9) << f.lib.name();
  }
}
