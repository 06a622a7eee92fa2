#pragma once

// Reduction of the Wasserstein distributionally robust corridor constraints
// to deterministic, tightened box bounds.
//
// For a side with reference marginal (location, scale, F), radius θ and risk
// ε, the robust constraint is equivalent to a single chance constraint under
// the reference at the stricter level ε̲ = 1 − F(η*), where η* is the smallest
// η ≥ a = F⁻¹(1 − ε) with
//
//     η·(F(η) − (1 − ε)) − ∫_a^η x f(x) dx ≥ θ.
//
// The bound then moves inward by scale · F⁻¹(1 − ε̲) = scale · η*.

#include "drscc/common.hpp"
#include "drscc/corridor.hpp"
#include "drscc/elliptical.hpp"

#include <string>
#include <utility>
#include <vector>

namespace drscc {

inline constexpr double kEtaBracketLimit = 1e6;
inline constexpr double kEtaTolerance = 1e-10;

inline void check_risk_and_radius(double risk, double radius) {
  if (!(risk > 0.0 && risk < 0.5)) {
    throw InvalidArgument("risk threshold " + std::to_string(risk) + " outside (0, 0.5)");
  }
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw InvalidArgument("Wasserstein radius " + std::to_string(radius) + " must be finite and >= 0");
  }
}

/// ψ(η) = η·(F(η) − (1 − ε)) − κ(a, η) − θ; nondecreasing for η ≥ a with
/// slope F(η) − (1 − ε).
inline double eta_residual(const elliptical::GeneratorFamily& family, double risk, double radius, double eta) {
  const double a = elliptical::std_upper_quantile(family, risk);
  return eta * (risk - elliptical::std_sf(family, eta)) - elliptical::kappa(family, a, eta) - radius;
}

inline double solve_eta_star(const elliptical::GeneratorFamily& family, double risk, double radius) {
  check_risk_and_radius(risk, radius);
  const double a = elliptical::std_upper_quantile(family, risk);
  // The residual at a is exactly −θ, so a singleton ball returns a itself.
  if (radius == 0.0) return a;

  const auto psi = [&](double eta) {
    return eta * (risk - elliptical::std_sf(family, eta)) - elliptical::kappa(family, a, eta) - radius;
  };

  double lo = a;
  double hi = a + 1.0;
  while (psi(hi) <= 0.0) {
    lo = hi;
    hi = a + 2.0 * (hi - a);
    if (hi > kEtaBracketLimit) throw NumericalError("radius too large for family tails");
  }
  while (hi - lo >= kEtaTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (psi(mid) >= 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

/// ε̲ = 1 − F(η*), always in (0, ε].
inline double lower_risk(const elliptical::GeneratorFamily& family, double risk, double radius) {
  return elliptical::std_sf(family, solve_eta_star(family, risk, radius));
}

struct AmbiguitySide {
  elliptical::EllipticalRef reference;
  double radius;
  double risk;

  AmbiguitySide(elliptical::EllipticalRef ref, double theta, double epsilon)
      : reference(std::move(ref)), radius(theta), risk(epsilon) {
    check_risk_and_radius(risk, radius);
  }
};

struct RegionAmbiguity {
  AmbiguitySide lower;
  AmbiguitySide upper;
};

using AmbiguitySpec = std::vector<RegionAmbiguity>;

/// The same family, σ, θ and ε on every region and side, with reference means
/// at the nominal corners and scatter σ·I.
inline AmbiguitySpec uniform_ambiguity(const SafeCorridor& corridor, const elliptical::GeneratorFamily& family,
                                       double sigma, double radius, double risk) {
  AmbiguitySpec spec;
  spec.reserve(corridor.size());
  for (const auto& r : corridor.regions()) {
    spec.push_back({AmbiguitySide(elliptical::EllipticalRef::isotropic(r.lower, sigma, family), radius, risk),
                    AmbiguitySide(elliptical::EllipticalRef::isotropic(r.upper, sigma, family), radius, risk)});
  }
  return spec;
}

struct SideTightening {
  double eta_star;
  double lower_risk;
};

struct CrossedBound {
  std::size_t region;     // 1-based
  Eigen::Index dimension;  // 1-based
  double lower;
  double upper;
};

struct TightenedCorridor {
  std::vector<BoxRegion> regions;
  std::vector<SideTightening> lower_side;
  std::vector<SideTightening> upper_side;
  std::vector<CrossedBound> crossed;

  bool feasible() const { return crossed.empty(); }

  std::string report() const {
    std::string out;
    for (const auto& c : crossed) {
      out += "region " + std::to_string(c.region) + " infeasible in dimension " + std::to_string(c.dimension) +
             ": tightened lower " + std::to_string(c.lower) + " > upper " + std::to_string(c.upper) + "\n";
    }
    return out;
  }
};

class InfeasibleTightening : public std::runtime_error {
 public:
  explicit InfeasibleTightening(TightenedCorridor tightened)
      : std::runtime_error(tightened.report()), tightened_(std::move(tightened)) {}

  const TightenedCorridor& tightened() const { return tightened_; }

 private:
  TightenedCorridor tightened_;
};

namespace detail {

// Memo keyed by (family, ε, θ); tightening typically broadcasts one triple.
class LowerRiskCache {
 public:
  SideTightening get(const elliptical::GeneratorFamily& family, double risk, double radius) {
    for (const auto& e : entries_) {
      if (e.family == family && e.risk == risk && e.radius == radius) return e.value;
    }
    const double eta = solve_eta_star(family, risk, radius);
    const SideTightening value{eta, elliptical::std_sf(family, eta)};
    entries_.push_back({family, risk, radius, value});
    return value;
  }

 private:
  struct Entry {
    elliptical::GeneratorFamily family;
    double risk;
    double radius;
    SideTightening value;
  };
  std::vector<Entry> entries_;
};

}  // namespace detail

/// Deterministic bounds equivalent to the robust corridor constraints. Crossed
/// bounds are listed in `crossed` rather than thrown; planning code checks
/// `feasible()` before building a QP.
inline TightenedCorridor tighten(const SafeCorridor& corridor, const AmbiguitySpec& spec) {
  if (spec.size() != corridor.size()) {
    throw StructuralError("ambiguity spec has " + std::to_string(spec.size()) + " regions, corridor has " +
                          std::to_string(corridor.size()));
  }
  const auto m = corridor.dimension();
  TightenedCorridor out;
  detail::LowerRiskCache cache;
  for (std::size_t i = 0; i < corridor.size(); ++i) {
    const auto& lo = spec[i].lower;
    const auto& up = spec[i].upper;
    if (lo.reference.dimension() != m || up.reference.dimension() != m) {
      throw StructuralError("ambiguity reference dimension mismatch in region " + std::to_string(i + 1));
    }
    const auto tl = cache.get(lo.reference.family(), lo.risk, lo.radius);
    const auto tu = cache.get(up.reference.family(), up.risk, up.radius);

    BoxRegion box{Vector(m), Vector(m)};
    for (Eigen::Index d = 0; d < m; ++d) {
      const Vector e = Vector::Unit(m, d);
      const auto ml = elliptical::marginal(lo.reference, e);
      const auto mu = elliptical::marginal(up.reference, e);
      box.lower[d] = ml.location + ml.scale * tl.eta_star;
      box.upper[d] = mu.location - mu.scale * tu.eta_star;
      if (box.lower[d] > box.upper[d]) out.crossed.push_back({i + 1, d + 1, box.lower[d], box.upper[d]});
    }
    out.regions.push_back(std::move(box));
    out.lower_side.push_back(tl);
    out.upper_side.push_back(tu);
  }
  return out;
}

}  // namespace drscc
