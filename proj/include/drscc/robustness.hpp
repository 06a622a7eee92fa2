#pragma once

// Perturbation benchmark: plan once per (case, method) on the nominal
// corridor, then count how many randomly perturbed corridors each fixed
// trajectory leaves.
//
// Each perturbed corner is ψ = (1 − α)·ψ1 + α·ψ2 with ψ1 drawn from the
// corner's reference distribution and ψ2 uniform on corner ± halfwidth.

#include "drscc/bezier.hpp"
#include "drscc/corridor.hpp"
#include "drscc/elliptical.hpp"
#include "drscc/planner.hpp"
#include "drscc/tightening.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace drscc::robustness {

struct PerturbationSpec {
  std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
  int instances_per_alpha = 2000;
  // Half-width of the uniform component per dimension; a single entry is
  // broadcast to every dimension.
  std::vector<double> uniform_halfwidth{1.0};
  std::uint64_t seed = 20240501;
  int max_resamples = 1000;

  std::size_t total_instances() const { return alphas.size() * static_cast<std::size_t>(instances_per_alpha); }

  double halfwidth(Eigen::Index d) const {
    if (uniform_halfwidth.size() == 1) return uniform_halfwidth.front();
    return uniform_halfwidth.at(static_cast<std::size_t>(d));
  }

  void check(Eigen::Index dimension) const {
    if (alphas.empty()) throw InvalidArgument("perturbation needs at least one alpha value");
    for (double a : alphas) {
      if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("alpha values must lie in [0, 1]");
    }
    if (instances_per_alpha < 1) throw InvalidArgument("instances_per_alpha must be >= 1");
    if (uniform_halfwidth.size() != 1 && static_cast<Eigen::Index>(uniform_halfwidth.size()) != dimension) {
      throw StructuralError("uniform_halfwidth must have 1 or m entries");
    }
    for (double h : uniform_halfwidth) {
      if (!(h >= 0.0)) throw InvalidArgument("uniform_halfwidth must be non-negative");
    }
  }
};

struct CornerReferences {
  elliptical::EllipticalRef lower;
  elliptical::EllipticalRef upper;
};

/// References centred on the nominal corners with scatter σ·I.
inline std::vector<CornerReferences> corner_references(const SafeCorridor& corridor,
                                                       const elliptical::GeneratorFamily& family, double sigma) {
  std::vector<CornerReferences> refs;
  for (const auto& r : corridor.regions()) {
    refs.push_back({elliptical::EllipticalRef::isotropic(r.lower, sigma, family),
                    elliptical::EllipticalRef::isotropic(r.upper, sigma, family)});
  }
  return refs;
}

struct PerturbedInstance {
  SafeCorridor corridor;
  double alpha;
  int resamples;  // draws rejected for crossed bounds
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 instance_engine(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Instance `index` of the perturbation stream; reproducible from
/// (spec.seed, index) alone. Instances are grouped by alpha:
/// alpha = alphas[index / instances_per_alpha].
inline PerturbedInstance perturb(const SafeCorridor& corridor, const std::vector<CornerReferences>& refs,
                                 const PerturbationSpec& spec, std::size_t index) {
  const auto m = corridor.dimension();
  spec.check(m);
  if (refs.size() != corridor.size()) throw StructuralError("need one corner reference pair per region");
  if (index >= spec.total_instances()) throw InvalidArgument("instance index out of range");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!refs[i].lower.mean().isApprox(corridor.region(i).lower, 1e-12) ||
        !refs[i].upper.mean().isApprox(corridor.region(i).upper, 1e-12)) {
      throw InvalidArgument("corner reference means must coincide with the nominal corners (region " +
                            std::to_string(i + 1) + ")");
    }
  }

  const double alpha = spec.alphas[index / static_cast<std::size_t>(spec.instances_per_alpha)];
  auto engine = detail::instance_engine(spec.seed, index);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const auto corner = [&](const elliptical::EllipticalRef& ref) {
    const Vector psi1 = elliptical::draw(ref, engine);
    Vector psi2(m);
    for (Eigen::Index d = 0; d < m; ++d) psi2[d] = ref.mean()[d] + spec.halfwidth(d) * unit(engine);
    return Vector((1.0 - alpha) * psi1 + alpha * psi2);
  };

  for (int attempt = 0; attempt <= spec.max_resamples; ++attempt) {
    std::vector<BoxRegion> regions;
    regions.reserve(refs.size());
    bool degenerate = false;
    for (const auto& r : refs) {
      BoxRegion box{corner(r.lower), corner(r.upper)};
      degenerate = degenerate || (box.lower.array() >= box.upper.array()).any();
      regions.push_back(std::move(box));
    }
    if (!degenerate) return {SafeCorridor(std::move(regions)), alpha, attempt};
  }
  throw NumericalError("perturbation kept producing crossed bounds; reduce the noise scale");
}

enum class ViolationMode { SampledCurve, ControlPoints };

inline const char* to_string(ViolationMode mode) {
  return mode == ViolationMode::SampledCurve ? "sampled_curve" : "control_points";
}

inline constexpr double kViolationTolerance = 1e-9;

/// Pre-sampled trajectory points per segment, reused across instances.
class TrajectoryProbe {
 public:
  TrajectoryProbe(const bezier::PiecewiseBezier& trajectory, int resolution, ViolationMode mode) {
    if (resolution < 2) throw InvalidArgument("violation resolution must be >= 2");
    for (const auto& seg : trajectory.segments()) {
      if (mode == ViolationMode::ControlPoints) {
        points_.push_back(seg.control_points().transpose());
        continue;
      }
      Matrix pts(seg.dimension(), resolution);
      for (int r = 0; r < resolution; ++r) pts.col(r) = bezier::evaluate(seg, static_cast<double>(r) / (resolution - 1));
      points_.push_back(std::move(pts));
    }
  }

  /// True when some point of segment i exits region i by more than 1e-9.
  bool violates(const SafeCorridor& corridor) const {
    if (corridor.size() != points_.size()) throw StructuralError("trajectory segment count must equal region count");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& box = corridor.region(i);
      const auto& pts = points_[i];
      for (Eigen::Index c = 0; c < pts.cols(); ++c) {
        for (Eigen::Index d = 0; d < pts.rows(); ++d) {
          if (pts(d, c) < box.lower[d] - kViolationTolerance || pts(d, c) > box.upper[d] + kViolationTolerance) {
            return true;
          }
        }
      }
    }
    return false;
  }

 private:
  std::vector<Matrix> points_;  // m × samples, one per segment
};

inline bool count_violations(const bezier::PiecewiseBezier& trajectory, const SafeCorridor& perturbed,
                             int resolution = 100, ViolationMode mode = ViolationMode::SampledCurve) {
  if (trajectory.size() != perturbed.size()) throw StructuralError("trajectory segment count must equal region count");
  return TrajectoryProbe(trajectory, resolution, mode).violates(perturbed);
}

struct FamilySetting {
  elliptical::GeneratorFamily family = elliptical::GeneratorFamily::normal();
  double sigma = 1.0;

  std::string label() const {
    if (family.kind() != elliptical::FamilyKind::StudentT) return family.name();
    std::ostringstream os;
    os << "student_t(" << family.dof() << ")";
    return os.str();
  }
};

struct MethodSetting {
  PlanMode mode = PlanMode::Nominal;
  double radius = 0.0;
  double risk = 0.0;

  std::string label() const {
    if (mode == PlanMode::Nominal) return "nominal";
    std::ostringstream os;
    os << "drscc(theta=" << radius << ",eps=" << risk << ")";
    return os.str();
  }
};

/// Nominal plus DRSCC over the radius × risk grid.
inline std::vector<MethodSetting> method_grid(const std::vector<double>& radii, const std::vector<double>& risks) {
  std::vector<MethodSetting> out{{PlanMode::Nominal, 0.0, 0.0}};
  for (double theta : radii) {
    for (double eps : risks) out.push_back({PlanMode::Drscc, theta, eps});
  }
  return out;
}

inline std::vector<FamilySetting> default_families() {
  return {{elliptical::GeneratorFamily::normal(), 2.0},
          {elliptical::GeneratorFamily::student_t(3.0), 1.0},
          {elliptical::GeneratorFamily::logistic(), 1.0}};
}

struct BenchmarkCase {
  std::string name;
  SafeCorridor corridor;
  InitialPath path;
  SnapSpec spec;
};

struct BenchmarkOptions {
  PerturbationSpec perturbation;
  std::vector<FamilySetting> families = default_families();
  std::vector<MethodSetting> methods = method_grid({0.05, 0.1}, {0.1, 0.15, 0.25});
  int resolution = 100;
  ViolationMode violation_mode = ViolationMode::SampledCurve;
  unsigned threads = 1;
  bool keep_instances = false;
  qp::SolverSettings solver;
};

struct CellResult {
  std::string case_name;
  FamilySetting family;
  MethodSetting method;
  std::string status;  // "optimal", or the reason the cell is N/A
  bool available = false;
  double objective = 0.0;
  double objective_ratio = 0.0;
  long violations = 0;
  long instances = 0;
  std::vector<long> violations_by_alpha;
  long resamples = 0;
  double plan_seconds = 0.0;
  double eval_seconds = 0.0;

  double violation_rate() const { return instances > 0 ? static_cast<double>(violations) / instances : 0.0; }
};

struct InstanceRecord {
  std::string case_name;
  std::string family;
  std::size_t index;
  double alpha;
  int resamples;
  std::vector<bool> violated;  // one per method, in options order
};

struct BenchmarkReport {
  BenchmarkOptions options;
  std::vector<CellResult> cells;
  std::vector<InstanceRecord> instances;

  const CellResult* find(const std::string& case_name, std::size_t family, std::size_t method) const {
    for (const auto& c : cells) {
      if (c.case_name == case_name && c.family.label() == options.families.at(family).label() &&
          c.method.label() == options.methods.at(method).label()) {
        return &c;
      }
    }
    return nullptr;
  }
};

namespace detail {

struct Tally {
  std::vector<std::vector<long>> by_method_alpha;  // [method][alpha]
  long resamples = 0;
};

}  // namespace detail

inline BenchmarkReport run_benchmark(const std::vector<BenchmarkCase>& cases, const BenchmarkOptions& options) {
  using clock = std::chrono::steady_clock;
  BenchmarkReport report;
  report.options = options;
  const auto& pspec = options.perturbation;
  const std::size_t n_alpha = pspec.alphas.size();
  const std::size_t n_methods = options.methods.size();
  const unsigned threads = std::max(1u, options.threads);

  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const auto& bc = cases[ci];
    pspec.check(bc.corridor.dimension());

    // The nominal plan does not depend on the family; solve it once.
    std::optional<PlanResult> nominal;
    double nominal_seconds = 0.0;
    std::string nominal_status;
    {
      const auto t0 = clock::now();
      try {
        nominal = plan(bc.corridor, bc.path, bc.spec, PlanMode::Nominal, nullptr, options.solver);
        nominal_status = nominal->optimal() ? "optimal" : qp::to_string(nominal->solution.status);
      } catch (const std::exception& e) {
        nominal_status = std::string("error: ") + e.what();
      }
      nominal_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    }
    const double nominal_objective = nominal && nominal->optimal() ? nominal->objective() : 0.0;

    for (std::size_t fi = 0; fi < options.families.size(); ++fi) {
      const auto& fam = options.families[fi];
      const auto refs = corner_references(bc.corridor, fam.family, fam.sigma);

      std::vector<CellResult> cells(n_methods);
      std::vector<std::optional<TrajectoryProbe>> probes(n_methods);
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        auto& cell = cells[mi];
        cell.case_name = bc.name;
        cell.family = fam;
        cell.method = options.methods[mi];
        cell.violations_by_alpha.assign(n_alpha, 0);

        const PlanResult* result = nullptr;
        std::optional<PlanResult> local;
        if (cell.method.mode == PlanMode::Nominal) {
          cell.plan_seconds = nominal_seconds;
          cell.status = nominal_status;
          if (nominal) result = &*nominal;
        } else {
          const auto t0 = clock::now();
          try {
            const auto amb = uniform_ambiguity(bc.corridor, fam.family, fam.sigma, cell.method.radius, cell.method.risk);
            local = plan(bc.corridor, bc.path, bc.spec, PlanMode::Drscc, &amb, options.solver);
            cell.status = local->optimal() ? "optimal" : qp::to_string(local->solution.status);
            result = &*local;
          } catch (const InfeasibleTightening&) {
            cell.status = "infeasible_tightening";
          } catch (const std::exception& e) {
            cell.status = std::string("error: ") + e.what();
          }
          cell.plan_seconds = std::chrono::duration<double>(clock::now() - t0).count();
        }
        if (result != nullptr && result->optimal()) {
          cell.available = true;
          cell.objective = result->objective();
          cell.objective_ratio = nominal_objective > 0.0 ? cell.objective / nominal_objective : 0.0;
          probes[mi].emplace(*result->trajectory, options.resolution, options.violation_mode);
        }
      }

      // Independent perturbation stream per (case, family), shared by all
      // methods so they face identical corridors.
      PerturbationSpec stream = pspec;
      stream.seed = detail::splitmix64(pspec.seed ^ detail::splitmix64((ci + 1) * 0x100000001ULL + fi));
      const std::size_t total = stream.total_instances();

      std::vector<InstanceRecord> records;
      if (options.keep_instances) records.resize(total);

      const auto t0 = clock::now();
      std::vector<detail::Tally> tallies(threads);
      const auto work = [&](unsigned w) {
        auto& tally = tallies[w];
        tally.by_method_alpha.assign(n_methods, std::vector<long>(n_alpha, 0));
        const std::size_t begin = total * w / threads;
        const std::size_t end = total * (w + 1) / threads;
        for (std::size_t idx = begin; idx < end; ++idx) {
          const auto inst = perturb(bc.corridor, refs, stream, idx);
          const std::size_t ai = idx / static_cast<std::size_t>(stream.instances_per_alpha);
          tally.resamples += inst.resamples;
          std::vector<bool> flags(n_methods, false);
          for (std::size_t mi = 0; mi < n_methods; ++mi) {
            if (probes[mi] && probes[mi]->violates(inst.corridor)) {
              ++tally.by_method_alpha[mi][ai];
              flags[mi] = true;
            }
          }
          if (options.keep_instances) {
            records[idx] = {bc.name, fam.label(), idx, inst.alpha, inst.resamples, std::move(flags)};
          }
        }
      };
      if (threads == 1) {
        work(0);
      } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
      }
      const double eval_seconds = std::chrono::duration<double>(clock::now() - t0).count();

      long resamples = 0;
      for (const auto& t : tallies) resamples += t.resamples;
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        auto& cell = cells[mi];
        cell.resamples = resamples;
        cell.eval_seconds = eval_seconds;
        if (!cell.available) continue;
        cell.instances = static_cast<long>(total);
        for (const auto& t : tallies) {
          for (std::size_t ai = 0; ai < n_alpha; ++ai) cell.violations_by_alpha[ai] += t.by_method_alpha[mi][ai];
        }
        for (long v : cell.violations_by_alpha) cell.violations += v;
      }
      for (auto& c : cells) report.cells.push_back(std::move(c));
      for (auto& r : records) report.instances.push_back(std::move(r));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report output

inline constexpr const char* kReportSchema = "# drscc-benchmark-csv v1";

inline std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

/// One row per (case, family, method). Wall times are excluded so the file
/// is reproducible bit for bit for a fixed seed.
inline void write_csv(const BenchmarkReport& report, std::ostream& os) {
  const auto& o = report.options;
  os << kReportSchema << '\n';
  os << "# seed=" << o.perturbation.seed << " instances_per_alpha=" << o.perturbation.instances_per_alpha
     << " violation_mode=" << to_string(o.violation_mode) << " resolution=" << o.resolution << " uniform_halfwidth=";
  for (std::size_t i = 0; i < o.perturbation.uniform_halfwidth.size(); ++i) {
    os << (i ? ";" : "") << format_number(o.perturbation.uniform_halfwidth[i]);
  }
  os << '\n';
  os << "case,family,sigma,method,radius,risk,status,objective,objective_ratio,violations,instances,"
        "violation_rate,resamples,violations_by_alpha\n";
  for (const auto& c : report.cells) {
    os << c.case_name << ',' << c.family.label() << ',' << format_number(c.family.sigma) << ',' << c.method.label()
       << ',' << format_number(c.method.radius) << ',' << format_number(c.method.risk) << ',' << c.status << ',';
    if (c.available) {
      os << format_number(c.objective) << ',' << format_number(c.objective_ratio) << ',' << c.violations << ','
         << c.instances << ',' << format_number(c.violation_rate()) << ',';
    } else {
      os << "NA,NA,NA,NA,NA,";
    }
    os << c.resamples << ',';
    for (std::size_t ai = 0; ai < c.violations_by_alpha.size(); ++ai) {
      os << (ai ? ";" : "") << format_number(o.perturbation.alphas[ai]) << ':' << c.violations_by_alpha[ai];
    }
    os << '\n';
  }
}

inline void write_timings_csv(const BenchmarkReport& report, std::ostream& os) {
  os << "# drscc-benchmark-timings-csv v1\n";
  os << "case,family,method,plan_seconds,eval_seconds\n";
  for (const auto& c : report.cells) {
    os << c.case_name << ',' << c.family.label() << ',' << c.method.label() << ',' << c.plan_seconds << ','
       << c.eval_seconds << '\n';
  }
}

inline void write_instances_csv(const BenchmarkReport& report, std::ostream& os) {
  os << "# drscc-benchmark-instances-csv v1\n";
  os << "case,family,instance,alpha,resamples";
  for (const auto& m : report.options.methods) os << ",\"" << m.label() << '"';
  os << '\n';
  for (const auto& r : report.instances) {
    os << r.case_name << ',' << r.family << ',' << r.index << ',' << format_number(r.alpha) << ',' << r.resamples;
    for (bool v : r.violated) os << ',' << (v ? 1 : 0);
    os << '\n';
  }
}

/// Aligned text layout: per (case, family) block, a row of objective ratios
/// and a row of violation counts across the method columns.
inline void write_table(const BenchmarkReport& report, std::ostream& os) {
  const auto& o = report.options;
  constexpr int label_width = 22;
  int col_width = 12;
  for (const auto& m : o.methods) col_width = std::max(col_width, static_cast<int>(m.label().size()) + 2);
  std::vector<std::string> case_names;
  for (const auto& c : report.cells) {
    if (std::find(case_names.begin(), case_names.end(), c.case_name) == case_names.end()) case_names.push_back(c.case_name);
  }
  os << "violation mode: " << to_string(o.violation_mode) << ", instances per cell: " << o.perturbation.total_instances()
     << ", seed: " << o.perturbation.seed << '\n';
  for (const auto& name : case_names) {
    for (std::size_t fi = 0; fi < o.families.size(); ++fi) {
      os << '\n' << name << " / " << o.families[fi].label() << " (sigma=" << format_number(o.families[fi].sigma) << ")\n";
      os << std::left << std::setw(label_width) << "";
      for (const auto& m : o.methods) os << std::setw(col_width) << m.label();
      os << '\n' << std::setw(label_width) << "objective ratio";
      for (std::size_t mi = 0; mi < o.methods.size(); ++mi) {
        const auto* c = report.find(name, fi, mi);
        std::ostringstream cell;
        if (c && c->available) {
          cell << std::fixed << std::setprecision(3) << c->objective_ratio;
        } else {
          cell << "N/A";
        }
        os << std::setw(col_width) << cell.str();
      }
      os << '\n' << std::setw(label_width) << "objective (raw)";
      for (std::size_t mi = 0; mi < o.methods.size(); ++mi) {
        const auto* c = report.find(name, fi, mi);
        os << std::setw(col_width) << (c && c->available ? format_number(c->objective) : "N/A");
      }
      os << '\n' << std::setw(label_width) << "violations";
      for (std::size_t mi = 0; mi < o.methods.size(); ++mi) {
        const auto* c = report.find(name, fi, mi);
        os << std::setw(col_width) << (c && c->available ? std::to_string(c->violations) : "N/A");
      }
      os << std::right << '\n';
    }
  }
}

}  // namespace drscc::robustness
