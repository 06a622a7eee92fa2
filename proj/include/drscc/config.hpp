#pragma once

// YAML run configuration for the command-line tool. The grammar is
// documented in README.md; every numeric field is range-checked here so a
// bad value is reported with its dotted path before any work starts.

#include "drscc/corridor.hpp"
#include "drscc/elliptical.hpp"
#include "drscc/qp_solver.hpp"
#include "drscc/robustness.hpp"
#include "drscc/tightening.hpp"
#include "drscc/trajectory_qp.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace drscc::config {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message, const char* separator = ": ")
      : std::runtime_error(field.empty() ? message : field + separator + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct FamilyConfig {
  elliptical::GeneratorFamily family = elliptical::GeneratorFamily::normal();
  double sigma = 1.0;
  std::optional<Matrix> scatter;  // overrides sigma·I when present

  Matrix scatter_matrix(Eigen::Index m) const {
    return scatter ? *scatter : Matrix(sigma * Matrix::Identity(m, m));
  }
};

struct SideOverride {
  std::size_t region;  // 1-based
  bool lower = true;
  bool upper = true;
  std::optional<FamilyConfig> family;
  std::optional<double> radius;
  std::optional<double> risk;
};

struct AmbiguityConfig {
  FamilyConfig family;
  double radius = 0.05;
  double risk = 0.1;
  std::vector<SideOverride> overrides;

  /// One reference per corner, centred on the nominal corner.
  AmbiguitySpec build(const SafeCorridor& corridor) const {
    const auto m = corridor.dimension();
    AmbiguitySpec spec;
    for (std::size_t i = 0; i < corridor.size(); ++i) {
      const auto& r = corridor.region(i);
      const auto side = [&](const Vector& corner, bool is_lower) {
        FamilyConfig fam = family;
        double theta = radius, eps = risk;
        for (const auto& o : overrides) {
          if (o.region != i + 1 || (is_lower ? !o.lower : !o.upper)) continue;
          if (o.family) fam = *o.family;
          if (o.radius) theta = *o.radius;
          if (o.risk) eps = *o.risk;
        }
        return AmbiguitySide(elliptical::EllipticalRef(corner, fam.scatter_matrix(m), fam.family), theta, eps);
      };
      spec.push_back({side(r.lower, true), side(r.upper, false)});
    }
    return spec;
  }
};

struct BenchmarkConfig {
  robustness::BenchmarkOptions options;
  std::vector<double> radii{0.05, 0.1};
  std::vector<double> risks{0.1, 0.15, 0.25};
};

struct OutputConfig {
  std::string dir;  // empty: DRSCC_OUT_DIR, then "out"
  int resolution = 50;
  bool svg = true;
};

struct RunConfig {
  std::string name = "case";
  SafeCorridor corridor;
  InitialPath path;
  SnapSpec spec;
  std::optional<AmbiguityConfig> ambiguity;
  BenchmarkConfig benchmark;
  OutputConfig output;
  qp::SolverSettings solver;
};

namespace detail {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline std::string join(const std::string& path, std::size_t index) { return path + "[" + std::to_string(index) + "]"; }

template <class T>
T scalar(const YAML::Node& node, const std::string& path) {
  if (!node || !node.IsScalar()) throw ConfigError(path, "expected a scalar value");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, "cannot parse '" + node.Scalar() + "'");
  }
}

template <class T>
T scalar_or(const YAML::Node& parent, const std::string& key, const std::string& path, T fallback) {
  const auto node = parent[key];
  if (!node) return fallback;
  return scalar<T>(node, join(path, key));
}

inline YAML::Node require(const YAML::Node& parent, const std::string& key, const std::string& path) {
  const auto node = parent[key];
  if (!node) throw ConfigError(join(path, key), "missing required field");
  return node;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

/// Open/closed interval check with a uniform message.
inline double check_range(double v, const std::string& path, double lo, double hi, bool lo_open, bool hi_open) {
  const bool ok = (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi) && !std::isnan(v);
  if (!ok) {
    std::string interval = std::string(lo_open ? "(" : "[") + fmt(lo) + ", " +
                           (std::isinf(hi) ? std::string("inf") : fmt(hi)) + (hi_open ? ")" : "]");
    throw ConfigError(path, fmt(v) + " outside valid interval " + interval, " = ");
  }
  return v;
}

inline double positive(double v, const std::string& path) {
  return check_range(v, path, 0.0, std::numeric_limits<double>::infinity(), true, true);
}

inline std::vector<double> numbers(const YAML::Node& node, const std::string& path) {
  if (!node || !node.IsSequence()) throw ConfigError(path, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(scalar<double>(node[i], join(path, i)));
  return out;
}

inline Vector vector(const YAML::Node& node, const std::string& path) {
  const auto v = numbers(node, path);
  if (v.empty()) throw ConfigError(path, "expected a non-empty list");
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix matrix(const YAML::Node& node, const std::string& path) {
  if (!node || !node.IsSequence() || node.size() == 0) throw ConfigError(path, "expected a list of rows");
  Matrix out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const Vector row = vector(node[i], join(path, i));
    if (i == 0) out.resize(static_cast<Eigen::Index>(node.size()), row.size());
    if (row.size() != out.cols()) throw ConfigError(join(path, i), "rows differ in length");
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

inline FamilyConfig family(const YAML::Node& node, const std::string& path, Eigen::Index m) {
  FamilyConfig out;
  const auto name = scalar_or<std::string>(node, "family", path, "normal");
  if (name == "normal") {
    out.family = elliptical::GeneratorFamily::normal();
  } else if (name == "logistic") {
    out.family = elliptical::GeneratorFamily::logistic();
  } else if (name == "student_t") {
    const double dof = scalar_or<double>(node, "dof", path, 3.0);
    check_range(dof, join(path, "dof"), 2.0, std::numeric_limits<double>::infinity(), true, true);
    out.family = elliptical::GeneratorFamily::student_t(dof);
  } else {
    throw ConfigError(join(path, "family"), "unknown family '" + name + "' (normal, student_t, logistic)");
  }
  if (node["scatter"]) {
    if (node["sigma"]) throw ConfigError(path, "give either sigma or scatter, not both");
    const auto spath = join(path, "scatter");
    Matrix s = matrix(node["scatter"], spath);
    if (s.rows() != m || s.cols() != m) {
      throw ConfigError(spath, "must be " + std::to_string(m) + "x" + std::to_string(m));
    }
    try {
      elliptical::EllipticalRef(Vector::Zero(m), s, out.family);
    } catch (const std::exception& e) {
      throw ConfigError(spath, e.what());
    }
    out.scatter = std::move(s);
  } else {
    out.sigma = positive(scalar_or<double>(node, "sigma", path, 1.0), join(path, "sigma"));
  }
  return out;
}

inline double risk(double v, const std::string& path) { return check_range(v, path, 0.0, 0.5, true, true); }

inline double radius(double v, const std::string& path) {
  return check_range(v, path, 0.0, std::numeric_limits<double>::infinity(), false, true);
}

inline SafeCorridor corridor(const YAML::Node& root) {
  const auto node = require(root, "corridor", "");
  const auto regions = require(node, "regions", "corridor");
  if (!regions.IsSequence() || regions.size() == 0) throw ConfigError("corridor.regions", "expected a non-empty list");
  std::vector<BoxRegion> boxes;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto p = join("corridor.regions", i);
    Vector lo = vector(require(regions[i], "lower", p), join(p, "lower"));
    Vector up = vector(require(regions[i], "upper", p), join(p, "upper"));
    if (lo.size() != up.size()) throw ConfigError(p, "lower and upper differ in dimension");
    boxes.push_back({std::move(lo), std::move(up)});
  }
  try {
    return SafeCorridor(std::move(boxes));
  } catch (const std::exception& e) {
    throw ConfigError("corridor.regions", e.what());
  }
}

inline InitialPath path(const YAML::Node& root) {
  const auto node = require(root, "path", "");
  const auto wp = require(node, "waypoints", "path");
  if (!wp.IsSequence()) throw ConfigError("path.waypoints", "expected a list of points");
  std::vector<Vector> points;
  for (std::size_t i = 0; i < wp.size(); ++i) points.push_back(vector(wp[i], join("path.waypoints", i)));
  if (points.size() < 2) throw ConfigError("path.waypoints", "need at least two waypoints");

  std::vector<double> times;
  if (node["times"]) {
    times = numbers(node["times"], "path.times");
  } else {
    const double v_max = positive(scalar<double>(require(node, "v_max", "path"), "path.v_max"), "path.v_max");
    TimeAllocation alloc;
    alloc.min_duration = check_range(scalar_or<double>(node, "tau_min", "path", 0.1), "path.tau_min", 0.0,
                                     std::numeric_limits<double>::infinity(), false, true);
    alloc.start_time = scalar_or<double>(node, "start_time", "path", 0.0);
    const auto mode = scalar_or<std::string>(node, "allocation", "path", "proportional");
    if (mode == "proportional") {
      alloc.mode = TimeAllocationMode::Proportional;
    } else if (mode == "uniform") {
      alloc.mode = TimeAllocationMode::Uniform;
    } else {
      throw ConfigError("path.allocation", "unknown mode '" + mode + "' (proportional, uniform)");
    }
    try {
      times = allocate_times(points, v_max, alloc);
    } catch (const std::exception& e) {
      throw ConfigError("path", e.what());
    }
  }
  try {
    return InitialPath(std::move(points), std::move(times));
  } catch (const std::exception& e) {
    throw ConfigError("path", e.what());
  }
}

inline SnapSpec spec(const YAML::Node& root, Eigen::Index m) {
  SnapSpec out;
  const auto node = root["spec"];
  if (!node) return out;
  out.degree = scalar_or<int>(node, "degree", "spec", out.degree);
  out.objective_order = scalar_or<int>(node, "objective_order", "spec", out.objective_order);
  out.continuity_order = scalar_or<int>(node, "continuity_order", "spec", out.continuity_order);
  if (out.objective_order < 1) throw ConfigError("spec.objective_order", "must be >= 1");
  if (out.degree > bezier::kMaxDegree) throw ConfigError("spec.degree", "must be <= 30");
  if (out.degree < 2 * out.objective_order - 1) {
    throw ConfigError("spec.degree", std::to_string(out.degree) + " must be >= 2k-1 = " +
                                         std::to_string(2 * out.objective_order - 1));
  }
  for (const char* key : {"start_derivatives", "end_derivatives"}) {
    if (!node[key]) continue;
    const auto p = join("spec", key);
    auto& target = std::string(key) == "start_derivatives" ? out.start_derivatives : out.end_derivatives;
    for (std::size_t g = 0; g < node[key].size(); ++g) {
      Vector v = vector(node[key][g], join(p, g));
      if (v.size() != m) throw ConfigError(join(p, g), "expected " + std::to_string(m) + " entries");
      target.push_back(std::move(v));
    }
  }
  if (node["derivative_limits"]) {
    const auto lim = node["derivative_limits"];
    for (std::size_t g = 0; g < lim.size(); ++g) {
      const auto p = join("spec.derivative_limits", g);
      const double lo = scalar<double>(require(lim[g], "min", p), join(p, "min"));
      const double hi = scalar<double>(require(lim[g], "max", p), join(p, "max"));
      if (!(lo < hi)) throw ConfigError(p, "needs min < max");
      out.derivative_limits.push_back({lo, hi});
    }
  }
  try {
    out.check();
  } catch (const std::exception& e) {
    throw ConfigError("spec", e.what());
  }
  return out;
}

inline AmbiguityConfig ambiguity(const YAML::Node& node, Eigen::Index m, std::size_t regions) {
  AmbiguityConfig out;
  out.family = family(node, "ambiguity", m);
  out.radius = radius(scalar_or<double>(node, "radius", "ambiguity", out.radius), "ambiguity.radius");
  out.risk = risk(scalar_or<double>(node, "risk", "ambiguity", out.risk), "ambiguity.risk");
  if (const auto ov = node["overrides"]) {
    for (std::size_t i = 0; i < ov.size(); ++i) {
      const auto p = join("ambiguity.overrides", i);
      SideOverride o;
      o.region = scalar<std::size_t>(require(ov[i], "region", p), join(p, "region"));
      if (o.region < 1 || o.region > regions) {
        throw ConfigError(join(p, "region"), "region index must be in 1.." + std::to_string(regions));
      }
      const auto side = scalar_or<std::string>(ov[i], "side", p, "both");
      if (side == "lower") {
        o.upper = false;
      } else if (side == "upper") {
        o.lower = false;
      } else if (side != "both") {
        throw ConfigError(join(p, "side"), "expected lower, upper or both");
      }
      if (ov[i]["family"] || ov[i]["sigma"] || ov[i]["scatter"] || ov[i]["dof"]) {
        YAML::Node merged = YAML::Clone(ov[i]);
        if (!merged["family"]) merged["family"] = out.family.family.name();
        o.family = family(merged, p, m);
      }
      if (ov[i]["radius"]) o.radius = radius(scalar<double>(ov[i]["radius"], join(p, "radius")), join(p, "radius"));
      if (ov[i]["risk"]) o.risk = risk(scalar<double>(ov[i]["risk"], join(p, "risk")), join(p, "risk"));
      out.overrides.push_back(std::move(o));
    }
  }
  return out;
}

inline BenchmarkConfig benchmark(const YAML::Node& node, Eigen::Index m) {
  BenchmarkConfig out;
  if (!node) return out;
  auto& o = out.options;
  auto& p = o.perturbation;
  if (node["alphas"]) {
    p.alphas = numbers(node["alphas"], "benchmark.alphas");
    if (p.alphas.empty()) throw ConfigError("benchmark.alphas", "need at least one value");
    for (std::size_t i = 0; i < p.alphas.size(); ++i) {
      check_range(p.alphas[i], join("benchmark.alphas", i), 0.0, 1.0, false, false);
    }
  }
  p.instances_per_alpha = scalar_or<int>(node, "instances_per_alpha", "benchmark", p.instances_per_alpha);
  if (p.instances_per_alpha < 1) throw ConfigError("benchmark.instances_per_alpha", "must be >= 1");
  if (const auto h = node["uniform_halfwidth"]) {
    p.uniform_halfwidth = h.IsSequence() ? numbers(h, "benchmark.uniform_halfwidth")
                                         : std::vector<double>{scalar<double>(h, "benchmark.uniform_halfwidth")};
    if (p.uniform_halfwidth.size() != 1 && static_cast<Eigen::Index>(p.uniform_halfwidth.size()) != m) {
      throw ConfigError("benchmark.uniform_halfwidth", "expected 1 or " + std::to_string(m) + " entries");
    }
    for (std::size_t i = 0; i < p.uniform_halfwidth.size(); ++i) {
      check_range(p.uniform_halfwidth[i], join("benchmark.uniform_halfwidth", i), 0.0,
                  std::numeric_limits<double>::infinity(), false, true);
    }
  }
  p.seed = scalar_or<std::uint64_t>(node, "seed", "benchmark", p.seed);
  if (node["radii"]) {
    out.radii = numbers(node["radii"], "benchmark.radii");
    for (std::size_t i = 0; i < out.radii.size(); ++i) radius(out.radii[i], join("benchmark.radii", i));
  }
  if (node["risks"]) {
    out.risks = numbers(node["risks"], "benchmark.risks");
    for (std::size_t i = 0; i < out.risks.size(); ++i) risk(out.risks[i], join("benchmark.risks", i));
  }
  o.methods = robustness::method_grid(out.radii, out.risks);
  if (const auto fams = node["families"]) {
    o.families.clear();
    for (std::size_t i = 0; i < fams.size(); ++i) {
      const auto path = join("benchmark.families", i);
      const auto f = family(fams[i], path, m);
      if (f.scatter) throw ConfigError(path, "benchmark families take an isotropic sigma");
      o.families.push_back({f.family, f.sigma});
    }
  }
  o.resolution = scalar_or<int>(node, "resolution", "benchmark", o.resolution);
  if (o.resolution < 2) throw ConfigError("benchmark.resolution", "must be >= 2");
  const auto mode = scalar_or<std::string>(node, "violation_mode", "benchmark", "sampled_curve");
  if (mode == "sampled_curve") {
    o.violation_mode = robustness::ViolationMode::SampledCurve;
  } else if (mode == "control_points") {
    o.violation_mode = robustness::ViolationMode::ControlPoints;
  } else {
    throw ConfigError("benchmark.violation_mode", "expected sampled_curve or control_points");
  }
  o.threads = scalar_or<unsigned>(node, "threads", "benchmark", 1u);
  o.keep_instances = scalar_or<bool>(node, "dump_instances", "benchmark", false);
  return out;
}

inline qp::SolverSettings solver(const YAML::Node& node) {
  qp::SolverSettings s;
  if (!node) return s;
  s.max_iter = scalar_or<int>(node, "max_iter", "solver", s.max_iter);
  if (s.max_iter < 1) throw ConfigError("solver.max_iter", "must be >= 1");
  s.tolerance = positive(scalar_or<double>(node, "tolerance", "solver", s.tolerance), "solver.tolerance");
  s.polish = scalar_or<bool>(node, "polish", "solver", s.polish);
  return s;
}

}  // namespace detail

inline RunConfig parse(const YAML::Node& root, std::string default_name = "case") {
  if (!root || !root.IsMap()) throw ConfigError("", "config root must be a mapping");
  auto corridor = detail::corridor(root);
  auto path = detail::path(root);
  const auto m = corridor.dimension();
  if (path.dimension() != m) {
    throw ConfigError("path.waypoints", "dimension " + std::to_string(path.dimension()) +
                                            " does not match corridor dimension " + std::to_string(m));
  }
  if (path.segments() != corridor.size()) {
    throw ConfigError("path.waypoints", std::to_string(path.segments() + 1) + " waypoints for " +
                                            std::to_string(corridor.size()) + " regions (need N+1)");
  }
  RunConfig out{default_name, std::move(corridor), std::move(path), {}, {}, {}, {}, {}};
  out.name = detail::scalar_or<std::string>(root, "name", "", default_name);
  out.spec = detail::spec(root, m);
  if (root["ambiguity"]) out.ambiguity = detail::ambiguity(root["ambiguity"], m, out.corridor.size());
  out.benchmark = detail::benchmark(root["benchmark"], m);
  out.solver = detail::solver(root["solver"]);
  out.benchmark.options.solver = out.solver;
  if (const auto o = root["output"]) {
    out.output.dir = detail::scalar_or<std::string>(o, "dir", "output", "");
    out.output.resolution = detail::scalar_or<int>(o, "resolution", "output", out.output.resolution);
    if (out.output.resolution < 1) throw ConfigError("output.resolution", "must be >= 1");
    out.output.svg = detail::scalar_or<bool>(o, "svg", "output", true);
  }
  return out;
}

inline RunConfig load(const std::filesystem::path& file) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(file.string());
  } catch (const YAML::BadFile&) {
    throw ConfigError("", "cannot read config file " + file.string());
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", std::string("YAML syntax error: ") + e.what());
  }
  return parse(root, file.stem().string());
}

inline RunConfig load_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", std::string("YAML syntax error: ") + e.what());
  }
  return parse(root);
}

inline robustness::BenchmarkCase benchmark_case(const RunConfig& cfg) {
  return {cfg.name, cfg.corridor, cfg.path, cfg.spec};
}

}  // namespace drscc::config
