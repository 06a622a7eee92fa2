#pragma once

// Safe corridor model: a chain of overlapping axis-aligned boxes plus the
// initial piecewise-linear path threading through them.

#include "drscc/common.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace drscc {

struct BoxRegion {
  Vector lower;
  Vector upper;

  Eigen::Index dimension() const { return lower.size(); }

  bool contains(const Vector& p, double tol = kBoxTolerance) const {
    return ((p - lower).array() >= -tol).all() && ((upper - p).array() >= -tol).all();
  }
};

/// Componentwise intersection of two boxes. The result may be empty
/// (lower > upper in some dimension); callers check with `is_empty`.
inline BoxRegion intersect(const BoxRegion& a, const BoxRegion& b) {
  return {a.lower.cwiseMax(b.lower), a.upper.cwiseMin(b.upper)};
}

inline bool is_empty(const BoxRegion& box, double tol = kBoxTolerance) {
  return ((box.upper - box.lower).array() < -tol).any();
}

class SafeCorridor {
 public:
  explicit SafeCorridor(std::vector<BoxRegion> regions) : regions_(std::move(regions)) {
    if (regions_.empty()) throw StructuralError("corridor needs at least one region");
    const auto m = regions_.front().dimension();
    if (m < 1) throw StructuralError("corridor regions must have dimension >= 1");
    for (std::size_t i = 0; i < regions_.size(); ++i) {
      if (regions_[i].lower.size() != m || regions_[i].upper.size() != m) {
        throw StructuralError("region " + std::to_string(i + 1) + " has inconsistent dimension");
      }
    }
  }

  std::size_t size() const { return regions_.size(); }
  Eigen::Index dimension() const { return regions_.front().dimension(); }
  const BoxRegion& region(std::size_t i) const { return regions_.at(i); }
  const std::vector<BoxRegion>& regions() const { return regions_; }

 private:
  std::vector<BoxRegion> regions_;
};

class InitialPath {
 public:
  InitialPath(std::vector<Vector> waypoints, std::vector<double> arrival_times)
      : waypoints_(std::move(waypoints)), times_(std::move(arrival_times)) {
    if (waypoints_.size() < 2) throw StructuralError("path needs at least two waypoints");
    if (times_.size() != waypoints_.size()) {
      throw StructuralError("path has " + std::to_string(waypoints_.size()) + " waypoints but " +
                            std::to_string(times_.size()) + " arrival times");
    }
    for (const auto& p : waypoints_) {
      if (p.size() != waypoints_.front().size()) throw StructuralError("waypoints differ in dimension");
    }
  }

  std::size_t segments() const { return waypoints_.size() - 1; }
  Eigen::Index dimension() const { return waypoints_.front().size(); }
  const std::vector<Vector>& waypoints() const { return waypoints_; }
  const std::vector<double>& arrival_times() const { return times_; }
  double start_time() const { return times_.front(); }

  std::vector<double> durations() const {
    std::vector<double> tau(segments());
    for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = times_[i + 1] - times_[i];
    return tau;
  }

 private:
  std::vector<Vector> waypoints_;
  std::vector<double> times_;
};

enum class ViolationKind { EmptyRegion, DisjointRegions, WaypointOutside, NonMonotoneTime };

struct Violation {
  ViolationKind kind;
  std::size_t index;  // 1-based region / waypoint / segment index
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  std::string to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.message << '\n';
    return os.str();
  }
};

/// Checks every corridor/path invariant and lists each violation. Indices in
/// messages are 1-based. Throws StructuralError when the path does not match
/// the corridor's shape.
inline ValidationReport validate(const SafeCorridor& corridor, const InitialPath& path) {
  if (path.dimension() != corridor.dimension()) {
    throw StructuralError("corridor has dimension " + std::to_string(corridor.dimension()) +
                          " but path has dimension " + std::to_string(path.dimension()));
  }
  if (path.segments() != corridor.size()) {
    throw StructuralError("corridor has " + std::to_string(corridor.size()) + " regions but path has " +
                          std::to_string(path.segments()) + " segments");
  }

  ValidationReport report;
  const std::size_t n = corridor.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = corridor.region(i);
    for (Eigen::Index d = 0; d < r.dimension(); ++d) {
      if (!(r.lower[d] < r.upper[d])) {
        report.violations.push_back({ViolationKind::EmptyRegion, i + 1,
                                     "region " + std::to_string(i + 1) + " empty in dimension " +
                                         std::to_string(d + 1)});
        break;
      }
    }
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (is_empty(intersect(corridor.region(i), corridor.region(i + 1)))) {
      report.violations.push_back({ViolationKind::DisjointRegions, i + 1,
                                   "regions " + std::to_string(i + 1) + "," + std::to_string(i + 2) +
                                       " disjoint"});
    }
  }

  const auto& p = path.waypoints();
  if (!corridor.region(0).contains(p.front())) {
    report.violations.push_back({ViolationKind::WaypointOutside, 0, "waypoint 0 outside region 1"});
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!intersect(corridor.region(i - 1), corridor.region(i)).contains(p[i])) {
      report.violations.push_back({ViolationKind::WaypointOutside, i,
                                   "waypoint " + std::to_string(i) + " outside overlap"});
    }
  }
  if (!corridor.region(n - 1).contains(p.back())) {
    report.violations.push_back({ViolationKind::WaypointOutside, n,
                                 "waypoint " + std::to_string(n) + " outside region " + std::to_string(n)});
  }

  const auto& t = path.arrival_times();
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (!(t[i] < t[i + 1])) {
      report.violations.push_back({ViolationKind::NonMonotoneTime, i + 1,
                                   "segment " + std::to_string(i + 1) + " has non-positive duration"});
    }
  }
  return report;
}

enum class TimeAllocationMode { Proportional, Uniform };

struct TimeAllocation {
  TimeAllocationMode mode = TimeAllocationMode::Proportional;
  double min_duration = 0.1;  // seconds
  double start_time = 0.0;
};

/// Arrival times for a waypoint sequence travelled at `v_max`.
///
/// Proportional mode gives each segment ‖p_i − p_{i−1}‖ / v_max; uniform mode
/// splits the total length evenly. Either way every duration is clamped below
/// by `min_duration`.
inline std::vector<double> allocate_times(const std::vector<Vector>& waypoints, double v_max,
                                          const TimeAllocation& options = {}) {
  if (!(v_max > 0.0)) throw InvalidArgument("v_max must be positive");
  if (waypoints.size() < 2) throw InvalidArgument("time allocation needs at least two waypoints");
  if (options.min_duration < 0.0) throw InvalidArgument("min_duration must be non-negative");

  const std::size_t segments = waypoints.size() - 1;
  std::vector<double> lengths(segments);
  double total = 0.0;
  for (std::size_t i = 0; i < segments; ++i) {
    if (waypoints[i + 1].size() != waypoints[i].size()) throw StructuralError("waypoints differ in dimension");
    lengths[i] = (waypoints[i + 1] - waypoints[i]).norm();
    total += lengths[i];
  }

  std::vector<double> times(waypoints.size());
  times[0] = options.start_time;
  for (std::size_t i = 0; i < segments; ++i) {
    const double raw = options.mode == TimeAllocationMode::Proportional
                           ? lengths[i] / v_max
                           : total / (static_cast<double>(segments) * v_max);
    const double tau = std::max(raw, options.min_duration);
    if (!(tau > 0.0)) {
      throw InvalidArgument("segment " + std::to_string(i + 1) +
                            " has zero duration (coincident waypoints and no minimum duration)");
    }
    times[i + 1] = times[i] + tau;
  }
  return times;
}

}  // namespace drscc
