#pragma once

// File output: atomic writes, versioned CSV tables and SVG figures.

#include "drscc/bezier.hpp"
#include "drscc/corridor.hpp"
#include "drscc/robustness.hpp"
#include "drscc/tightening.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

namespace drscc::io {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to a sibling temp file, then renames over `path`, so readers never
/// see a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw OutputError("cannot open " + tmp.string() + " for writing");
    body(os);
    os.flush();
    if (!os) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw OutputError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw OutputError("cannot rename into " + path.string());
  }
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  atomic_write(path, [&](std::ostream& os) { os << content; });
}

inline std::string axis_name(Eigen::Index d, Eigen::Index m) {
  static const char* names[] = {"x", "y", "z"};
  if (m <= 3) return names[d];
  return "p" + std::to_string(d + 1);
}

inline constexpr const char* kTrajectorySchema = "# drscc-trajectory-csv v1";
inline constexpr const char* kBoundsSchema = "# drscc-tightened-bounds-csv v1";

/// Rows t, position, velocity, acceleration. Each segment contributes
/// `resolution` rows and the final endpoint one more, so there are
/// N·resolution + 1 rows.
inline void write_trajectory_csv(const bezier::PiecewiseBezier& traj, int resolution, std::ostream& os) {
  if (resolution < 1) throw InvalidArgument("output resolution must be >= 1");
  const auto m = traj.dimension();
  os << kTrajectorySchema << '\n' << 't';
  for (const char* prefix : {"", "v", "a"}) {
    for (Eigen::Index d = 0; d < m; ++d) os << ',' << prefix << axis_name(d, m);
  }
  os << '\n' << std::setprecision(12);
  const auto row = [&](const bezier::BezierSegment& seg, double t0, double s) {
    os << t0 + s * seg.duration();
    const Vector p = bezier::evaluate(seg, s);
    for (Eigen::Index d = 0; d < m; ++d) os << ',' << p[d];
    for (int l = 1; l <= 2; ++l) {
      const Vector v = seg.degree() >= l ? bezier::evaluate_derivative(seg, l, s) : Vector::Zero(m);
      for (Eigen::Index d = 0; d < m; ++d) os << ',' << v[d];
    }
    os << '\n';
  };
  double t0 = traj.start_time();
  for (const auto& seg : traj.segments()) {
    for (int r = 0; r < resolution; ++r) row(seg, t0, static_cast<double>(r) / resolution);
    t0 += seg.duration();
  }
  row(traj.segments().back(), t0 - traj.segments().back().duration(), 1.0);
}

inline void write_bounds_csv(const SafeCorridor& nominal, const TightenedCorridor& tightened, std::ostream& os) {
  os << kBoundsSchema << '\n';
  os << "region,dimension,nominal_lower,nominal_upper,tightened_lower,tightened_upper,eta_lower,eta_upper,"
        "lower_risk_lower,lower_risk_upper\n";
  os << std::setprecision(12);
  for (std::size_t i = 0; i < nominal.size(); ++i) {
    const auto& n = nominal.region(i);
    const auto& t = tightened.regions[i];
    for (Eigen::Index d = 0; d < n.dimension(); ++d) {
      os << i + 1 << ',' << d + 1 << ',' << n.lower[d] << ',' << n.upper[d] << ',' << t.lower[d] << ',' << t.upper[d]
         << ',' << tightened.lower_side[i].eta_star << ',' << tightened.upper_side[i].eta_star << ','
         << tightened.lower_side[i].lower_risk << ',' << tightened.upper_side[i].lower_risk << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// SVG

namespace detail {

struct Frame {
  double xmin, ymin, scale, height;
  double x(double v) const { return 20.0 + (v - xmin) * scale; }
  double y(double v) const { return height - 20.0 - (v - ymin) * scale; }
};

inline double coord(const Vector& v, Eigen::Index d) { return d < v.size() ? v[d] : 0.0; }

}  // namespace detail

/// Corridor boxes, tightened boxes (dashed), waypoints and the trajectory,
/// projected onto the first two coordinates.
inline void write_corridor_svg(const SafeCorridor& corridor, const std::vector<BoxRegion>* tightened,
                               const std::vector<Vector>& waypoints, const bezier::PiecewiseBezier* traj,
                               std::ostream& os) {
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& r : corridor.regions()) {
    xmin = std::min(xmin, detail::coord(r.lower, 0));
    ymin = std::min(ymin, detail::coord(r.lower, 1));
    xmax = std::max(xmax, detail::coord(r.upper, 0));
    ymax = std::max(ymax, detail::coord(r.upper, 1));
  }
  const double width = 760.0;
  const double scale = width / std::max({xmax - xmin, ymax - ymin, 1e-9});
  const double height = (ymax - ymin) * scale + 40.0;
  const detail::Frame f{xmin, ymin, scale, height};

  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width + 40.0 << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const auto box = [&](const BoxRegion& r, const char* style) {
    const double x0 = f.x(detail::coord(r.lower, 0)), x1 = f.x(detail::coord(r.upper, 0));
    const double y0 = f.y(detail::coord(r.upper, 1)), y1 = f.y(detail::coord(r.lower, 1));
    os << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << x1 - x0 << "\" height=\"" << y1 - y0 << "\" "
       << style << "/>\n";
  };
  for (const auto& r : corridor.regions()) box(r, "fill=\"#4a90d9\" fill-opacity=\"0.12\" stroke=\"#4a90d9\"");
  if (tightened != nullptr) {
    for (const auto& r : *tightened) box(r, "fill=\"none\" stroke=\"#d94a4a\" stroke-dasharray=\"6,4\"");
  }
  if (traj != nullptr) {
    os << "<polyline fill=\"none\" stroke=\"#222\" stroke-width=\"2\" points=\"";
    for (const auto& p : bezier::sample(*traj, 60)) {
      os << f.x(detail::coord(p.position, 0)) << ',' << f.y(detail::coord(p.position, 1)) << ' ';
    }
    os << "\"/>\n";
  }
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    const double cx = f.x(detail::coord(waypoints[i], 0)), cy = f.y(detail::coord(waypoints[i], 1));
    os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"4\" fill=\"#e6a100\"/>\n";
    os << "<text x=\"" << cx + 6 << "\" y=\"" << cy - 6 << "\">p" << i << "</text>\n";
  }
  os << "</svg>\n";
}

/// Bar chart of violation counts per alpha for one benchmark cell.
inline void write_alpha_histogram_svg(const robustness::CellResult& cell, const std::vector<double>& alphas,
                                      long per_alpha, std::ostream& os) {
  const double w = 420.0, h = 260.0, left = 50.0, bottom = 40.0, top = 30.0;
  const double bar_w = (w - left - 20.0) / static_cast<double>(std::max<std::size_t>(alphas.size(), 1));
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"18\">" << cell.case_name << " / " << cell.family.label() << " / "
     << cell.method.label() << "</text>\n";
  const double plot_h = h - bottom - top;
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - 10 << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"4\" y=\"" << top + 10 << "\">" << per_alpha << "</text>\n";
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const long count = cell.available ? cell.violations_by_alpha[i] : 0;
    const double bh = per_alpha > 0 ? plot_h * static_cast<double>(count) / static_cast<double>(per_alpha) : 0.0;
    const double x = left + i * bar_w + 4.0;
    os << "<rect x=\"" << x << "\" y=\"" << h - bottom - bh << "\" width=\"" << bar_w - 8.0 << "\" height=\"" << bh
       << "\" fill=\"#4a90d9\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << h - bottom + 14 << "\">a=" << alphas[i] << "</text>\n";
    os << "<text x=\"" << x << "\" y=\"" << h - bottom - bh - 3 << "\">" << (cell.available ? std::to_string(count) : "N/A")
       << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace drscc::io
