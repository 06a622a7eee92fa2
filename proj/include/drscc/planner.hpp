#pragma once

// End-to-end planning: (tighten) → assemble → solve → reshape.

#include "drscc/bezier.hpp"
#include "drscc/corridor.hpp"
#include "drscc/qp_solver.hpp"
#include "drscc/tightening.hpp"
#include "drscc/trajectory_qp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace drscc {

enum class PlanMode { Nominal, Drscc };

inline const char* to_string(PlanMode mode) { return mode == PlanMode::Nominal ? "nominal" : "drscc"; }

class InvalidCorridor : public InvalidArgument {
 public:
  explicit InvalidCorridor(ValidationReport report)
      : InvalidArgument("invalid corridor/path:\n" + report.to_string()), report_(std::move(report)) {}

  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

struct PlanResult {
  PlanMode mode = PlanMode::Nominal;
  std::vector<BoxRegion> boxes;  // the boxes the control points were held in
  std::optional<TightenedCorridor> tightened;
  TrajectoryQp problem;
  qp::QpSolution solution;
  std::optional<bezier::PiecewiseBezier> trajectory;
  double max_box_violation = 0.0;  // sampled post-check, 200 points per segment

  bool optimal() const { return solution.status == qp::SolveStatus::Optimal; }
  /// cᵀQc; the QP itself carries ½cᵀ(2Q)c so the values coincide.
  double objective() const { return solution.objective; }
};

/// Largest distance by which sampled trajectory points leave their segment's box.
inline double box_exit(const bezier::PiecewiseBezier& trajectory, const std::vector<BoxRegion>& boxes,
                       int resolution) {
  double worst = 0.0;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto& seg = trajectory.segment(i);
    for (int r = 0; r < resolution; ++r) {
      const Vector p = bezier::evaluate(seg, static_cast<double>(r) / (resolution - 1));
      worst = std::max(worst, (boxes[i].lower - p).maxCoeff());
      worst = std::max(worst, (p - boxes[i].upper).maxCoeff());
    }
  }
  return worst;
}

/// Throws InvalidCorridor for invalid inputs and InfeasibleTightening when
/// the robust bounds cross; an infeasible or unconverged QP is reported
/// through `solution.status`.
inline PlanResult plan(const SafeCorridor& corridor, const InitialPath& path, const SnapSpec& spec, PlanMode mode,
                       const AmbiguitySpec* ambiguity = nullptr, const qp::SolverSettings& settings = {}) {
  auto report = validate(corridor, path);
  if (!report.ok()) throw InvalidCorridor(std::move(report));

  PlanResult result;
  result.mode = mode;
  if (mode == PlanMode::Drscc) {
    if (ambiguity == nullptr) throw InvalidArgument("drscc mode requires an ambiguity specification");
    auto tightened = tighten(corridor, *ambiguity);
    if (!tightened.feasible()) throw InfeasibleTightening(std::move(tightened));
    result.boxes = tightened.regions;
    result.tightened = std::move(tightened);
  } else {
    result.boxes = corridor.regions();
  }

  result.problem = assemble_constraints(result.boxes, path, spec);
  result.solution = qp::solve(result.problem.standard_form(), settings);
  if (result.solution.status != qp::SolveStatus::Infeasible) {
    result.trajectory = result.problem.reshape(result.solution.x);
    result.max_box_violation = box_exit(*result.trajectory, result.boxes, 200);
  }
  return result;
}

}  // namespace drscc
