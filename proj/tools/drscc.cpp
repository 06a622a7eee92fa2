// drscc command-line tool: plan, benchmark, validate.
//
// Exit codes: 0 success, 1 config/input error, 2 infeasible or unconverged.

#include "drscc/config.hpp"
#include "drscc/io.hpp"
#include "drscc/planner.hpp"
#include "drscc/robustness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace drscc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInfeasible = 2;

struct Failure {
  int code;
  json record;
};

Failure failure(int code, const std::string& kind, const std::string& message) {
  return {code, json{{"error", kind}, {"message", message}}};
}

fs::path output_dir(const std::string& flag, const config::RunConfig* cfg) {
  if (!flag.empty()) return flag;
  if (cfg != nullptr && !cfg->output.dir.empty()) return cfg->output.dir;
  if (const char* env = std::getenv("DRSCC_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "out";
}

// Error record goes to stderr always and to <out>/error.json when the
// directory is known.
int report(const Failure& f, const std::optional<fs::path>& out) {
  std::cerr << f.record.dump() << '\n';
  if (out) {
    try {
      io::atomic_write(*out / "error.json", f.record.dump(2) + "\n");
    } catch (const std::exception&) {
    }
  }
  return f.code;
}

json crossed_json(const TightenedCorridor& t) {
  json arr = json::array();
  for (const auto& c : t.crossed) {
    arr.push_back({{"region", c.region}, {"dimension", c.dimension}, {"lower", c.lower}, {"upper", c.upper}});
  }
  return arr;
}

json violations_json(const ValidationReport& r) {
  json arr = json::array();
  for (const auto& v : r.violations) arr.push_back({{"index", v.index}, {"message", v.message}});
  return arr;
}

std::string status_class(qp::SolveStatus s) {
  return s == qp::SolveStatus::Infeasible ? "qp_infeasible" : "solver_max_iter";
}

void export_qp(const TrajectoryQp& problem, const fs::path& out) {
  const auto std_qp = problem.standard_form();
  io::atomic_write(out / "qp_P.txt", [&](std::ostream& os) { write_triplets(os, std_qp.P); });
  io::atomic_write(out / "qp_A.txt", [&](std::ostream& os) { write_triplets(os, std_qp.A); });
  io::atomic_write(out / "qp_vectors.csv", [&](std::ostream& os) {
    os << "# drscc-qp-vectors-csv v1\nkind,index,value\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < std_qp.q.size(); ++i) os << "q," << i << ',' << std_qp.q[i] << '\n';
    for (Eigen::Index i = 0; i < std_qp.lower.size(); ++i) os << "l," << i << ',' << std_qp.lower[i] << '\n';
    for (Eigen::Index i = 0; i < std_qp.upper.size(); ++i) os << "u," << i << ',' << std_qp.upper[i] << '\n';
  });
}

int cmd_plan(const std::string& file, std::string mode_flag, const std::string& out_flag, bool export_flag) {
  std::optional<config::RunConfig> cfg;
  try {
    cfg = config::load(file);
  } catch (const config::ConfigError& e) {
    auto f = failure(kExitConfig, "config_error", e.what());
    f.record["field"] = e.field();
    return report(f, output_dir(out_flag, nullptr));
  }
  const fs::path out = output_dir(out_flag, &*cfg);

  if (mode_flag.empty()) mode_flag = cfg->ambiguity ? "drscc" : "nominal";
  const PlanMode mode = mode_flag == "drscc" ? PlanMode::Drscc : PlanMode::Nominal;
  std::optional<AmbiguitySpec> amb;
  if (mode == PlanMode::Drscc) {
    if (!cfg->ambiguity) {
      auto f = failure(kExitConfig, "config_error", "ambiguity: drscc mode needs an ambiguity section");
      f.record["field"] = "ambiguity";
      return report(f, out);
    }
    amb = cfg->ambiguity->build(cfg->corridor);
  }

  std::optional<PlanResult> result;
  try {
    result = plan(cfg->corridor, cfg->path, cfg->spec, mode, amb ? &*amb : nullptr, cfg->solver);
  } catch (const InvalidCorridor& e) {
    auto f = failure(kExitConfig, "invalid_corridor", e.what());
    f.record["violations"] = violations_json(e.report());
    return report(f, out);
  } catch (const InfeasibleTightening& e) {
    auto f = failure(kExitInfeasible, "infeasible_tightening", e.what());
    f.record["crossed"] = crossed_json(e.tightened());
    return report(f, out);
  } catch (const std::invalid_argument& e) {
    return report(failure(kExitConfig, "invalid_input", e.what()), out);
  }

  const auto& sol = result->solution;
  json summary{{"name", cfg->name},
               {"mode", to_string(mode)},
               {"status", qp::to_string(sol.status)},
               {"iterations", sol.iterations},
               {"polished", sol.polished},
               {"wall_time_seconds", sol.wall_time},
               {"kkt",
                {{"stationarity", sol.residuals.stationarity},
                 {"primal", sol.residuals.primal},
                 {"complementarity", sol.residuals.complementarity}}},
               {"segments", cfg->corridor.size()},
               {"durations", cfg->path.durations()},
               {"output_resolution", cfg->output.resolution}};
  if (sol.status != qp::SolveStatus::Infeasible) {
    summary["objective"] = sol.objective;
    summary["max_box_violation"] = result->max_box_violation;
  }
  if (result->tightened) {
    json sides = json::array();
    for (std::size_t i = 0; i < result->tightened->regions.size(); ++i) {
      sides.push_back({{"region", i + 1},
                       {"eta_star_lower", result->tightened->lower_side[i].eta_star},
                       {"eta_star_upper", result->tightened->upper_side[i].eta_star},
                       {"lower_risk_lower", result->tightened->lower_side[i].lower_risk},
                       {"lower_risk_upper", result->tightened->upper_side[i].lower_risk}});
    }
    summary["tightening"] = sides;
  }

  try {
    io::atomic_write(out / "summary.json", summary.dump(2) + "\n");
    if (result->trajectory) {
      io::atomic_write(out / "trajectory.csv", [&](std::ostream& os) {
        io::write_trajectory_csv(*result->trajectory, cfg->output.resolution, os);
      });
    }
    if (result->tightened) {
      io::atomic_write(out / "tightened_bounds.csv",
                       [&](std::ostream& os) { io::write_bounds_csv(cfg->corridor, *result->tightened, os); });
    }
    if (cfg->output.svg) {
      io::atomic_write(out / "corridor.svg", [&](std::ostream& os) {
        io::write_corridor_svg(cfg->corridor, result->tightened ? &result->tightened->regions : nullptr,
                               cfg->path.waypoints(), result->trajectory ? &*result->trajectory : nullptr, os);
      });
    }
    if (export_flag) export_qp(result->problem, out);
  } catch (const std::exception& e) {
    return report(failure(kExitConfig, "output_error", e.what()), out);
  }

  std::cout << cfg->name << " [" << to_string(mode) << "]: " << qp::to_string(sol.status);
  if (sol.status != qp::SolveStatus::Infeasible) std::cout << ", objective " << sol.objective;
  std::cout << ", " << sol.iterations << " iterations, " << sol.wall_time * 1e3 << " ms -> " << out.string() << '\n';

  if (sol.status == qp::SolveStatus::Optimal) return kExitOk;
  auto f = failure(kExitInfeasible, status_class(sol.status),
                   std::string("QP solve ended with status ") + qp::to_string(sol.status));
  if (!sol.violated_rows.empty()) f.record["violated_rows"] = sol.violated_rows;
  return report(f, out);
}

int cmd_benchmark(const std::string& file, const std::string& out_flag, std::optional<std::uint64_t> seed,
                  std::optional<int> instances, std::optional<unsigned> threads) {
  std::optional<config::RunConfig> cfg;
  try {
    cfg = config::load(file);
  } catch (const config::ConfigError& e) {
    auto f = failure(kExitConfig, "config_error", e.what());
    f.record["field"] = e.field();
    return report(f, output_dir(out_flag, nullptr));
  }
  const fs::path out = output_dir(out_flag, &*cfg);
  auto options = cfg->benchmark.options;
  if (seed) options.perturbation.seed = *seed;
  if (instances) options.perturbation.instances_per_alpha = *instances;
  if (threads) options.threads = *threads;

  const auto report_ok = validate(cfg->corridor, cfg->path);
  if (!report_ok.ok()) {
    auto f = failure(kExitConfig, "invalid_corridor", report_ok.to_string());
    f.record["violations"] = violations_json(report_ok);
    return report(f, out);
  }

  robustness::BenchmarkReport rep;
  try {
    rep = robustness::run_benchmark({config::benchmark_case(*cfg)}, options);
  } catch (const std::invalid_argument& e) {
    return report(failure(kExitConfig, "invalid_input", e.what()), out);
  }

  try {
    io::atomic_write(out / "benchmark.csv", [&](std::ostream& os) { robustness::write_csv(rep, os); });
    io::atomic_write(out / "benchmark.txt", [&](std::ostream& os) { robustness::write_table(rep, os); });
    io::atomic_write(out / "timings.csv", [&](std::ostream& os) { robustness::write_timings_csv(rep, os); });
    if (options.keep_instances) {
      io::atomic_write(out / "instances.csv", [&](std::ostream& os) { robustness::write_instances_csv(rep, os); });
    }
    if (cfg->output.svg) {
      for (const auto& cell : rep.cells) {
        std::string name = cell.case_name + "_" + cell.family.label() + "_" + cell.method.label();
        for (char& c : name) {
          if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '_') c = '_';
        }
        while (!name.empty() && name.back() == '_') name.pop_back();
        io::atomic_write(out / "histograms" / (name + ".svg"), [&](std::ostream& os) {
          io::write_alpha_histogram_svg(cell, options.perturbation.alphas, options.perturbation.instances_per_alpha,
                                        os);
        });
      }
    }
  } catch (const std::exception& e) {
    return report(failure(kExitConfig, "output_error", e.what()), out);
  }
  robustness::write_table(rep, std::cout);
  return kExitOk;
}

int cmd_validate(const std::string& file) {
  std::optional<config::RunConfig> cfg;
  try {
    cfg = config::load(file);
  } catch (const config::ConfigError& e) {
    auto f = failure(kExitConfig, "config_error", e.what());
    f.record["field"] = e.field();
    return report(f, std::nullopt);
  }
  ValidationReport rep;
  try {
    rep = validate(cfg->corridor, cfg->path);
  } catch (const std::invalid_argument& e) {
    return report(failure(kExitConfig, "invalid_input", e.what()), std::nullopt);
  }
  if (!rep.ok()) {
    std::cout << rep.to_string();
    auto f = failure(kExitConfig, "invalid_corridor", rep.to_string());
    f.record["violations"] = violations_json(rep);
    return report(f, std::nullopt);
  }
  std::cout << cfg->name << ": corridor and path valid (" << cfg->corridor.size() << " regions)\n";
  if (cfg->ambiguity) {
    const auto t = tighten(cfg->corridor, cfg->ambiguity->build(cfg->corridor));
    for (std::size_t i = 0; i < t.regions.size(); ++i) {
      std::cout << "  region " << i + 1 << ": tightened lower " << t.regions[i].lower.transpose() << ", upper "
                << t.regions[i].upper.transpose() << '\n';
    }
    if (!t.feasible()) {
      std::cout << t.report();
      auto f = failure(kExitConfig, "infeasible_tightening", t.report());
      f.record["crossed"] = crossed_json(t);
      return report(f, std::nullopt);
    }
    std::cout << "  tightening feasible\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust safe-corridor trajectory planning"};
  app.require_subcommand(1);

  std::string file, mode, out;
  bool export_flag = false;
  auto* plan_cmd = app.add_subcommand("plan", "plan a trajectory for one config");
  plan_cmd->add_option("config", file, "YAML config file")->required();
  plan_cmd->add_option("--mode", mode, "nominal or drscc (default: drscc when the config has an ambiguity section)")
      ->check(CLI::IsMember({"nominal", "drscc"}));
  plan_cmd->add_option("--out", out, "output directory");
  plan_cmd->add_flag("--export-qp", export_flag, "also write the assembled QP as sparse triplets");

  std::optional<std::uint64_t> seed;
  std::optional<int> instances;
  std::optional<unsigned> threads;
  auto* bench_cmd = app.add_subcommand("benchmark", "run the perturbation benchmark for one config");
  bench_cmd->add_option("config", file, "YAML config file")->required();
  bench_cmd->add_option("--out", out, "output directory");
  bench_cmd->add_option("--seed", seed, "override benchmark.seed");
  bench_cmd->add_option("--instances", instances, "override benchmark.instances_per_alpha")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* validate_cmd = app.add_subcommand("validate", "check a config without solving");
  validate_cmd->add_option("config", file, "YAML config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*plan_cmd) return cmd_plan(file, mode, out, export_flag);
    if (*bench_cmd) return cmd_benchmark(file, out, seed, instances, threads);
    return cmd_validate(file);
  } catch (const std::exception& e) {
    return report(failure(kExitConfig, "internal_error", e.what()), std::nullopt);
  }
}
