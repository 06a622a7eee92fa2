// Acceptance checks AC1..AC8. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include "drscc/config.hpp"
#include "drscc/planner.hpp"
#include "drscc/robustness.hpp"
#include "drscc/tightening.hpp"
#include "drscc/trajectory_qp.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <sys/wait.h>

using namespace drscc;
namespace fs = std::filesystem;
using elliptical::GeneratorFamily;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

oracle::Dist to_oracle(const GeneratorFamily& f) {
  switch (f.kind()) {
    case elliptical::FamilyKind::Normal: return {oracle::Family::Normal};
    case elliptical::FamilyKind::StudentT: return {oracle::Family::StudentT, f.dof()};
    case elliptical::FamilyKind::Logistic: return {oracle::Family::Logistic};
  }
  return {oracle::Family::Normal};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

const std::vector<std::string> kCases = {"case1", "case2", "case3"};

config::RunConfig load_case(const std::string& name) {
  return config::load(std::string(DRSCC_CONFIG_DIR) + "/" + name + ".yaml");
}

// AC1: theta = 0 leaves the risk level untouched.
Outcome ac1() {
  double worst = 0.0;
  for (const auto& f : {GeneratorFamily::normal(), GeneratorFamily::student_t(3), GeneratorFamily::logistic()}) {
    for (double eps : {0.05, 0.1, 0.25, 0.4}) worst = std::max(worst, std::abs(lower_risk(f, eps, 0.0) - eps));
  }
  return {worst <= 1e-12, "max |lower_risk - eps| = " + fmt(worst)};
}

// AC2: eta* against a fine grid search with its own quadrature.
Outcome ac2() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> risk(0.02, 0.45), radius(0.001, 0.2);
  const std::vector<GeneratorFamily> families = {GeneratorFamily::normal(), GeneratorFamily::student_t(3),
                                                 GeneratorFamily::student_t(5), GeneratorFamily::logistic()};
  double worst = 0.0;
  for (int i = 0; i < 30; ++i) {
    const auto& f = families[static_cast<std::size_t>(i) % families.size()];
    const double eps = risk(rng), theta = radius(rng);
    const double got = solve_eta_star(f, eps, theta);
    const double want = oracle::eta_star_grid(to_oracle(f), eps, theta);
    worst = std::max(worst, std::abs(got - want));
  }
  return {worst <= 1e-5, "max |eta* - grid| = " + fmt(worst) + " over 30 triples"};
}

// AC3: with theta = 0 the tightened wall holds with probability 1 - eps.
Outcome ac3() {
  const double eps = 0.1;
  const long samples = 1000000;
  Outcome out;
  const std::vector<std::pair<GeneratorFamily, double>> families = {
      {GeneratorFamily::normal(), 2.0}, {GeneratorFamily::student_t(3), 1.0}, {GeneratorFamily::logistic(), 1.0}};
  std::uint64_t seed = 11;
  for (const auto& [family, sigma] : families) {
    const SafeCorridor corridor({BoxRegion{Vector::Constant(2, 0.0), Vector::Constant(2, 100.0)}});
    const auto t = tighten(corridor, uniform_ambiguity(corridor, family, sigma, 0.0, eps));
    const double scale = std::sqrt(sigma);
    std::mt19937_64 rng(seed++);
    std::normal_distribution<double> normal;
    std::student_t_distribution<double> student(family.dof() > 0 ? family.dof() : 3.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto draw = [&] {
      switch (family.kind()) {
        case elliptical::FamilyKind::Normal: return normal(rng);
        case elliptical::FamilyKind::StudentT: return student(rng);
        case elliptical::FamilyKind::Logistic: {
          double u = unif(rng);
          while (u <= 0.0) u = unif(rng);
          return std::log(u / (1.0 - u));
        }
      }
      return 0.0;
    };
    long upper_ok = 0, lower_ok = 0;
    for (long s = 0; s < samples; ++s) {
      if (100.0 + scale * draw() >= t.regions[0].upper[0]) ++upper_ok;
      if (0.0 + scale * draw() <= t.regions[0].lower[0]) ++lower_ok;
    }
    for (long ok : {upper_ok, lower_ok}) {
      const double cov = static_cast<double>(ok) / static_cast<double>(samples);
      if (std::abs(cov - (1.0 - eps)) > 0.002) out.pass = false;
      std::ostringstream os;
      os << std::fixed << std::setprecision(4) << cov;
      out.detail += family.name() + "=" + os.str() + " ";
    }
  }
  out.detail = "coverage (upper, lower) " + out.detail;
  return out;
}

// AC4: ADMM solver against exhaustive active-set enumeration.
Outcome ac4() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> vars(3, 30), eqs(0, 2);
  double obj_err = 0.0, x_err = 0.0, kkt = 0.0;
  int optimal = 0;
  for (int i = 0; i < 50; ++i) {
    const auto small = oracle::random_qp(rng, vars(rng), eqs(rng), 7);
    const auto ref = oracle::enumerate_active_sets(small);
    qp::StandardQp p{small.P, small.q, small.A, small.lower, small.upper};
    const auto sol = qp::solve(p);
    if (!ref.feasible || sol.status != qp::SolveStatus::Optimal) {
      return {false, "instance " + std::to_string(i) + " status " + qp::to_string(sol.status)};
    }
    ++optimal;
    obj_err = std::max(obj_err, std::abs(sol.objective - ref.objective) / std::max(1.0, std::abs(ref.objective)));
    x_err = std::max(x_err, (sol.x - ref.x).norm());
    kkt = std::max({kkt, sol.residuals.stationarity, sol.residuals.primal, sol.residuals.complementarity});
  }
  return {obj_err <= 1e-6 && x_err <= 1e-5 && kkt <= 1e-6,
          std::to_string(optimal) + "/50 optimal, objective err " + fmt(obj_err) + ", |x - x*| " + fmt(x_err) +
              ", max KKT residual " + fmt(kkt)};
}

// AC5: quadratic form against quadrature of the squared snap.
Outcome ac5() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> tau_dist(0.2, 3.0), coef(-10.0, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double tau = tau_dist(rng);
    std::vector<double> c(8);
    Vector cv(8);
    for (int j = 0; j < 8; ++j) cv[j] = c[static_cast<std::size_t>(j)] = coef(rng);
    const Matrix q = assemble_objective(1, 7, 4, {tau}, 1);
    const double got = cv.dot(q * cv);
    const double want = oracle::snap_energy(c, tau, 4);
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
  }
  return {worst <= 1e-6, "max relative error " + fmt(worst) + " over 100 segments"};
}

// AC6: sampled trajectories stay in their boxes.
Outcome ac6() {
  double worst = 0.0;
  int optimal = 0, skipped = 0, total = 0;
  std::string failures;
  for (const auto& name : kCases) {
    const auto cfg = load_case(name);
    const auto& options = cfg.benchmark.options;
    for (const auto& fam : options.families) {
      for (const auto& method : options.methods) {
        ++total;
        std::optional<AmbiguitySpec> amb;
        if (method.mode == PlanMode::Drscc) {
          amb = uniform_ambiguity(cfg.corridor, fam.family, fam.sigma, method.radius, method.risk);
        }
        PlanResult result;
        try {
          result = plan(cfg.corridor, cfg.path, cfg.spec, method.mode, amb ? &*amb : nullptr, cfg.solver);
        } catch (const InfeasibleTightening&) {
          ++skipped;
          continue;
        }
        if (!result.optimal()) {
          failures += " " + name + "/" + fam.label() + "/" + method.label();
          continue;
        }
        ++optimal;
        for (std::size_t i = 0; i < result.trajectory->segments().size(); ++i) {
          const auto& pts = result.trajectory->segments()[i].control_points();
          const auto& box = result.boxes[i];
          for (int s = 0; s < 200; ++s) {
            const Vector p = oracle::de_casteljau(pts, s / 199.0);
            for (Eigen::Index d = 0; d < p.size(); ++d) {
              worst = std::max({worst, box.lower[d] - p[d], p[d] - box.upper[d]});
            }
          }
        }
      }
    }
  }
  return {failures.empty() && worst <= 1e-7,
          std::to_string(optimal) + "/" + std::to_string(total) + " optimal (" + std::to_string(skipped) +
              " infeasible tightening), max exit " + fmt(worst) + (failures.empty() ? "" : ", not optimal:" + failures)};
}

// AC7: orderings of the Monte-Carlo benchmark.
Outcome ac7() {
  std::vector<robustness::BenchmarkReport> reports;
  for (const auto& name : kCases) {
    const auto cfg = load_case(name);
    auto options = cfg.benchmark.options;
    options.threads = std::max(1u, std::thread::hardware_concurrency());
    reports.push_back(robustness::run_benchmark({config::benchmark_case(cfg)}, options));
  }
  const auto& o = reports.front().options;
  std::string why;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t fi = 0; fi < o.families.size(); ++fi) {
    for (std::size_t mi = 0; mi < o.methods.size(); ++mi) {
      if (o.methods[mi].mode == PlanMode::Nominal) continue;
      int strong = 0;
      for (std::size_t ci = 0; ci < kCases.size(); ++ci) {
        const auto* nominal = reports[ci].find(kCases[ci], fi, 0);
        const auto* cell = reports[ci].find(kCases[ci], fi, mi);
        const std::string tag = kCases[ci] + "/" + o.families[fi].label() + "/" + o.methods[mi].label();
        if (!cell || !cell->available || !nominal || !nominal->available) {
          why += " (a) " + tag + " unavailable;";
          continue;
        }
        if (cell->violations >= nominal->violations) why += " (a) " + tag + " not below nominal;";
        const double ratio = cell->violations == 0 ? std::numeric_limits<double>::infinity()
                                                   : static_cast<double>(nominal->violations) / cell->violations;
        min_ratio = std::min(min_ratio, ratio);
        if (ratio >= 3.0) ++strong;
        if (!(cell->objective_ratio > 1.0)) why += " (c) " + tag + " objective ratio <= 1;";
        // Orderings against the neighbouring grid cells.
        for (std::size_t mj = 0; mj < o.methods.size(); ++mj) {
          const auto& a = o.methods[mi];
          const auto& b = o.methods[mj];
          if (b.mode == PlanMode::Nominal || mj == mi) continue;
          const auto* other = reports[ci].find(kCases[ci], fi, mj);
          if (!other || !other->available) continue;
          if (a.risk == b.risk && a.radius < b.radius) {
            if (other->violations > cell->violations) why += " (b) " + tag + " theta order;";
            if (other->objective_ratio < cell->objective_ratio) why += " (c) " + tag + " theta order;";
          }
          if (a.radius == b.radius && a.risk < b.risk && other->violations < cell->violations) {
            why += " (b) " + tag + " eps order;";
          }
        }
      }
      if (strong < 2) why += " (a) " + o.families[fi].label() + "/" + o.methods[mi].label() + " ratio >= 3 in " +
                             std::to_string(strong) + "/3 cases;";
    }
  }
  return {why.empty(), why.empty() ? "all orderings hold, min nominal/DRSCC violation ratio " + fmt(min_ratio) : why};
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + std::string(DRSCC_CLI_PATH) + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// AC8: fixed-seed benchmark CSV is byte-identical across runs and thread counts.
Outcome ac8() {
  std::random_device rd;
  const auto root = fs::temp_directory_path() / ("drscc_ac8_" + std::to_string(rd()));
  const std::string cfg = std::string(DRSCC_CONFIG_DIR) + "/case1.yaml";
  const unsigned many = std::max(3u, std::thread::hardware_concurrency());
  const std::vector<std::pair<std::string, unsigned>> runs = {{"a", 1}, {"b", 1}, {"c", many}};
  std::vector<std::string> csv;
  for (const auto& [dir, threads] : runs) {
    const int code = run_cli("benchmark " + cfg + " --seed 12345 --threads " + std::to_string(threads) + " --out " +
                             (root / dir).string());
    if (code != 0) {
      fs::remove_all(root);
      return {false, "benchmark run exited " + std::to_string(code)};
    }
    csv.push_back(slurp(root / dir / "benchmark.csv"));
  }
  fs::remove_all(root);
  const bool same = !csv[0].empty() && csv[0] == csv[1] && csv[0] == csv[2];
  return {same, std::string(same ? "identical" : "differing") + " benchmark.csv for threads 1, 1, " +
                    std::to_string(many) + " (" + std::to_string(csv[0].size()) + " bytes)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> checks = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5}, {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}};
  bool all = true;
  for (const auto& [name, fn] : checks) {
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << name << ' ' << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << "  [" << fmt(secs) << " s]"
              << std::endl;
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
