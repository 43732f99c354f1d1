// Command-line front end: run / compare / check.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hqmpc/dynamics.hpp"
#include "hqmpc/errors.hpp"
#include "hqmpc/scenario.hpp"

namespace fs = std::filesystem;
using namespace hqmpc;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitRuntime = 3;

void writeFile(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput(fmt::format("cannot write {}", path.string()));
  out << content;
  if (!out) throw InvalidInput(fmt::format("failed writing {}", path.string()));
}

fs::path prepareOut(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidInput(fmt::format("out: cannot create {}: {}", dir, ec.message()));
  return fs::path(dir);
}

int cmdRun(const std::string& scenario_path, const std::string& controller, const std::string& out_dir,
           bool timing) {
  const Scenario scenario = loadScenario(scenario_path);
  const ResolvedScenario resolved = resolve(scenario);
  const fs::path out = prepareOut(out_dir);
  spdlog::info("running {} on '{}' ({} steps)", controller, scenario.name, resolved.config.horizon.N);
  const RunOutput run = runController(resolved, controller);
  writeFile(out / "trajectory.csv", trajectoryCsv(run.log, resolved.model, timing));
  writeFile(out / "summary.json", summaryJson(scenario, run, timing));
  spdlog::info("accumulated error norm {:.6g}; wrote {}", run.metrics.accumulated_total, out.string());
  return 0;
}

int cmdCompare(const std::string& scenario_path, const std::string& out_dir, const std::string& baseline,
               const std::string& candidate, bool timing) {
  const Scenario scenario = loadScenario(scenario_path);
  const ResolvedScenario resolved = resolve(scenario);
  const fs::path out = prepareOut(out_dir);
  spdlog::info("comparing {} against {} on '{}'", candidate, baseline, scenario.name);
  const RunOutput base = runController(resolved, baseline);
  const RunOutput cand = runController(resolved, candidate);
  writeFile(out / fmt::format("trajectory_{}.csv", baseline == candidate ? "baseline" : baseline),
            trajectoryCsv(base.log, resolved.model, timing));
  writeFile(out / fmt::format("trajectory_{}.csv", baseline == candidate ? "candidate" : candidate),
            trajectoryCsv(cand.log, resolved.model, timing));
  writeFile(out / "compare.json", compareJson(scenario, base, cand, timing));
  const double ratio = cand.metrics.accumulated_total / base.metrics.accumulated_total;
  spdlog::info("accumulated error norm: {} {:.6g}, {} {:.6g}, ratio {:.4f}", baseline, base.metrics.accumulated_total,
               candidate, cand.metrics.accumulated_total, ratio);
  return 0;
}

struct CheckResult {
  std::string name;
  bool skipped = false;
  double worst = 0.0;
  double tolerance = 0.0;
  bool pass() const { return skipped || worst <= tolerance; }
};

int cmdCheck(const std::string& model_path, int samples, unsigned seed) {
  const RobotModel model = loadModel(model_path);
  const int n = model.n();
  const bool constrained = model.nc() > 0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::vector<CheckResult> checks = {
      {"mass_matrix_symmetry", false, 0.0, 1e-10},
      {"mass_matrix_positive_definite", false, 0.0, 0.0},
      {"nc_idempotent", !constrained, 0.0, 1e-10},
      {"jc_nc_zero", !constrained, 0.0, 1e-10},
      {"nc_minv_symmetric", !constrained, 0.0, 1e-10},
      {"constrained_accel_vs_kkt", !constrained, 0.0, 1e-8},
  };
  for (int s = 0; s < samples; ++s) {
    PlantState state;
    state.q = VectorXd::NullaryExpr(n, [&]() { return angle(rng); });
    state.qd = VectorXd::NullaryExpr(n, [&]() { return unit(rng); });
    const VectorXd torque = VectorXd::NullaryExpr(model.m(), [&]() { return 5.0 * unit(rng); });
    const DynamicsTerms t = evalDynamics(model, state);
    const double scale = std::max(1.0, t.M.cwiseAbs().maxCoeff());
    checks[0].worst = std::max(checks[0].worst, infNorm(t.M - t.M.transpose()) / scale);
    const double min_eig = minEigenvalue(symmetrize(t.M));
    checks[1].worst = std::max(checks[1].worst, min_eig > 0.0 ? 0.0 : -min_eig + 1.0);
    if (!constrained) continue;
    checks[2].worst = std::max(checks[2].worst, infNorm(t.Nc * t.Nc - t.Nc));
    checks[3].worst = std::max(checks[3].worst, infNorm(t.Jc * t.Nc));
    checks[4].worst = std::max(checks[4].worst, infNorm(t.Nc * t.Minv - t.Minv * t.Nc.transpose()));
    // Index-1 DAE: [M Jc^T; Jc 0] [qdd; F] = [U^T tau - b; -Jc_dot qd].
    const int nc = model.nc();
    MatrixXd kkt = MatrixXd::Zero(n + nc, n + nc);
    kkt.topLeftCorner(n, n) = t.M;
    kkt.topRightCorner(n, nc) = t.Jc.transpose();
    kkt.bottomLeftCorner(nc, n) = t.Jc;
    VectorXd rhs(n + nc);
    rhs << model.selection().transpose() * torque - t.b, -t.Jc_dot * state.qd;
    const VectorXd sol = kkt.fullPivLu().solve(rhs);
    const VectorXd qdd = constrainedForwardDynamics(t, model, torque);
    checks[5].worst = std::max(checks[5].worst, (qdd - sol.head(n)).lpNorm<Eigen::Infinity>() /
                                                    std::max(1.0, sol.head(n).lpNorm<Eigen::Infinity>()));
  }
  bool all = true;
  fmt::print("model '{}': n = {}, m = {}, nc = {}, {} random states\n", model.name, n, model.m(), model.nc(), samples);
  for (const auto& c : checks) {
    if (c.skipped) {
      fmt::print("SKIP {:<32} (no constraints)\n", c.name);
      continue;
    }
    all = all && c.pass();
    fmt::print("{} {:<32} worst {:.3e} (tol {:.1e})\n", c.pass() ? "PASS" : "FAIL", c.name, c.worst, c.tolerance);
  }
  return all ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical QCQP model predictive control experiments"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string scenario_path, controller, out_dir, baseline = "wbc", candidate = "mpc", model_path;
  bool timing = false;
  int samples = 1000;
  unsigned seed = 1;
  const std::vector<std::string> controllers = {"wbc", "mpc"};

  CLI::App* run = app.add_subcommand("run", "Run one controller on a scenario");
  run->add_option("--scenario", scenario_path, "Scenario file")->required();
  run->add_option("--controller", controller, "Controller: wbc or mpc")->required()->check(CLI::IsMember(controllers));
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_flag("--timing", timing, "Record wall-clock times (outputs are no longer reproducible)");

  CLI::App* compare = app.add_subcommand("compare", "Run two controllers on the same scenario");
  compare->add_option("--scenario", scenario_path, "Scenario file")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();
  compare->add_option("--baseline", baseline, "Baseline controller")->check(CLI::IsMember(controllers));
  compare->add_option("--candidate", candidate, "Candidate controller")->check(CLI::IsMember(controllers));
  compare->add_flag("--timing", timing, "Record wall-clock times (outputs are no longer reproducible)");

  CLI::App* check = app.add_subcommand("check", "Check dynamics invariants of a model at random states");
  check->add_option("--model", model_path, "Model file")->required();
  check->add_option("--samples", samples, "Number of random states")->check(CLI::PositiveNumber);
  check->add_option("--seed", seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  auto logger = spdlog::stderr_color_mt("hqmpc");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    if (*run) return cmdRun(scenario_path, controller, out_dir, timing);
    if (*compare) return cmdCompare(scenario_path, out_dir, baseline, candidate, timing);
    if (*check) return cmdCheck(model_path, samples, seed);
  } catch (const InvalidInput& e) {
    spdlog::error("invalid input: {}", e.what());
    return kExitInvalid;
  } catch (const SubproblemFailure& e) {
    spdlog::error("aborted in subproblem {}: {}", e.subproblem(), e.what());
    return kExitRuntime;
  } catch (const NominalInfeasible& e) {
    spdlog::error("nominal trajectory failed at step {}: {}", e.step(), e.what());
    return kExitRuntime;
  } catch (const NumericalFailure& e) {
    spdlog::error("numerical failure: {}", e.what());
    return kExitRuntime;
  }
  return kExitInvalid;
}
