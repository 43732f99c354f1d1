// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "hqmpc/dynamics.hpp"
#include "hqmpc/mpc.hpp"
#include "hqmpc/qcqp.hpp"
#include "hqmpc/scenario.hpp"
#include "hqmpc/simulation.hpp"
#include "hqmpc/transcription.hpp"
#include "hqmpc/wbc.hpp"
#include "oracles.hpp"

using namespace hqmpc;

namespace {

const char* const kModels[] = {"pendulum.json", "two_link.json", "mini_scorpio.json", "mini_scorpio_nl.json"};

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double scaled(const VectorXd& err, const VectorXd& ref) {
  return err.lpNorm<Eigen::Infinity>() / std::max(1.0, ref.lpNorm<Eigen::Infinity>());
}

PlantState randomState(std::mt19937_64& rng, const RobotModel& m) {
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::normal_distribution<double> g;
  PlantState s{VectorXd(m.n()), VectorXd(m.n()), 0.0};
  for (int i = 0; i < m.n(); ++i) {
    s.q(i) = angle(rng);
    s.qd(i) = g(rng);
  }
  return s;
}

MatrixXd randomMatrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g;
  return MatrixXd::NullaryExpr(rows, cols, [&] { return g(rng); });
}

struct Runs {
  ResolvedScenario r;
  Metrics wbc, mpc;
  double seconds = 0.0;
};

const Runs& scenarioRuns() {
  static const Runs runs = [] {
    const auto start = std::chrono::steady_clock::now();
    Runs out;
    out.r = resolve(loadScenario(oracle::scenarioPath("two_task_mini_scorpio.json")));
    const ResolvedScenario& r = out.r;
    out.wbc = metrics(wbcRun(r.model, r.tasks, r.trajectories, r.x0, r.config.horizon, r.config.sim), r.model);
    out.mpc = metrics(mpcRun(r.model, r.tasks, r.trajectories, r.x0, r.config).log, r.model);
    out.seconds = elapsed(start);
    return out;
  }();
  return runs;
}

// ---------------------------------------------------------------------------

Outcome hierarchyOrdering() {
  const Runs& runs = scenarioRuns();
  const double wbc = runs.wbc.ordering_fraction.at(0);
  const double mpc = runs.mpc.ordering_fraction.at(0);
  const bool pass = wbc >= 0.95 && mpc >= 1.0 && runs.seconds <= 60.0;
  return {pass, fmt::format("ordering fraction (tol 1e-3) wbc {:.4f}, mpc {:.4f}; both runs {:.2f} s", wbc, mpc,
                            runs.seconds)};
}

Outcome improvement() {
  const Runs& runs = scenarioRuns();
  const double ratio = runs.mpc.accumulated_total / runs.wbc.accumulated_total;
  return {ratio <= 0.99, fmt::format("accumulated error norm wbc {:.4f}, mpc {:.4f}, ratio {:.4f} (reference 0.735)",
                                     runs.wbc.accumulated_total, runs.mpc.accumulated_total, ratio)};
}

Outcome dynamicsIdentities() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g;
  double idem = 0, annihilate = 0, symmetric = 0, accel = 0;
  int states = 0;
  for (const char* name : kModels) {
    const RobotModel m = loadModel(oracle::modelPath(name));
    for (int k = 0; k < 250; ++k, ++states) {
      const PlantState s = randomState(rng, m);
      const VectorXd tau = 5.0 * VectorXd::NullaryExpr(m.m(), [&] { return g(rng); });
      const DynamicsTerms t = evalDynamics(m, s);
      idem = std::max(idem, (t.Nc * t.Nc - t.Nc).lpNorm<Eigen::Infinity>());
      if (m.nc() > 0) annihilate = std::max(annihilate, (t.Jc * t.Nc).lpNorm<Eigen::Infinity>());
      symmetric = std::max(symmetric, (t.Nc * t.Minv - t.Minv * t.Nc.transpose()).lpNorm<Eigen::Infinity>());
      const oracle::DaeSolution ref = oracle::kktDae(m, s.q, s.qd, tau);
      accel = std::max(accel, scaled(constrainedForwardDynamics(t, m, tau) - ref.qdd, ref.qdd));
    }
  }
  const double secs = elapsed(start);
  const bool pass = idem <= 1e-10 && annihilate <= 1e-10 && symmetric <= 1e-10 && accel <= 1e-8 && secs <= 30.0;
  return {pass, fmt::format("{} states: |NcNc-Nc| {:.2e}, |JcNc| {:.2e}, |NcMinv-MinvNc^T| {:.2e}, "
                            "qdd vs KKT-DAE {:.2e}",
                            states, idem, annihilate, symmetric, accel)};
}

Outcome wbcOptimality() {
  std::mt19937_64 rng(102);
  std::normal_distribution<double> g;
  double closed = 0, decoupling = 0;
  int instances = 0;
  for (const char* name : {"two_link.json", "mini_scorpio.json"}) {
    const RobotModel m = loadModel(oracle::modelPath(name));
    MatrixXd U = MatrixXd::Zero(m.m(), m.n());
    for (int i = 0; i < m.m(); ++i) U(i, m.actuated[i]) = 1.0;
    for (int k = 0; k < 100; ++k, ++instances) {
      const PlantState s = randomState(rng, m);
      const DynamicsTerms t = evalDynamics(m, s);
      // Oracle: min torque^T W torque subject to the task acceleration, with
      // the constrained terms rebuilt from the Lagrangian dynamics.
      const MatrixXd M = oracle::massMatrix(m, s.q);
      const MatrixXd Minv = M.inverse();
      const VectorXd b = oracle::bias(m, s.q, s.qd);
      MatrixXd Nc = MatrixXd::Identity(m.n(), m.n());
      VectorXd bc = b;
      if (m.nc() > 0) {
        const oracle::ConstraintTerms c = oracle::constraints(m, s.q, s.qd);
        const MatrixXd lambda = (c.Jc * Minv * c.Jc.transpose()).inverse();
        Nc -= Minv * c.Jc.transpose() * lambda * c.Jc;
        bc = Nc.transpose() * b + c.Jc.transpose() * lambda * c.Jcdot_qd;
      }
      TaskKinematics task;
      task.J = randomMatrix(rng, 1, m.n());
      task.Jdot_qd = randomMatrix(rng, 1, 1);
      task.x = task.xd = VectorXd::Zero(1);
      const VectorXd xdd = randomMatrix(rng, 1, 1);
      const MatrixXd mcal = task.J * Nc * Minv * U.transpose();
      const VectorXd rhs = xdd - task.Jdot_qd + task.J * Minv * bc;
      const MatrixXd W = U * Nc * Minv * U.transpose();
      const VectorXd expected = oracle::equalityQp(0.5 * (W + W.transpose()), mcal, rhs);
      closed = std::max(closed, scaled(wbcSingleTask(t, m, task, xdd).torque - expected, expected));

      TaskKinematics second;
      second.J = randomMatrix(rng, 1, m.n());
      second.Jdot_qd = randomMatrix(rng, 1, 1);
      second.x = second.xd = VectorXd::Zero(1);
      const HierarchicalCommand cmd =
          wbcHierarchy(t, m, {task, second}, {xdd, VectorXd(randomMatrix(rng, 1, 1))});
      const MatrixXd map = task.J * t.Minv * t.Nc.transpose();
      const VectorXd generalized = cmd.prec_jacobians[1].transpose() * cmd.forces[1];
      const double scale = std::max(1.0, map.lpNorm<Eigen::Infinity>() * generalized.lpNorm<Eigen::Infinity>());
      decoupling = std::max(decoupling, (map * generalized).lpNorm<Eigen::Infinity>() / scale);
    }
  }
  return {closed <= 1e-8 && decoupling <= 1e-8,
          fmt::format("{} instances: closed form vs equality-QP oracle {:.2e}, decoupling residual {:.2e}", instances,
                      closed, decoupling)};
}

VectorXd oracleRhs(const RobotModel& m, const VectorXd& x, const VectorXd& u, double sigma) {
  const int n = m.n();
  const VectorXd q = x.head(n), qd = x.tail(n);
  VectorXd force = -oracle::bias(m, q, qd);
  for (int i = 0; i < m.m(); ++i) force(m.actuated[i]) += u(i);
  if (m.nc() > 0) force -= oracle::constraints(m, q, qd).Jc.transpose() * u.tail(m.nc());
  VectorXd out(2 * n);
  out << qd, oracle::massMatrix(m, q).ldlt().solve(force);
  return sigma * out;
}

Outcome transcriptionFidelity() {
  std::mt19937_64 rng(103);
  double rollout = 0;
  for (int Np : {1, 5, 10}) {
    for (int trial = 0; trial < 20; ++trial) {
      const int nx = 4, nu = 3;
      std::vector<LinearizedStep> steps;
      for (int i = 0; i < Np; ++i) {
        steps.push_back({MatrixXd::Identity(nx, nx) + 0.3 * randomMatrix(rng, nx, nx), randomMatrix(rng, nx, nu),
                         randomMatrix(rng, nx, 1)});
      }
      const VectorXd x0 = randomMatrix(rng, nx, 1);
      const VectorXd inputs = randomMatrix(rng, Np * nu, 1);
      const VectorXd stacked = stackPrediction(steps).predict(x0, inputs);
      VectorXd x = x0;
      for (int i = 0; i < Np; ++i) {
        x = steps[i].A * x + steps[i].B * inputs.segment(i * nu, nu) + steps[i].r;
        rollout = std::max(rollout, (stacked.segment((i + 1) * nx, nx) - x).norm() / std::max(1.0, x.norm()));
      }
    }
  }

  double fd = 0;
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  for (const char* name : kModels) {
    const RobotModel m = loadModel(oracle::modelPath(name));
    const int n = m.n(), nx = 2 * n, nu = m.m() + m.nc();
    const double sigma = 0.1, h = 1e-6;
    for (int k = 0; k < 50; ++k) {
      VectorXd x(nx);
      for (int i = 0; i < n; ++i) x(i) = angle(rng);
      x.tail(n) = randomMatrix(rng, n, 1);
      const VectorXd u = randomMatrix(rng, nu, 1);
      const ContinuousLinearization lin = linearizeStep(m, x, u, sigma);
      MatrixXd a_fd(nx, nx), b_fd(nx, nu);
      for (int j = 0; j < nx; ++j) {
        VectorXd xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        a_fd.col(j) = (oracleRhs(m, xp, u, sigma) - oracleRhs(m, xm, u, sigma)) / (2 * h);
      }
      for (int j = 0; j < nu; ++j) {
        VectorXd up = u, um = u;
        up(j) += h;
        um(j) -= h;
        b_fd.col(j) = (oracleRhs(m, x, up, sigma) - oracleRhs(m, x, um, sigma)) / (2 * h);
      }
      fd = std::max({fd, (lin.A - a_fd).norm() / a_fd.norm(), (lin.B - b_fd).norm() / b_fd.norm()});
    }
  }

  const ResolvedScenario r = resolve(loadScenario(oracle::scenarioPath("two_task_mini_scorpio.json")));
  const NominalTrajectory nom = buildNominal(r.model, r.x0, r.tasks, r.trajectories, r.config.horizon.dt());
  double weak = -std::numeric_limits<double>::infinity();
  for (const auto& c : hierarchyConstraints(r.model, r.tasks, r.trajectories, nom, r.config.hierarchy)) {
    weak = std::max(weak, c.value(nom.q[c.step]));
  }
  return {rollout <= 1e-10 && fd <= 1e-5 && weak <= 1e-10,
          fmt::format("stack vs rollout {:.2e} (Np 1, 5, 10); linearization vs finite differences {:.2e}; "
                      "largest weak-hierarchy value along the nominal {:.2e}",
                      rollout, fd, weak)};
}

Outcome solverCorrectness() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(104);
  std::uniform_int_distribution<int> vars(2, 12), eqs(0, 4), ineqs(0, 3);
  double obj = 0, kkt = 0;
  int optimal = 0;
  for (int k = 0; k < 100; ++k) {
    const int n = vars(rng);
    const int p = std::min(eqs(rng), n - 1);
    const int m = ineqs(rng);
    const int active = m == 0 ? 0 : std::uniform_int_distribution<int>(0, m)(rng);
    const oracle::KnownQcqp known = oracle::knownQcqp(rng, n, p, m, active);
    const Solution s = solve(known.problem);
    if (s.status != SolverStatus::Optimal) continue;
    ++optimal;
    obj = std::max(obj, std::abs(s.objective - known.f_star) / std::max(1.0, std::abs(known.f_star)));
    const KktResiduals r = kktResiduals(known.problem, s.x, s.eq_duals, s.ineq_duals);
    kkt = std::max({kkt, r.stationarity, r.primal_eq, r.primal_ineq, r.complementarity});
  }

  // min x^2 s.t. 1 - x <= 0, and the projection of (2, 2) onto the unit disk.
  CanonicalQcqp a;
  a.P = MatrixXd::Constant(1, 1, 2.0);
  a.q = VectorXd::Zero(1);
  a.A = MatrixXd::Zero(0, 1);
  a.b = VectorXd::Zero(0);
  a.inequalities.push_back({MatrixXd::Zero(1, 1), VectorXd::Constant(1, -1.0), 1.0});
  const Solution sa = solve(a);
  CanonicalQcqp d;
  d.P = 2.0 * MatrixXd::Identity(2, 2);
  d.q = VectorXd::Constant(2, -4.0);
  d.constant = 8.0;
  d.A = MatrixXd::Zero(0, 2);
  d.b = VectorXd::Zero(0);
  d.inequalities.push_back({2.0 * MatrixXd::Identity(2, 2), VectorXd::Zero(2), -1.0});
  const Solution sd = solve(d);
  const double analytic = std::max({std::abs(sa.x(0) - 1.0), std::abs(sa.objective - 1.0),
                                    (sd.x - VectorXd::Constant(2, 1 / std::sqrt(2.0))).lpNorm<Eigen::Infinity>()});
  const double secs = elapsed(start);
  const bool pass = optimal == 100 && obj <= 1e-6 && kkt <= 1e-8 && analytic <= 1e-9 &&
                    sa.status == SolverStatus::Optimal && sd.status == SolverStatus::Optimal && secs <= 60.0;
  return {pass, fmt::format("{}/100 optimal; objective vs known optimum {:.2e}; KKT {:.2e}; analytic {:.2e}",
                            optimal, obj, kkt, analytic)};
}

Outcome plantIntegration() {
  const RobotModel pend = loadModel(oracle::modelPath("pendulum.json"));
  PlantState s{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 0.5), 0.0};
  auto energy = [&](const PlantState& x) {
    return 0.5 * x.qd.dot(oracle::massMatrix(pend, x.q) * x.qd) + oracle::potential<double>(pend, x.q);
  };
  const double e0 = energy(s);
  double energy_drift = 0;
  for (int i = 0; i < 100; ++i) {
    s = simulateStep(pend, s, VectorXd::Zero(1), 0.01);
    energy_drift = std::max(energy_drift, std::abs(energy(s) - e0) / std::abs(e0));
  }

  const RobotModel nl = loadModel(oracle::modelPath("mini_scorpio_nl.json"));
  PlantState x{(VectorXd(4) << -M_PI / 4, M_PI / 2, -M_PI / 2, M_PI / 2).finished(), VectorXd::Zero(4), 0.0};
  std::mt19937_64 rng(105);
  std::normal_distribution<double> g(0.0, 2.0);
  double constraint_drift = 0;
  for (int i = 0; i < 80; ++i) {
    x = simulateStep(nl, x, VectorXd::NullaryExpr(nl.m(), [&] { return g(rng); }), 0.01);
    const oracle::Vec2<double> p = oracle::point<double>(nl, x.q, nl.constraints[0].link, nl.constraints[0].point);
    constraint_drift = std::max(constraint_drift, (p - nl.constraintTarget()).lpNorm<Eigen::Infinity>());
  }
  const Runs& runs = scenarioRuns();
  const double scenario_drift = std::max(runs.wbc.max_constraint_drift, runs.mpc.max_constraint_drift);
  return {energy_drift <= 1e-6 && constraint_drift <= 1e-4 && scenario_drift <= 1e-4,
          fmt::format("pendulum energy drift {:.2e} over 1 s; constraint drift {:.2e} (nonlinear constraint, "
                      "random torque) and {:.2e} (bundled scenario) over 0.8 s",
                      energy_drift, constraint_drift, scenario_drift)};
}

std::string readFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / fmt::format("hqmpc_acceptance_{}", std::random_device{}());
  const std::string scenario = oracle::scenarioPath("two_task_mini_scorpio.json");
  for (const char* run : {"a", "b"}) {
    const std::string cmd = fmt::format("\"{}\" --log-level off compare --scenario \"{}\" --out \"{}\"", cli, scenario,
                                        (root / run).string());
    if (std::system(cmd.c_str()) != 0) return {false, fmt::format("command failed: {}", cmd)};
  }
  int files = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const fs::path other = root / "b" / entry.path().filename();
    if (!fs::exists(other) || readFile(entry.path()) != readFile(other)) {
      return {false, fmt::format("{} differs between runs", entry.path().filename().string())};
    }
    ++files;
  }
  fs::remove_all(root);
  return {files == 3, fmt::format("{} output files byte-identical across two runs", files)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <path to hqmpc executable>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  criterion(1, "hierarchy ordering", hierarchyOrdering);
  criterion(2, "mpc improves on wbc", improvement);
  criterion(3, "dynamics identities", dynamicsIdentities);
  criterion(4, "wbc optimality", wbcOptimality);
  criterion(5, "transcription fidelity", transcriptionFidelity);
  criterion(6, "solver correctness", solverCorrectness);
  criterion(7, "plant integration", plantIntegration);
  criterion(8, "end-to-end determinism", [&] { return determinism(cli); });
  return failures == 0 ? 0 : 1;
}
