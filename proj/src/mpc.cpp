#include "hqmpc/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "hqmpc/errors.hpp"
#include "hqmpc/wbc.hpp"

namespace hqmpc {

std::string toString(FeedbackMode mode) { return mode == FeedbackMode::Measured ? "measured" : "predicted"; }

void validate(const MpcConfig& config, int task_count) {
  validate(config.horizon);
  validate(config.hierarchy, task_count);
  validate(config.solver);
  validate(config.sim);
  if (config.sim.dt_sim > config.horizon.dt() * (1.0 + 1e-12)) {
    throw InvalidInput("sim.dt_sim: must not exceed the control period");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point since) { return std::chrono::duration<double>(Clock::now() - since).count(); }

void checkInputs(const RobotModel& model, const std::vector<TaskDef>& tasks,
                 const std::vector<TaskTrajectory>& trajectories, const PlantState& x0, int N) {
  validate(model);
  validate(model, tasks);
  checkState(model, x0);
  if (tasks.size() != trajectories.size()) throw InvalidInput("one trajectory per task is required");
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (tasks[k].priority != static_cast<int>(k) + 1) throw InvalidInput("tasks must be sorted by priority");
    if (trajectories[k].steps() != N) {
      throw InvalidInput(fmt::format("trajectory for task '{}' must have N + 1 = {} samples", tasks[k].name, N + 1));
    }
  }
}

StepLog makeRow(const RobotModel& model, const std::vector<TaskDef>& tasks,
                const std::vector<TaskTrajectory>& trajectories, int i, double t, const VectorXd& q,
                const VectorXd& qd, const VectorXd& torque) {
  StepLog row;
  row.t = t;
  row.q = q;
  row.qd = qd;
  row.torque = torque;
  const DynamicsTerms terms = evalDynamics(model, PlantState{q, qd, t});
  row.fc = constraintForce(terms, model, torque);
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const VectorXd x = taskPosition(model, tasks[k].map, q);
    const VectorXd& des = trajectories[k].position[i];
    row.x.push_back(x);
    row.x_des.push_back(des);
    row.err.push_back(des - x);
    row.err_norm.push_back((des - x).norm());
  }
  return row;
}

std::vector<TaskTrajectory> windows(const std::vector<TaskTrajectory>& trajectories, int first, int count) {
  std::vector<TaskTrajectory> out;
  for (const auto& t : trajectories) out.push_back(window(t, first, count));
  return out;
}

}  // namespace

MpcResult mpcRun(const RobotModel& model, const std::vector<TaskDef>& tasks,
                 const std::vector<TaskTrajectory>& trajectories, const PlantState& x0, const MpcConfig& config) {
  const HorizonSpec& hz = config.horizon;
  validate(config, static_cast<int>(tasks.size()));
  checkInputs(model, tasks, trajectories, x0, hz.N);
  const auto start = Clock::now();
  const double dt = hz.dt();
  const int n = model.n();
  const int m = model.m();
  const int nx = 2 * n;
  const int nu = m + model.nc();

  TranscriptionOptions topts;
  topts.hierarchy = config.hierarchy_options;
  topts.W_c = config.W_c;

  MpcResult result;
  result.log.controller = "mpc";
  for (const auto& t : tasks) result.log.task_names.push_back(t.name);

  PlantState x_tilde = x0;
  x_tilde.t = hz.t0;
  VectorXd warm;
  VectorXd last_torque = VectorXd::Zero(m);
  for (int s = 0; s < hz.subproblems(); ++s) {
    const int first = s * hz.Ne;
    const std::vector<TaskTrajectory> win = windows(trajectories, first, hz.Np);
    NominalTrajectory nominal;
    try {
      nominal = buildNominal(model, x_tilde, tasks, win, dt, config.nominal);
    } catch (const NominalInfeasible& e) {
      throw SubproblemFailure(s, fmt::format("subproblem {} (step {}): nominal build failed at window step {}: {}", s,
                                             first, e.step(), e.what()));
    }
    std::vector<HierarchyConstraint> hier;
    if (config.hierarchy_constraints && tasks.size() > 1) {
      hier = hierarchyConstraints(model, tasks, win, nominal, config.hierarchy, config.hierarchy_options);
    }
    std::vector<LinearizedStep> lin;
    for (int i = 0; i < hz.Np; ++i) {
      VectorXd x(nx);
      x << nominal.q[i], nominal.qd[i];
      lin.push_back(discretize(linearizeStep(model, x, nominal.u[i], hz.sigma(), first + i), 1.0 / hz.Np));
    }
    const MatrixXd W_c =
        config.W_c.size() == 0 ? MatrixXd(1e-2 * MatrixXd::Identity(model.nc(), model.nc())) : config.W_c;
    VectorXd xs(nx);
    xs << x_tilde.q, x_tilde.qd;
    const QcqpProblem problem = assembleQcqp(stackPrediction(lin), quadraticCost(model, tasks, win, nominal, W_c),
                                             kinematicEqualities(model, nominal), hier, xs, n);
    CanonicalQcqp qcqp = problem.condensed();
    // Normalize the objective so the absolute gap tolerance is meaningful.
    const double scale = std::max(1.0, qcqp.P.cwiseAbs().maxCoeff());
    qcqp.P /= scale;
    qcqp.q /= scale;
    qcqp.constant /= scale;

    const bool use_warm = config.warm_start && warm.size() == qcqp.q.size();
    const Solution sol = solve(qcqp, config.solver, use_warm ? &warm : nullptr);
    if (sol.status != SolverStatus::Optimal) {
      VectorXd nominal_states(problem.stateVariables());
      for (int i = 0; i <= hz.Np; ++i) nominal_states.segment(i * nx, nx) << nominal.q[i], nominal.qd[i];
      throw SubproblemFailure(
          s, fmt::format("subproblem {} (step {}): solver status {} ({}); {} hierarchy constraints, "
                         "largest value along the nominal {:.6g}",
                         s, first, toString(sol.status), sol.message, hier.size(),
                         hier.empty() ? 0.0 : problem.maxInequality(nominal_states)));
    }
    const VectorXd states = problem.prediction.predict(xs, sol.x);

    SubproblemRecord rec;
    rec.index = s;
    rec.first_step = first;
    rec.status = toString(sol.status);
    rec.iterations = sol.iterations;
    rec.outer_iterations = sol.outer_iterations;
    rec.objective = sol.objective * scale;
    rec.max_hierarchy_value = hier.empty() ? 0.0 : problem.maxInequality(states);
    rec.local_only = sol.local_only;
    rec.wall_time = sol.wall_time;
    result.log.subproblems.push_back(rec);

    // Commit u*_0 .. u*_{Ne-1}.
    for (int j = 0; j < hz.Ne; ++j) {
      const int i = first + j;
      const VectorXd u = sol.x.segment(j * nu, nu);
      const VectorXd torque = u.head(m);
      VectorXd x_now(nx);
      if (config.feedback == FeedbackMode::Measured) {
        x_now << x_tilde.q, x_tilde.qd;
      } else {
        x_now = states.segment(j * nx, nx);
      }
      StepLog row = makeRow(model, tasks, trajectories, i, hz.t0 + i * dt, x_now.head(n), x_now.tail(n), torque);
      row.solver_status = rec.status;
      row.solver_iters = j == 0 ? sol.iterations : 0;
      row.solve_ms = j == 0 ? sol.wall_time * 1e3 : 0.0;
      result.log.rows.push_back(std::move(row));
      result.states.push_back(x_now);
      result.inputs.push_back(u);
      if (config.feedback == FeedbackMode::Measured) {
        x_tilde = simulateStep(model, x_tilde, torque, dt, config.sim);
      } else {
        const VectorXd next = states.segment((j + 1) * nx, nx);
        x_tilde = PlantState{next.head(n), next.tail(n), hz.t0 + (i + 1) * dt};
      }
      last_torque = torque;
    }
    // Shifted warm start: drop the committed inputs and repeat the last one.
    if (config.warm_start) {
      warm.resize(sol.x.size());
      const Eigen::Index keep = sol.x.size() - hz.Ne * nu;
      warm.head(keep) = sol.x.tail(keep);
      for (int j = 0; j < hz.Ne; ++j) warm.segment(keep + j * nu, nu) = sol.x.tail(nu);
    }
  }
  VectorXd x_end(nx);
  x_end << x_tilde.q, x_tilde.qd;
  StepLog row = makeRow(model, tasks, trajectories, hz.N, hz.t0 + hz.N * dt, x_tilde.q, x_tilde.qd, last_torque);
  row.solver_status = "hold";
  result.log.rows.push_back(std::move(row));
  result.states.push_back(x_end);
  result.log.wall_time = seconds(start);
  return result;
}

TrajectoryLog wbcRun(const RobotModel& model, const std::vector<TaskDef>& tasks,
                     const std::vector<TaskTrajectory>& trajectories, const PlantState& x0, const HorizonSpec& horizon,
                     const SimulationOptions& sim) {
  validate(horizon);
  validate(sim);
  checkInputs(model, tasks, trajectories, x0, horizon.N);
  const auto start = Clock::now();
  const double dt = horizon.dt();
  TrajectoryLog log;
  log.controller = "wbc";
  for (const auto& t : tasks) log.task_names.push_back(t.name);
  PlantState state = x0;
  state.t = horizon.t0;
  VectorXd torque = VectorXd::Zero(model.m());
  for (int i = 0; i <= horizon.N; ++i) {
    const auto t_start = Clock::now();
    if (i < horizon.N) {
      const DynamicsTerms terms = evalDynamics(model, state);
      std::vector<TaskKinematics> kins;
      std::vector<VectorXd> accels;
      for (std::size_t k = 0; k < tasks.size(); ++k) {
        kins.push_back(evalTask(model, tasks[k].map, state));
        accels.push_back(pdTaskAccel(tasks[k], trajectories[k].position[i], trajectories[k].velocity[i],
                                     kins.back().x, kins.back().xd));
      }
      torque = wbcHierarchy(terms, model, kins, accels).torque;
    }
    const double elapsed = seconds(t_start);
    StepLog row = makeRow(model, tasks, trajectories, i, horizon.t0 + i * dt, state.q, state.qd, torque);
    row.solver_status = i < horizon.N ? "closed_form" : "hold";
    row.solve_ms = i < horizon.N ? elapsed * 1e3 : 0.0;
    log.rows.push_back(std::move(row));
    if (i < horizon.N) {
      try {
        state = simulateStep(model, state, torque, dt, sim);
      } catch (const NumericalFailure& e) {
        throw NumericalFailure(fmt::format("wbc step {} (t = {:.4g}): {}", i, horizon.t0 + i * dt, e.what()));
      }
    }
  }
  log.wall_time = seconds(start);
  return log;
}

Metrics metrics(const TrajectoryLog& log, const RobotModel& model, double ordering_tolerance) {
  Metrics out;
  out.ordering_tolerance = ordering_tolerance;
  const std::size_t tasks = log.task_names.size();
  for (std::size_t k = 0; k < tasks; ++k) {
    TaskMetrics tm;
    tm.name = log.task_names[k];
    if (!log.rows.empty()) tm.max_abs_error = VectorXd::Zero(log.rows.front().err[k].size());
    for (const auto& row : log.rows) {
      tm.max_abs_error = tm.max_abs_error.cwiseMax(row.err[k].cwiseAbs());
      tm.error_norms.push_back(row.err_norm[k]);
      tm.accumulated += row.err_norm[k];
    }
    out.accumulated_total += tm.accumulated;
    out.tasks.push_back(std::move(tm));
  }
  for (std::size_t k = 0; k + 1 < tasks; ++k) {
    int ok = 0;
    for (const auto& row : log.rows) {
      if (row.err_norm[k] <= row.err_norm[k + 1] + ordering_tolerance) ++ok;
    }
    out.ordering_fraction.push_back(log.rows.empty() ? 1.0 : static_cast<double>(ok) / log.rows.size());
  }
  for (const auto& sp : log.subproblems) {
    ++out.solves;
    out.total_iterations += sp.iterations;
    out.max_iterations = std::max(out.max_iterations, sp.iterations);
    out.max_solve_time = std::max(out.max_solve_time, sp.wall_time);
  }
  out.wall_time = log.wall_time;
  if (model.nc() > 0) {
    const VectorXd target = model.constraintTarget();
    for (const auto& row : log.rows) {
      out.max_constraint_drift =
          std::max(out.max_constraint_drift, (constraintValue(model, row.q) - target).lpNorm<Eigen::Infinity>());
    }
  }
  return out;
}

}  // namespace hqmpc
