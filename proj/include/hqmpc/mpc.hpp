#pragma once

#include <string>
#include <vector>

#include "hqmpc/nominal.hpp"
#include "hqmpc/qcqp.hpp"
#include "hqmpc/simulation.hpp"
#include "hqmpc/transcription.hpp"

namespace hqmpc {

enum class FeedbackMode { Measured, Predicted };

std::string toString(FeedbackMode mode);

struct MpcConfig {
  HorizonSpec horizon;
  HierarchySpec hierarchy;
  bool hierarchy_constraints = true;
  HierarchyOptions hierarchy_options{true, 2};  // q_1 is fixed by x0 under Euler, so bind from step 2
  FeedbackMode feedback = FeedbackMode::Measured;
  SolverSettings solver;
  MatrixXd W_c;  // empty selects 1e-2 I
  bool warm_start = true;
  SimulationOptions sim;
  NominalOptions nominal;
};

void validate(const MpcConfig& config, int task_count);

/// One logged sample at t_i. The torque is the one applied over [t_i, t_i+1);
/// the final row repeats the last applied torque.
struct StepLog {
  double t = 0.0;
  VectorXd q;
  VectorXd qd;
  VectorXd torque;
  VectorXd fc;
  std::vector<VectorXd> x;      // task positions
  std::vector<VectorXd> x_des;  // desired task positions
  std::vector<VectorXd> err;    // x_des - x
  std::vector<double> err_norm;
  std::string solver_status;
  int solver_iters = 0;
  double solve_ms = 0.0;
};

struct SubproblemRecord {
  int index = 0;
  int first_step = 0;
  std::string status;
  int iterations = 0;
  int outer_iterations = 0;
  double objective = 0.0;
  double max_hierarchy_value = 0.0;  // largest hierarchy-constraint value at the solution
  bool local_only = false;
  double wall_time = 0.0;
};

struct TrajectoryLog {
  std::string controller;
  std::vector<std::string> task_names;
  std::vector<StepLog> rows;  // N + 1
  std::vector<SubproblemRecord> subproblems;
  double wall_time = 0.0;
};

struct MpcResult {
  std::vector<VectorXd> states;  // N + 1, each [q; qd]
  std::vector<VectorXd> inputs;  // N, each [torque; constraint force]
  TrajectoryLog log;
};

/// Receding-horizon hierarchical QCQP controller closed on the plant.
/// `tasks` must be in priority order and aligned with `trajectories` (N + 1 samples each).
MpcResult mpcRun(const RobotModel& model, const std::vector<TaskDef>& tasks,
                 const std::vector<TaskTrajectory>& trajectories, const PlantState& x0, const MpcConfig& config);

/// Per-step hierarchical whole-body control from the measured state.
TrajectoryLog wbcRun(const RobotModel& model, const std::vector<TaskDef>& tasks,
                     const std::vector<TaskTrajectory>& trajectories, const PlantState& x0, const HorizonSpec& horizon,
                     const SimulationOptions& sim = {});

struct TaskMetrics {
  std::string name;
  VectorXd max_abs_error;  // per axis
  std::vector<double> error_norms;
  double accumulated = 0.0;
};

struct Metrics {
  std::vector<TaskMetrics> tasks;
  double accumulated_total = 0.0;
  /// Per adjacent task pair: fraction of samples with ||e_k|| <= ||e_k+1|| + tol.
  std::vector<double> ordering_fraction;
  double ordering_tolerance = 1e-3;
  int solves = 0;
  int total_iterations = 0;
  int max_iterations = 0;
  double wall_time = 0.0;
  double max_solve_time = 0.0;
  double max_constraint_drift = 0.0;
};

Metrics metrics(const TrajectoryLog& log, const RobotModel& model, double ordering_tolerance = 1e-3);

}  // namespace hqmpc
