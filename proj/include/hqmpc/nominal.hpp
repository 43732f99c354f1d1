#pragma once

#include <vector>

#include "hqmpc/linalg.hpp"
#include "hqmpc/model.hpp"
#include "hqmpc/task.hpp"

namespace hqmpc {

/// Desired positions (and velocities) of one task at the grid points t_0..t_N.
struct TaskTrajectory {
  std::vector<VectorXd> position;
  std::vector<VectorXd> velocity;

  int steps() const { return static_cast<int>(position.size()) - 1; }
};

/// Straight line from `start` to `end` over N steps with constant velocity.
TaskTrajectory linearTrajectory(const VectorXd& start, const VectorXd& end, double duration, int steps);

/// Samples [first, first + count] of `traj`; past the last sample the final
/// position is held with zero velocity.
TaskTrajectory window(const TaskTrajectory& traj, int first, int count);

/// Joint-space reference about which the dynamics are linearized.
struct NominalTrajectory {
  std::vector<VectorXd> q;   // N + 1
  std::vector<VectorXd> qd;  // N + 1
  std::vector<VectorXd> u;   // N, each [torque; constraint force]

  int steps() const { return static_cast<int>(q.size()) - 1; }
};

struct IkOptions {
  double damping_threshold = 1e-6;  // smallest retained singular value that triggers damping
  double damping = 1e-4;
};

struct IkStep {
  VectorXd dq;
  std::vector<double> residuals;  // ||dx_k - J_k dq|| per level
  bool damped = false;
};

/// One prioritized IK increment; level k acts in the null space of levels < k.
IkStep prioritizedIkStep(const std::vector<MatrixXd>& jacobians, const std::vector<VectorXd>& deltas,
                         const IkOptions& options = {});

struct NominalOptions {
  bool constraint_task = true;  // holonomic constraints as a priority-0 IK level
  double max_joint_step = 1.0;  // rad; larger increments abort the build
  IkOptions ik;
};

/// Prioritized IK for states and the hierarchical WBC law for inputs.
/// `tasks` must be in priority order and aligned with `trajectories`.
NominalTrajectory buildNominal(const RobotModel& model, const PlantState& x0, const std::vector<TaskDef>& tasks,
                               const std::vector<TaskTrajectory>& trajectories, double dt,
                               const NominalOptions& options = {});

}  // namespace hqmpc
