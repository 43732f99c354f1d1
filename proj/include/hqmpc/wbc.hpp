#pragma once

#include <vector>

#include "hqmpc/dynamics.hpp"
#include "hqmpc/task.hpp"

namespace hqmpc {

/// Tolerance on ||UNc_bar U Nc - Nc||_inf for the simplified task-inertia forms.
inline constexpr double kActuationConditionTolerance = 1e-6;

/// Constraint-consistent actuation quantities shared by every task at a state.
struct ActuationProjection {
  MatrixXd Phi_c;     // Nc M^-1 (= M^-1 Nc^T), constrained inverse inertia
  MatrixXd G;         // U Nc M^-1 U^T, the torque weight Phi^-1
  MatrixXd G_pinv;    // Phi
  MatrixXd UNc_bar;   // M^-1 Nc^T U^T (U Nc M^-1 Nc^T U^T)^+
  double condition_residual = 0.0;
  bool condition_holds = false;
};

ActuationProjection actuationProjection(const DynamicsTerms& terms, const RobotModel& model);

/// (J Nc M^-1 J^T)^+
MatrixXd constrainedTaskInertia(const DynamicsTerms& terms, const MatrixXd& J);

/// (Mcal Phi Mcal^T)^+ with Mcal = J Nc M^-1 U^T.
MatrixXd generalTaskInertia(const DynamicsTerms& terms, const RobotModel& model, const MatrixXd& J);

/// Task-space weighting for the torque-level task cost. Uses the constrained
/// form when the actuation condition holds, the general form otherwise.
MatrixXd taskInertia(const DynamicsTerms& terms, const RobotModel& model, const MatrixXd& J);

struct HierarchicalCommand {
  VectorXd torque;
  std::vector<VectorXd> forces;              // F_k per task
  std::vector<MatrixXd> task_inertias;       // weighting used for F_k
  std::vector<int> projector_ranks;          // rank of J_prec(k)
  std::vector<MatrixXd> null_space_projectors;  // N_k after each task
  std::vector<MatrixXd> prec_jacobians;      // J_prec(k)
  bool actuation_condition = false;
};

/// Task-level right-hand side xdd_des - Jdot qd + J M^-1 bc.
VectorXd taskBias(const DynamicsTerms& terms, const TaskKinematics& task, const VectorXd& xdd_des);

/// Weighted-torque optimum for one task.
HierarchicalCommand wbcSingleTask(const DynamicsTerms& terms, const RobotModel& model,
                                  const TaskKinematics& task, const VectorXd& xdd_des);

/// Recursive null-space hierarchy; tasks are in priority order.
HierarchicalCommand wbcHierarchy(const DynamicsTerms& terms, const RobotModel& model,
                                 const std::vector<TaskKinematics>& tasks,
                                 const std::vector<VectorXd>& xdd_des);

}  // namespace hqmpc
