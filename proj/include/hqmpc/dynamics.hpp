#pragma once

#include "hqmpc/linalg.hpp"
#include "hqmpc/model.hpp"

namespace hqmpc {

/// Rigid-body and constraint-projection terms at one state.
struct DynamicsTerms {
  MatrixXd M;         // n x n mass matrix
  MatrixXd Minv;      // M^-1
  VectorXd b;         // Coriolis/centrifugal + gravity
  MatrixXd Jc;        // nc x n
  MatrixXd Jc_dot;    // nc x n
  MatrixXd Nc;        // I - Jc_bar Jc
  MatrixXd Jc_bar;    // M^-1 Jc^T Lambda_c
  MatrixXd Lambda_c;  // (Jc M^-1 Jc^T)^+
  VectorXd bc;        // Nc^T b + Jc^T Lambda_c Jc_dot qd
  VectorXd qd;        // velocity the terms were evaluated at
};

/// Step used for the central difference of Jc along qd.
inline constexpr double kJacobianRateStep = 1e-6;

DynamicsTerms evalDynamics(const RobotModel& model, const PlantState& state);

/// Constraint Jacobian rate dJc/dt at (q, qd); zero for joint-linear constraints.
MatrixXd constraintJacobianRate(const RobotModel& model, const VectorXd& q, const VectorXd& qd);

/// F_c = Jc_bar^T (U^T tau - b) + Lambda_c Jc_dot qd.
VectorXd constraintForce(const DynamicsTerms& terms, const RobotModel& model, const VectorXd& torque);

/// qdd = M^-1 (Nc^T U^T tau - bc).
VectorXd constrainedForwardDynamics(const DynamicsTerms& terms, const RobotModel& model,
                                    const VectorXd& torque);

VectorXd constraintValue(const RobotModel& model, const VectorXd& q);
MatrixXd constraintJacobian(const RobotModel& model, const VectorXd& q);

}  // namespace hqmpc
