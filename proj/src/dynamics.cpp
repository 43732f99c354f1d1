#include "hqmpc/dynamics.hpp"

#include <fmt/format.h>

#include "hqmpc/errors.hpp"
#include "hqmpc/kinematics.hpp"

namespace hqmpc {

VectorXd constraintValue(const RobotModel& model, const VectorXd& q) {
  return kin::constraintValue<double>(model, q);
}

MatrixXd constraintJacobian(const RobotModel& model, const VectorXd& q) {
  return kin::constraintJacobian<double>(model, q);
}

MatrixXd constraintJacobianRate(const RobotModel& model, const VectorXd& q, const VectorXd& qd) {
  bool linear = true;
  for (const auto& c : model.constraints) linear = linear && c.type == ConstraintDef::Type::JointLinear;
  if (linear) return MatrixXd::Zero(model.nc(), model.n());
  const double h = kJacobianRateStep;
  return (constraintJacobian(model, q + h * qd) - constraintJacobian(model, q - h * qd)) / (2.0 * h);
}

DynamicsTerms evalDynamics(const RobotModel& model, const PlantState& state) {
  checkState(model, state);
  const int n = model.n();
  DynamicsTerms t;
  t.qd = state.qd;
  t.M = kin::massMatrix<double>(model, state.q);
  t.b = kin::biasForces<double>(model, state.q, state.qd);
  Eigen::LLT<MatrixXd> llt(t.M);
  if (llt.info() != Eigen::Success) throw NumericalFailure("mass matrix is not positive definite");
  t.Minv = symmetrize(llt.solve(MatrixXd::Identity(n, n)));
  t.Jc = constraintJacobian(model, state.q);
  t.Jc_dot = constraintJacobianRate(model, state.q, state.qd);
  if (model.nc() == 0) {
    t.Lambda_c = MatrixXd::Zero(0, 0);
    t.Jc_bar = MatrixXd::Zero(n, 0);
    t.Nc = MatrixXd::Identity(n, n);
    t.bc = t.b;
    return t;
  }
  t.Lambda_c = symmetrize(pinv(t.Jc * t.Minv * t.Jc.transpose()));
  t.Jc_bar = t.Minv * t.Jc.transpose() * t.Lambda_c;
  t.Nc = MatrixXd::Identity(n, n) - t.Jc_bar * t.Jc;
  t.bc = t.Nc.transpose() * t.b + t.Jc.transpose() * t.Lambda_c * t.Jc_dot * state.qd;
  return t;
}

namespace {

void checkTorque(const RobotModel& model, const VectorXd& torque) {
  if (torque.size() != model.m()) {
    throw InvalidInput(fmt::format("torque: expected {} entries, got {}", model.m(), torque.size()));
  }
}

}  // namespace

VectorXd constraintForce(const DynamicsTerms& terms, const RobotModel& model, const VectorXd& torque) {
  checkTorque(model, torque);
  if (model.nc() == 0) return VectorXd::Zero(0);
  const VectorXd applied = model.selection().transpose() * torque;
  return terms.Jc_bar.transpose() * (applied - terms.b) + terms.Lambda_c * terms.Jc_dot * terms.qd;
}

VectorXd constrainedForwardDynamics(const DynamicsTerms& terms, const RobotModel& model,
                                    const VectorXd& torque) {
  checkTorque(model, torque);
  const VectorXd rhs = terms.Nc.transpose() * model.selection().transpose() * torque - terms.bc;
  Eigen::LLT<MatrixXd> llt(terms.M);
  if (llt.info() != Eigen::Success) throw NumericalFailure("mass matrix is singular");
  VectorXd qdd = llt.solve(rhs);
  if (!qdd.allFinite()) throw NumericalFailure("constrained forward dynamics produced non-finite accelerations");
  return qdd;
}

}  // namespace hqmpc
