#include "hqmpc/wbc.hpp"

#include <fmt/format.h>

#include "hqmpc/errors.hpp"

namespace hqmpc {

ActuationProjection actuationProjection(const DynamicsTerms& terms, const RobotModel& model) {
  ActuationProjection a;
  const MatrixXd U = model.selection();
  a.Phi_c = symmetrize(terms.Nc * terms.Minv);
  a.G = symmetrize(U * a.Phi_c * U.transpose());
  a.G_pinv = symmetrize(pinv(a.G));
  a.UNc_bar = terms.Minv * terms.Nc.transpose() * U.transpose() * a.G_pinv;
  a.condition_residual = infNorm(a.UNc_bar * U * terms.Nc - terms.Nc);
  a.condition_holds = a.condition_residual <= kActuationConditionTolerance;
  return a;
}

namespace {

void checkJacobian(const RobotModel& model, const MatrixXd& J) {
  if (J.cols() != model.n()) {
    throw InvalidInput(fmt::format("task Jacobian: expected {} columns, got {}", model.n(), J.cols()));
  }
}

MatrixXd generalInertiaInverse(const ActuationProjection& a, const RobotModel& model, const MatrixXd& J) {
  const MatrixXd mcal = J * a.Phi_c * model.selection().transpose();
  return symmetrize(mcal * a.G_pinv * mcal.transpose());
}

// `reference` is the inverse inertia of the unprojected task, see pinv().
MatrixXd generalInertia(const ActuationProjection& a, const RobotModel& model, const MatrixXd& J,
                        double reference = 0.0) {
  return symmetrize(pinv(generalInertiaInverse(a, model, J), kPinvTolerance, reference));
}

MatrixXd simplifiedInertia(const ActuationProjection& a, const MatrixXd& J, double reference = 0.0) {
  return symmetrize(pinv(J * a.Phi_c * J.transpose(), kPinvTolerance, reference));
}

}  // namespace

MatrixXd constrainedTaskInertia(const DynamicsTerms& terms, const MatrixXd& J) {
  return symmetrize(pinv(J * terms.Nc * terms.Minv * J.transpose()));
}

MatrixXd generalTaskInertia(const DynamicsTerms& terms, const RobotModel& model, const MatrixXd& J) {
  checkJacobian(model, J);
  return generalInertia(actuationProjection(terms, model), model, J);
}

MatrixXd taskInertia(const DynamicsTerms& terms, const RobotModel& model, const MatrixXd& J) {
  checkJacobian(model, J);
  const ActuationProjection a = actuationProjection(terms, model);
  return a.condition_holds ? simplifiedInertia(a, J) : generalInertia(a, model, J);
}

VectorXd taskBias(const DynamicsTerms& terms, const TaskKinematics& task, const VectorXd& xdd_des) {
  if (xdd_des.size() != task.J.rows()) throw InvalidInput("desired task acceleration has the wrong dimension");
  return xdd_des - task.Jdot_qd + task.J * (terms.Minv * terms.bc);
}

HierarchicalCommand wbcSingleTask(const DynamicsTerms& terms, const RobotModel& model,
                                  const TaskKinematics& task, const VectorXd& xdd_des) {
  checkJacobian(model, task.J);
  const ActuationProjection a = actuationProjection(terms, model);
  const MatrixXd mcal = task.J * a.Phi_c * model.selection().transpose();
  const MatrixXd lambda = a.condition_holds ? simplifiedInertia(a, task.J) : generalInertia(a, model, task.J);
  const VectorXd force = lambda * taskBias(terms, task, xdd_des);

  HierarchicalCommand cmd;
  cmd.torque = a.G_pinv * mcal.transpose() * force;
  cmd.forces.push_back(force);
  cmd.task_inertias.push_back(lambda);
  const MatrixXd jprec = task.J * terms.Nc;
  cmd.prec_jacobians.push_back(jprec);
  cmd.projector_ranks.push_back(rank(jprec));
  const MatrixXd jbar = a.Phi_c * jprec.transpose() * simplifiedInertia(a, jprec);
  cmd.null_space_projectors.push_back(terms.Nc - jbar * jprec);
  cmd.actuation_condition = a.condition_holds;
  return cmd;
}

HierarchicalCommand wbcHierarchy(const DynamicsTerms& terms, const RobotModel& model,
                                 const std::vector<TaskKinematics>& tasks,
                                 const std::vector<VectorXd>& xdd_des) {
  if (tasks.size() != xdd_des.size()) throw InvalidInput("one desired acceleration per task is required");
  const int n = model.n();
  const ActuationProjection a = actuationProjection(terms, model);
  const VectorXd free_accel = terms.Minv * terms.bc;

  HierarchicalCommand cmd;
  cmd.actuation_condition = a.condition_holds;
  // Recursion runs inside the constraint-consistent space: N_0 = Nc.
  MatrixXd null_space = terms.Nc;
  VectorXd generalized_force = VectorXd::Zero(n);
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const TaskKinematics& task = tasks[k];
    checkJacobian(model, task.J);
    if (xdd_des[k].size() != task.J.rows()) throw InvalidInput("desired task acceleration has the wrong dimension");
    const MatrixXd jprec = task.J * null_space;
    // Directions removed by higher priorities must stay removed, not be
    // amplified from round-off: truncate against the unprojected scale.
    const double ref_c = largestSingularValue(task.J * a.Phi_c * task.J.transpose());
    const MatrixXd lambda_c = simplifiedInertia(a, jprec, ref_c);
    const MatrixXd lambda =
        a.condition_holds
            ? lambda_c
            : generalInertia(a, model, jprec, largestSingularValue(generalInertiaInverse(a, model, task.J)));
    // Acceleration already produced by higher-priority tasks is removed from the target.
    const VectorXd bias = xdd_des[k] - task.Jdot_qd + task.J * free_accel -
                          task.J * (a.Phi_c * generalized_force);
    const VectorXd force = lambda * bias;
    generalized_force += jprec.transpose() * force;

    const MatrixXd jbar = a.Phi_c * jprec.transpose() * lambda_c;
    null_space = null_space - jbar * jprec;

    cmd.forces.push_back(force);
    cmd.task_inertias.push_back(lambda);
    cmd.projector_ranks.push_back(rank(jprec, kPinvTolerance, largestSingularValue(task.J)));
    cmd.null_space_projectors.push_back(null_space);
    cmd.prec_jacobians.push_back(jprec);
  }
  cmd.torque = a.UNc_bar.transpose() * terms.Nc.transpose() * generalized_force;
  return cmd;
}

}  // namespace hqmpc
