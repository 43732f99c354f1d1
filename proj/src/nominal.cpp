#include "hqmpc/nominal.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "hqmpc/dynamics.hpp"
#include "hqmpc/errors.hpp"
#include "hqmpc/wbc.hpp"

namespace hqmpc {

TaskTrajectory linearTrajectory(const VectorXd& start, const VectorXd& end, double duration, int steps) {
  if (start.size() != end.size()) throw InvalidInput("trajectory endpoints differ in dimension");
  if (steps < 1 || !(duration > 0.0)) throw InvalidInput("trajectory needs a positive duration and step count");
  TaskTrajectory traj;
  const VectorXd velocity = (end - start) / duration;
  for (int i = 0; i <= steps; ++i) {
    const double s = static_cast<double>(i) / steps;
    traj.position.push_back(start + s * (end - start));
    traj.velocity.push_back(velocity);
  }
  return traj;
}

TaskTrajectory window(const TaskTrajectory& traj, int first, int count) {
  TaskTrajectory out;
  const int last = traj.steps();
  for (int i = first; i <= first + count; ++i) {
    if (i <= last) {
      out.position.push_back(traj.position[i]);
      out.velocity.push_back(traj.velocity[i]);
    } else {
      out.position.push_back(traj.position[last]);
      out.velocity.push_back(VectorXd::Zero(traj.position[last].size()));
    }
  }
  return out;
}

IkStep prioritizedIkStep(const std::vector<MatrixXd>& jacobians, const std::vector<VectorXd>& deltas,
                         const IkOptions& options) {
  if (jacobians.empty()) throw InvalidInput("prioritized IK needs at least one task");
  if (jacobians.size() != deltas.size()) throw InvalidInput("one task delta per Jacobian is required");
  const Eigen::Index n = jacobians.front().cols();
  IkStep step;
  step.dq = VectorXd::Zero(n);
  MatrixXd projector = MatrixXd::Identity(n, n);
  for (std::size_t k = 0; k < jacobians.size(); ++k) {
    const MatrixXd& J = jacobians[k];
    if (J.cols() != n || J.rows() != deltas[k].size()) throw InvalidInput("IK task dimensions are inconsistent");
    const MatrixXd jp = J * projector;
    const double reference = largestSingularValue(J);
    const MatrixXd jp_pinv = pinv(jp, kPinvTolerance, reference);
    MatrixXd jp_inverse = jp_pinv;
    const double smallest = smallestRetainedSingularValue(jp, kPinvTolerance, reference);
    if (smallest > 0.0 && smallest < options.damping_threshold) {
      const double lambda2 = options.damping * options.damping;
      jp_inverse = jp.transpose() *
                   (jp * jp.transpose() + lambda2 * MatrixXd::Identity(jp.rows(), jp.rows())).inverse();
      step.damped = true;
    }
    step.dq += jp_inverse * (deltas[k] - J * step.dq);
    projector = projector - jp_pinv * jp;
  }
  for (std::size_t k = 0; k < jacobians.size(); ++k) {
    step.residuals.push_back((deltas[k] - jacobians[k] * step.dq).norm());
  }
  return step;
}

NominalTrajectory buildNominal(const RobotModel& model, const PlantState& x0, const std::vector<TaskDef>& tasks,
                               const std::vector<TaskTrajectory>& trajectories, double dt,
                               const NominalOptions& options) {
  checkState(model, x0);
  if (tasks.size() != trajectories.size()) throw InvalidInput("one trajectory per task is required");
  if (tasks.empty()) throw InvalidInput("nominal trajectory needs at least one task");
  if (!(dt > 0.0)) throw InvalidInput("nominal trajectory needs a positive time step");
  const int steps = trajectories.front().steps();
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (trajectories[k].steps() != steps || static_cast<int>(trajectories[k].velocity.size()) != steps + 1) {
      throw InvalidInput("task trajectories must share the horizon grid");
    }
    for (const auto& x : trajectories[k].position) {
      if (x.size() != tasks[k].dim() || !x.allFinite()) {
        throw InvalidInput(fmt::format("trajectory for task '{}' has bad samples", tasks[k].name));
      }
    }
  }
  const bool with_constraints = options.constraint_task && model.nc() > 0;
  const VectorXd target = model.constraintTarget();

  NominalTrajectory nominal;
  nominal.q.push_back(x0.q);
  nominal.qd.push_back(x0.qd);
  for (int i = 0; i < steps; ++i) {
    const VectorXd& q = nominal.q.back();
    std::vector<MatrixXd> jacobians;
    std::vector<VectorXd> deltas;
    if (with_constraints) {
      jacobians.push_back(constraintJacobian(model, q));
      deltas.push_back(target - constraintValue(model, q));
    }
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      jacobians.push_back(taskJacobian(model, tasks[k].map, q));
      deltas.push_back(trajectories[k].position[i + 1] - trajectories[k].position[i]);
    }
    const IkStep step = prioritizedIkStep(jacobians, deltas, options.ik);
    if (!step.dq.allFinite() || step.dq.norm() > options.max_joint_step) {
      throw NominalInfeasible(i, fmt::format("prioritized IK diverged at step {} (|dq| = {:.6g})", i,
                                             step.dq.norm()));
    }
    nominal.q.push_back(q + step.dq);
    nominal.qd.push_back(step.dq / dt);
  }

  for (int i = 0; i < steps; ++i) {
    const PlantState state{nominal.q[i], nominal.qd[i], 0.0};
    const DynamicsTerms terms = evalDynamics(model, state);
    std::vector<TaskKinematics> kins;
    std::vector<VectorXd> accels;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      kins.push_back(evalTask(model, tasks[k].map, state));
      accels.push_back(pdTaskAccel(tasks[k], trajectories[k].position[i], trajectories[k].velocity[i],
                                   kins.back().x, kins.back().xd));
    }
    const HierarchicalCommand cmd = wbcHierarchy(terms, model, kins, accels);
    VectorXd u(model.m() + model.nc());
    u << cmd.torque, constraintForce(terms, model, cmd.torque);
    nominal.u.push_back(u);
  }
  return nominal;
}

}  // namespace hqmpc
