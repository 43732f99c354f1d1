#include "hqmpc/task.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "hqmpc/dynamics.hpp"
#include "hqmpc/errors.hpp"
#include "hqmpc/kinematics.hpp"

namespace hqmpc {

void validate(const RobotModel& model, const TaskDef& task) {
  const std::string where = fmt::format("task '{}'", task.name);
  if (task.dim() < 1) throw InvalidInput(where + ": dimension must be at least 1");
  if (task.kp.size() != task.dim() || task.kv.size() != task.dim()) {
    throw InvalidInput(where + ": gain dimensions must match the task dimension");
  }
  if ((task.kp.array() < 0.0).any() || (task.kv.array() < 0.0).any()) {
    throw InvalidInput(where + ": gains must be nonnegative");
  }
  if (task.map.kind == TaskMap::Kind::BodyPoint) {
    if (task.map.link < 0 || task.map.link >= model.n()) throw InvalidInput(where + ": link out of range");
    for (int a : task.map.indices) {
      if (a < 0 || a > 2) throw InvalidInput(where + ": axis out of range");
    }
  } else {
    for (int j : task.map.indices) {
      if (j < 0 || j >= model.n()) throw InvalidInput(where + ": joint index out of range");
    }
  }
}

void validate(const RobotModel& model, const std::vector<TaskDef>& tasks) {
  std::vector<int> priorities;
  for (const auto& t : tasks) {
    validate(model, t);
    priorities.push_back(t.priority);
  }
  std::sort(priorities.begin(), priorities.end());
  for (std::size_t i = 0; i < priorities.size(); ++i) {
    if (priorities[i] != static_cast<int>(i) + 1) {
      throw InvalidInput("tasks: priorities must be distinct and contiguous from 1");
    }
  }
}

VectorXd taskPosition(const RobotModel& model, const TaskMap& map, const VectorXd& q) {
  VectorXd x(map.dim());
  if (map.kind == TaskMap::Kind::JointCoordinates) {
    for (int k = 0; k < map.dim(); ++k) x(k) = q(map.indices[k]);
    return x;
  }
  const auto poses = kin::forwardKinematics<double>(model, q);
  const Vec3 p = kin::pointPosition(poses, map.link, map.point);
  for (int k = 0; k < map.dim(); ++k) x(k) = p(map.indices[k]);
  return x;
}

MatrixXd taskJacobian(const RobotModel& model, const TaskMap& map, const VectorXd& q) {
  MatrixXd jac = MatrixXd::Zero(map.dim(), model.n());
  if (map.kind == TaskMap::Kind::JointCoordinates) {
    for (int k = 0; k < map.dim(); ++k) jac(k, map.indices[k]) = 1.0;
    return jac;
  }
  const auto poses = kin::forwardKinematics<double>(model, q);
  const MatrixXd full = kin::pointJacobian<double>(model, poses, map.link, map.point);
  for (int k = 0; k < map.dim(); ++k) jac.row(k) = full.row(map.indices[k]);
  return jac;
}

TaskKinematics evalTask(const RobotModel& model, const TaskMap& map, const PlantState& state) {
  TaskKinematics out;
  out.x = taskPosition(model, map, state.q);
  out.J = taskJacobian(model, map, state.q);
  out.xd = out.J * state.qd;
  if (map.kind == TaskMap::Kind::JointCoordinates) {
    out.Jdot_qd = VectorXd::Zero(map.dim());
  } else {
    const double h = kJacobianRateStep;
    const MatrixXd jdot = (taskJacobian(model, map, state.q + h * state.qd) -
                           taskJacobian(model, map, state.q - h * state.qd)) /
                          (2.0 * h);
    out.Jdot_qd = jdot * state.qd;
  }
  return out;
}

std::vector<TaskDef> sortedByPriority(std::vector<TaskDef> tasks) {
  std::stable_sort(tasks.begin(), tasks.end(),
                   [](const TaskDef& a, const TaskDef& b) { return a.priority < b.priority; });
  return tasks;
}

VectorXd pdTaskAccel(const TaskDef& task, const VectorXd& x_des, const VectorXd& xd_des, const VectorXd& x,
                     const VectorXd& xd) {
  if (x_des.size() != task.dim() || xd_des.size() != task.dim() || x.size() != task.dim() ||
      xd.size() != task.dim()) {
    throw InvalidInput(fmt::format("task '{}': PD inputs must have dimension {}", task.name, task.dim()));
  }
  return task.kp.cwiseProduct(x_des - x) + task.kv.cwiseProduct(xd_des - xd);
}

}  // namespace hqmpc
