#pragma once

#include <string>
#include <vector>

#include "hqmpc/linalg.hpp"
#include "hqmpc/model.hpp"

namespace hqmpc {

/// Forward map q -> task position: selected world components of a body
/// point, or selected joint coordinates.
struct TaskMap {
  enum class Kind { BodyPoint, JointCoordinates };
  Kind kind = Kind::BodyPoint;
  int link = -1;
  Vec3 point = Vec3::Zero();
  std::vector<int> indices;  // world axes (BodyPoint) or joint indices (JointCoordinates)

  int dim() const { return static_cast<int>(indices.size()); }
};

struct TaskDef {
  std::string name;
  TaskMap map;
  VectorXd kp;  // diagonal of Kp, 1/s^2
  VectorXd kv;  // diagonal of Kv, 1/s
  int priority = 1;

  int dim() const { return map.dim(); }
};

/// Task quantities at one state.
struct TaskKinematics {
  VectorXd x;
  VectorXd xd;
  MatrixXd J;
  VectorXd Jdot_qd;
};

void validate(const RobotModel& model, const TaskDef& task);

/// Checks every task and that priorities are distinct and contiguous from 1.
void validate(const RobotModel& model, const std::vector<TaskDef>& tasks);

VectorXd taskPosition(const RobotModel& model, const TaskMap& map, const VectorXd& q);
MatrixXd taskJacobian(const RobotModel& model, const TaskMap& map, const VectorXd& q);
TaskKinematics evalTask(const RobotModel& model, const TaskMap& map, const PlantState& state);

/// Tasks sorted by priority (1 first).
std::vector<TaskDef> sortedByPriority(std::vector<TaskDef> tasks);

/// Desired task acceleration Kp (x_des - x) + Kv (xd_des - xd).
VectorXd pdTaskAccel(const TaskDef& task, const VectorXd& x_des, const VectorXd& xd_des,
                     const VectorXd& x, const VectorXd& xd);

}  // namespace hqmpc
