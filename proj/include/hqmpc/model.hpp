#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hqmpc/linalg.hpp"

namespace hqmpc {

/// Revolute joint. The joint frame sits at `offset_xyz`/`offset_rpy` in the
/// parent link frame; the child link frame is the joint frame rotated by q
/// about `axis`.
struct Joint {
  Vec3 axis = Vec3::UnitY();
  int parent = -1;  // -1 is the fixed base
  Vec3 offset_xyz = Vec3::Zero();
  Vec3 offset_rpy = Vec3::Zero();
  Mat3 offset_rotation = Mat3::Identity();
};

struct Link {
  double mass = 1.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about the COM, link frame
};

/// Holonomic constraint f_c(q) = target.
struct ConstraintDef {
  enum class Type { JointLinear, FramePoint };
  Type type = Type::JointLinear;
  MatrixXd coeffs;        // JointLinear: rows x n
  int link = -1;          // FramePoint
  Vec3 point = Vec3::Zero();
  std::vector<int> rows;  // FramePoint: selected world axes (0=x, 1=y, 2=z)
  VectorXd target;

  int dim() const { return static_cast<int>(type == Type::JointLinear ? coeffs.rows() : rows.size()); }
};

struct RobotModel {
  std::string name;
  std::vector<Joint> joints;
  std::vector<Link> links;
  std::vector<int> actuated;
  std::vector<ConstraintDef> constraints;
  Vec3 gravity{0.0, 0.0, -9.81};

  int n() const { return static_cast<int>(joints.size()); }
  int m() const { return static_cast<int>(actuated.size()); }
  int nc() const;

  /// m x n actuation selection matrix U.
  MatrixXd selection() const;
  /// Stacked constraint targets c.
  VectorXd constraintTarget() const;
};

/// Throws InvalidInput when the model breaks an invariant.
void validate(const RobotModel& model);

/// Reads a JSON model description and validates it.
RobotModel loadModel(const std::string& path);
RobotModel parseModel(const std::string& json_text);

Mat3 rpyToRotation(const Vec3& rpy);

struct PlantState {
  VectorXd q;
  VectorXd qd;
  double t = 0.0;
};

/// Throws InvalidInput on dimension mismatch or non-finite entries.
void checkState(const RobotModel& model, const PlantState& state);

}  // namespace hqmpc
