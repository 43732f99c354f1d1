#pragma once

// Scalar-generic kinematics and recursive Newton-Euler dynamics. Instantiated
// with double for evaluation and std::complex<double> for complex-step
// differentiation during linearization.

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "hqmpc/model.hpp"

namespace hqmpc::kin {

template <class S>
using V3 = Eigen::Matrix<S, 3, 1>;
template <class S>
using M3 = Eigen::Matrix<S, 3, 3>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// Eigen's cross and dot conjugate for complex scalars, which breaks
// complex-step derivatives; these stay holomorphic.
template <class S>
V3<S> cross(const V3<S>& a, const V3<S>& b) {
  return V3<S>(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0));
}

template <class S>
S dot(const V3<S>& a, const V3<S>& b) {
  return a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

template <class S>
M3<S> axisRotation(const Vec3& axis, const S& angle) {
  using std::cos;
  using std::sin;
  M3<S> k;
  k << S(0), S(-axis.z()), S(axis.y()), S(axis.z()), S(0), S(-axis.x()), S(-axis.y()), S(axis.x()),
      S(0);
  return M3<S>::Identity() + sin(angle) * k + (S(1) - cos(angle)) * (k * k);
}

template <class S>
struct Poses {
  std::vector<M3<S>> rotation;    // link frame orientation in world
  std::vector<V3<S>> origin;      // joint / link frame origin in world
  std::vector<V3<S>> axis_world;  // joint axis in world
};

template <class S>
Poses<S> forwardKinematics(const RobotModel& model, const VecX<S>& q) {
  const int n = model.n();
  Poses<S> poses;
  poses.rotation.resize(n);
  poses.origin.resize(n);
  poses.axis_world.resize(n);
  for (int i = 0; i < n; ++i) {
    const Joint& j = model.joints[i];
    M3<S> parent_r = M3<S>::Identity();
    V3<S> parent_p = V3<S>::Zero();
    if (j.parent >= 0) {
      parent_r = poses.rotation[j.parent];
      parent_p = poses.origin[j.parent];
    }
    const M3<S> joint_r = parent_r * j.offset_rotation.cast<S>();
    poses.origin[i] = parent_p + parent_r * j.offset_xyz.cast<S>();
    poses.axis_world[i] = joint_r * j.axis.cast<S>();
    poses.rotation[i] = joint_r * axisRotation<S>(j.axis, q(i));
  }
  return poses;
}

/// True when joint `j` lies on the path from the base to `link`.
inline bool isAncestor(const RobotModel& model, int j, int link) {
  for (int k = link; k >= 0; k = model.joints[k].parent) {
    if (k == j) return true;
  }
  return false;
}

template <class S>
V3<S> pointPosition(const Poses<S>& poses, int link, const Vec3& point) {
  return poses.origin[link] + poses.rotation[link] * point.cast<S>();
}

/// 3 x n linear Jacobian of a point rigidly attached to `link`.
template <class S>
MatX<S> pointJacobian(const RobotModel& model, const Poses<S>& poses, int link, const Vec3& point) {
  const int n = model.n();
  MatX<S> jac = MatX<S>::Zero(3, n);
  const V3<S> p = pointPosition(poses, link, point);
  for (int k = link; k >= 0; k = model.joints[k].parent) {
    jac.col(k) = cross<S>(poses.axis_world[k], p - poses.origin[k]);
  }
  return jac;
}

/// Joint torques from recursive Newton-Euler: M(q) qdd + C(q, qd) qd + gravity_scale * g(q).
template <class S>
VecX<S> inverseDynamics(const RobotModel& model, const VecX<S>& q, const VecX<S>& qd,
                        const VecX<S>& qdd, double gravity_scale) {
  const int n = model.n();
  const Poses<S> poses = forwardKinematics<S>(model, q);
  std::vector<V3<S>> w(n), dw(n), a_origin(n), a_com(n), com(n), force(n), moment(n);
  const V3<S> base_acc = (-gravity_scale * model.gravity).cast<S>();
  for (int i = 0; i < n; ++i) {
    const int p = model.joints[i].parent;
    const V3<S> z = poses.axis_world[i];
    const V3<S> w_p = p >= 0 ? w[p] : V3<S>::Zero();
    const V3<S> dw_p = p >= 0 ? dw[p] : V3<S>::Zero();
    if (p >= 0) {
      const V3<S> r = poses.origin[i] - poses.origin[p];
      a_origin[i] = a_origin[p] + cross<S>(dw_p, r) + cross<S>(w_p, cross<S>(w_p, r));
    } else {
      a_origin[i] = base_acc;
    }
    w[i] = w_p + z * qd(i);
    dw[i] = dw_p + z * qdd(i) + cross<S>(w_p, z * qd(i));
    com[i] = poses.rotation[i] * model.links[i].com.cast<S>();
    a_com[i] = a_origin[i] + cross<S>(dw[i], com[i]) + cross<S>(w[i], cross<S>(w[i], com[i]));
    const M3<S> inertia_w =
        poses.rotation[i] * model.links[i].inertia.cast<S>() * poses.rotation[i].transpose();
    force[i] = S(model.links[i].mass) * a_com[i];
    moment[i] = inertia_w * dw[i] + cross<S>(w[i], inertia_w * w[i]) + cross<S>(com[i], force[i]);
  }
  VecX<S> tau(n);
  for (int i = n - 1; i >= 0; --i) {
    tau(i) = dot<S>(poses.axis_world[i], moment[i]);
    const int p = model.joints[i].parent;
    if (p >= 0) {
      force[p] += force[i];
      moment[p] += moment[i] + cross<S>(poses.origin[i] - poses.origin[p], force[i]);
    }
  }
  return tau;
}

template <class S>
MatX<S> massMatrix(const RobotModel& model, const VecX<S>& q) {
  const int n = model.n();
  MatX<S> mass(n, n);
  const VecX<S> zero = VecX<S>::Zero(n);
  for (int j = 0; j < n; ++j) {
    VecX<S> e = VecX<S>::Zero(n);
    e(j) = S(1);
    mass.col(j) = inverseDynamics<S>(model, q, zero, e, 0.0);
  }
  return S(0.5) * (mass + mass.transpose());
}

template <class S>
VecX<S> biasForces(const RobotModel& model, const VecX<S>& q, const VecX<S>& qd) {
  return inverseDynamics<S>(model, q, qd, VecX<S>::Zero(model.n()), 1.0);
}

/// Stacked constraint map f_c(q).
template <class S>
VecX<S> constraintValue(const RobotModel& model, const VecX<S>& q) {
  VecX<S> out(model.nc());
  int row = 0;
  Poses<S> poses;
  bool have_poses = false;
  for (const ConstraintDef& c : model.constraints) {
    if (c.type == ConstraintDef::Type::JointLinear) {
      out.segment(row, c.dim()) = c.coeffs.cast<S>() * q;
    } else {
      if (!have_poses) {
        poses = forwardKinematics<S>(model, q);
        have_poses = true;
      }
      const V3<S> p = pointPosition(poses, c.link, c.point);
      for (int k = 0; k < c.dim(); ++k) out(row + k) = p(c.rows[k]);
    }
    row += c.dim();
  }
  return out;
}

template <class S>
MatX<S> constraintJacobian(const RobotModel& model, const VecX<S>& q) {
  MatX<S> out = MatX<S>::Zero(model.nc(), model.n());
  int row = 0;
  Poses<S> poses;
  bool have_poses = false;
  for (const ConstraintDef& c : model.constraints) {
    if (c.type == ConstraintDef::Type::JointLinear) {
      out.middleRows(row, c.dim()) = c.coeffs.cast<S>();
    } else {
      if (!have_poses) {
        poses = forwardKinematics<S>(model, q);
        have_poses = true;
      }
      const MatX<S> jac = pointJacobian<S>(model, poses, c.link, c.point);
      for (int k = 0; k < c.dim(); ++k) out.row(row + k) = jac.row(c.rows[k]);
    }
    row += c.dim();
  }
  return out;
}

}  // namespace hqmpc::kin
