#include "hqmpc/simulation.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hqmpc/errors.hpp"
#include "hqmpc/kinematics.hpp"

namespace hqmpc {

void validate(const SimulationOptions& o) {
  if (!(o.dt_sim > 0.0)) throw InvalidInput("sim.dt_sim: must be positive");
  if (!(o.baumgarte_alpha >= 0.0) || !(o.baumgarte_beta >= 0.0)) {
    throw InvalidInput("sim: Baumgarte gains must be nonnegative");
  }
}

VectorXd plantAcceleration(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& torque,
                           const SimulationOptions& options) {
  const DynamicsTerms terms = evalDynamics(model, PlantState{q, qd, 0.0});
  VectorXd qdd = constrainedForwardDynamics(terms, model, torque);
  if (options.baumgarte && model.nc() > 0) {
    const MatrixXd jc_pinv = pinv(terms.Jc);
    const VectorXd drift = constraintValue(model, q) - model.constraintTarget();
    qdd -= 2.0 * options.baumgarte_alpha * (jc_pinv * (terms.Jc * qd)) +
           options.baumgarte_beta * options.baumgarte_beta * (jc_pinv * drift);
  }
  return qdd;
}

PlantState simulateStep(const RobotModel& model, const PlantState& state, const VectorXd& torque, double duration,
                        const SimulationOptions& options) {
  validate(options);
  checkState(model, state);
  if (torque.size() != model.m()) throw InvalidInput("simulate: torque has the wrong dimension");
  if (!(duration > 0.0) || options.dt_sim > duration * (1.0 + 1e-12)) {
    throw InvalidInput("simulate: require 0 < dt_sim <= duration");
  }
  const double ratio = duration / options.dt_sim;
  const int substeps = static_cast<int>(std::llround(ratio));
  if (std::abs(ratio - substeps) > 1e-9 * ratio) {
    throw InvalidInput("simulate: duration must be an integer multiple of dt_sim");
  }
  const double h = duration / substeps;
  VectorXd q = state.q;
  VectorXd qd = state.qd;
  int s = 0;
  auto accel = [&](const VectorXd& qq, const VectorXd& vv) {
    try {
      return plantAcceleration(model, qq, vv, torque, options);
    } catch (const NumericalFailure& e) {
      throw NumericalFailure(fmt::format("at t = {:.6g} s: {}", state.t + s * h, e.what()));
    }
  };
  for (; s < substeps; ++s) {
    const VectorXd k1q = qd;
    const VectorXd k1v = accel(q, qd);
    const VectorXd k2q = qd + 0.5 * h * k1v;
    const VectorXd k2v = accel(q + 0.5 * h * k1q, k2q);
    const VectorXd k3q = qd + 0.5 * h * k2v;
    const VectorXd k3v = accel(q + 0.5 * h * k2q, k3q);
    const VectorXd k4q = qd + h * k3v;
    const VectorXd k4v = accel(q + h * k3q, k4q);
    q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    qd += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    if (!q.allFinite() || !qd.allFinite()) {
      throw NumericalFailure(fmt::format("plant state became non-finite at t = {:.6g} s", state.t + (s + 1) * h));
    }
  }
  return PlantState{q, qd, state.t + duration};
}

double mechanicalEnergy(const RobotModel& model, const PlantState& state) {
  checkState(model, state);
  const MatrixXd mass = kin::massMatrix<double>(model, state.q);
  const kin::Poses<double> poses = kin::forwardKinematics<double>(model, state.q);
  double potential = 0.0;
  for (int i = 0; i < model.n(); ++i) {
    const Vec3 com = kin::pointPosition<double>(poses, i, model.links[i].com);
    potential -= model.links[i].mass * model.gravity.dot(com);
  }
  return 0.5 * state.qd.dot(mass * state.qd) + potential;
}

}  // namespace hqmpc
