#pragma once

#include "hqmpc/dynamics.hpp"

namespace hqmpc {

struct SimulationOptions {
  double dt_sim = 1e-3;  // s
  bool baumgarte = true;
  double baumgarte_alpha = 20.0;  // 1/s
  double baumgarte_beta = 20.0;   // 1/s
};

void validate(const SimulationOptions& options);

/// Constrained joint acceleration plus the optional Baumgarte correction
/// -2 alpha Jc^+ (Jc qd) - beta^2 Jc^+ (f_c(q) - c).
VectorXd plantAcceleration(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& torque,
                           const SimulationOptions& options);

/// Integrates over `duration` with RK4 substeps of dt_sim, torque held constant.
/// Throws NumericalFailure (with the time stamp) if the state leaves the finite range.
PlantState simulateStep(const RobotModel& model, const PlantState& state, const VectorXd& torque, double duration,
                        const SimulationOptions& options = {});

/// Kinetic plus gravitational potential energy.
double mechanicalEnergy(const RobotModel& model, const PlantState& state);

}  // namespace hqmpc
