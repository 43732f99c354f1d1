#pragma once

#include <vector>

#include "hqmpc/dynamics.hpp"
#include "hqmpc/nominal.hpp"
#include "hqmpc/qcqp.hpp"
#include "hqmpc/task.hpp"

namespace hqmpc {

struct HorizonSpec {
  double t0 = 0.0;
  double tf = 0.8;
  int N = 80;
  int Np = 10;
  int Ne = 4;

  double dt() const { return (tf - t0) / N; }
  /// Dilation coefficient of one prediction window.
  double sigma() const { return Np * dt(); }
  int subproblems() const { return N / Ne; }
};

/// Throws InvalidInput unless 0 < Ne <= Np <= N, N % Ne == 0 and dt > 0.
void validate(const HorizonSpec& horizon);

struct HierarchySpec {
  enum class Mode { Weak, Strong };
  Mode mode = Mode::Weak;
  std::vector<double> epsilons;  // one per task, nondecreasing

  /// eps_k - eps_{k+1} for k = 1..n_t-1.
  std::vector<double> margins() const;
};

void validate(const HierarchySpec& spec, int task_count);

/// State derivative f(x) + g(x) u with x = [q; qd], u = [torque; constraint force].
VectorXd stateDerivative(const RobotModel& model, const VectorXd& x, const VectorXd& u);

struct ContinuousLinearization {
  MatrixXd A;
  MatrixXd B;
  VectorXd r;
};

/// Linearization of sigma (f + g u) about (x_d, u_d) in normalized time.
ContinuousLinearization linearizeStep(const RobotModel& model, const VectorXd& x_d, const VectorXd& u_d,
                                      double sigma, int step_index = 0);

struct LinearizedStep {
  MatrixXd A;
  MatrixXd B;
  VectorXd r;
};

/// Explicit Euler in normalized time: A = I + A_tau dtau, B = B_tau dtau, r = r_tau dtau.
LinearizedStep discretize(const ContinuousLinearization& lin, double dtau);

/// X = A_stack x0 + B_stack U + r_stack over steps 0..Np.
struct StackedPrediction {
  MatrixXd A_stack;
  MatrixXd B_stack;
  VectorXd r_stack;
  int nx = 0;
  int nu = 0;
  int steps = 0;

  VectorXd predict(const VectorXd& x0, const VectorXd& inputs) const;
};

StackedPrediction stackPrediction(const std::vector<LinearizedStep>& steps);

/// X^T J X + Z X + E <= 0 where J and Z are nonzero only on q_step.
struct HierarchyConstraint {
  int task = 0;   // constraint between task `task` and `task + 1` (0-based)
  int step = 0;
  MatrixXd block;   // n x n
  VectorXd linear;  // n
  double constant = 0.0;

  double value(const VectorXd& q) const { return q.dot(block * q) + linear.dot(q) + constant; }
};

/// One approximated ordering constraint about q_d. `err_high`/`err_low` are
/// the task errors at q_d (zero when the nominal meets both targets).
HierarchyConstraint hierarchyConstraint(const MatrixXd& J_high, const MatrixXd& J_low, const VectorXd& q_d,
                                        double margin, const VectorXd& err_high, const VectorXd& err_low,
                                        bool psd_projection);

struct HierarchyOptions {
  bool psd_projection = true;  // false emits the raw, generally indefinite blocks
  int first_step = 1;
};

std::vector<HierarchyConstraint> hierarchyConstraints(const RobotModel& model, const std::vector<TaskDef>& tasks,
                                                      const std::vector<TaskTrajectory>& trajectories,
                                                      const NominalTrajectory& nominal, const HierarchySpec& spec,
                                                      const HierarchyOptions& options = {});

/// H X + h = 0
struct LinearEqualities {
  MatrixXd H;
  VectorXd h;
};

/// Linearized holonomic constraints at steps 1..Np.
LinearEqualities kinematicEqualities(const RobotModel& model, const NominalTrajectory& nominal);

/// Objective X^T Wxx X + Wx X + U^T Wuu U + Wu U.
struct QuadraticCost {
  MatrixXd Wxx;
  VectorXd Wx;
  MatrixXd Wuu;
  VectorXd Wu;
};

/// Per-step weights evaluated at one nominal point.
struct StepCost {
  MatrixXd Wxx;
  VectorXd Wx;
  MatrixXd Wuu;
  VectorXd Wu;
  MatrixXd Lambda;  // stacked-task inertia
  MatrixXd Mcal;    // stacked J Nc M^-1 U^T
  VectorXd b;       // stacked task bias at the nominal
  MatrixXd C;
  VectorXd c;
};

StepCost stepCost(const RobotModel& model, const std::vector<TaskDef>& tasks,
                  const std::vector<VectorXd>& x_des, const std::vector<VectorXd>& xd_des, const VectorXd& q_d,
                  const VectorXd& qd_d, const MatrixXd& W_c, bool terminal);

QuadraticCost quadraticCost(const RobotModel& model, const std::vector<TaskDef>& tasks,
                            const std::vector<TaskTrajectory>& trajectories, const NominalTrajectory& nominal,
                            const MatrixXd& W_c);

/// Finite-horizon QCQP over (X, U).
struct QcqpProblem {
  StackedPrediction prediction;
  QuadraticCost cost;
  LinearEqualities equalities;
  std::vector<HierarchyConstraint> quad_ineqs;
  VectorXd x0;
  int n = 0;  // joints, locates q inside each state block

  int stateVariables() const { return (prediction.steps + 1) * prediction.nx; }
  int inputVariables() const { return prediction.steps * prediction.nu; }

  /// Objective without dropped constants.
  double objective(const VectorXd& states, const VectorXd& inputs) const;
  /// Largest hierarchy-constraint value at the given stacked states.
  double maxInequality(const VectorXd& states) const;

  /// States eliminated through the prediction; variables are U.
  CanonicalQcqp condensed() const;
  /// Variables are [X; U] with the prediction as equality rows.
  CanonicalQcqp sparse() const;
};

QcqpProblem assembleQcqp(const StackedPrediction& prediction, const QuadraticCost& cost,
                         const LinearEqualities& equalities, const std::vector<HierarchyConstraint>& quad_ineqs,
                         const VectorXd& x0, int n);

struct TranscriptionOptions {
  HierarchyOptions hierarchy;
  MatrixXd W_c;  // empty selects 1e-2 I
};

/// Linearize, stack, and assemble the subproblem for one prediction window.
QcqpProblem transcribe(const RobotModel& model, const std::vector<TaskDef>& tasks,
                       const std::vector<TaskTrajectory>& trajectories, const NominalTrajectory& nominal,
                       const HierarchySpec& hierarchy, double sigma, const TranscriptionOptions& options = {});

}  // namespace hqmpc
