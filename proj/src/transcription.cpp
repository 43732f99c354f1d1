#include "hqmpc/transcription.hpp"

#include <algorithm>
#include <complex>
#include <limits>

#include <fmt/format.h>

#include "hqmpc/errors.hpp"
#include "hqmpc/kinematics.hpp"
#include "hqmpc/wbc.hpp"

namespace hqmpc {

void validate(const HorizonSpec& h) {
  if (!(h.tf > h.t0)) throw InvalidInput("horizon: tf must exceed t0");
  if (h.N <= 0) throw InvalidInput("horizon.N: must be positive");
  if (h.Ne <= 0 || h.Ne > h.Np) throw InvalidInput("horizon: require 0 < Ne <= Np");
  if (h.Np > h.N) throw InvalidInput("horizon: require Np <= N");
  if (h.N % h.Ne != 0) {
    throw InvalidInput(fmt::format("horizon: N = {} is not divisible by Ne = {}; the receding-horizon loop "
                                   "needs an integral number N / Ne of subproblems",
                                   h.N, h.Ne));
  }
}

std::vector<double> HierarchySpec::margins() const {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < epsilons.size(); ++k) out.push_back(epsilons[k] - epsilons[k + 1]);
  return out;
}

void validate(const HierarchySpec& spec, int task_count) {
  if (static_cast<int>(spec.epsilons.size()) != task_count) {
    throw InvalidInput(fmt::format("hierarchy.epsilons: expected {} entries", task_count));
  }
  for (std::size_t k = 0; k < spec.epsilons.size(); ++k) {
    if (spec.epsilons[k] < 0.0) throw InvalidInput("hierarchy.epsilons: must be nonnegative");
  }
  for (double m : spec.margins()) {
    if (spec.mode == HierarchySpec::Mode::Weak && m != 0.0) {
      throw InvalidInput("hierarchy: weak mode requires equal epsilons");
    }
    if (spec.mode == HierarchySpec::Mode::Strong && !(m < 0.0)) {
      throw InvalidInput("hierarchy: strong mode requires strictly increasing epsilons");
    }
  }
}

namespace {

template <class S>
kin::VecX<S> dynamicsRhs(const RobotModel& model, const kin::VecX<S>& x, const VectorXd& u) {
  const int n = model.n();
  const int m = model.m();
  const kin::VecX<S> q = x.head(n);
  const kin::VecX<S> qd = x.tail(n);
  const kin::MatX<S> mass = kin::massMatrix<S>(model, q);
  kin::VecX<S> rhs = -kin::biasForces<S>(model, q, qd);
  for (int i = 0; i < m; ++i) rhs(model.actuated[i]) += S(u(i));
  if (model.nc() > 0) {
    const kin::MatX<S> jc = kin::constraintJacobian<S>(model, q);
    rhs -= jc.transpose() * u.tail(model.nc()).cast<S>();
  }
  kin::VecX<S> out(2 * n);
  out.head(n) = qd;
  out.tail(n) = Eigen::PartialPivLU<kin::MatX<S>>(mass).solve(rhs);
  return out;
}

}  // namespace

VectorXd stateDerivative(const RobotModel& model, const VectorXd& x, const VectorXd& u) {
  if (x.size() != 2 * model.n() || u.size() != model.m() + model.nc()) {
    throw InvalidInput("state derivative: state or input has the wrong dimension");
  }
  return dynamicsRhs<double>(model, x, u);
}

ContinuousLinearization linearizeStep(const RobotModel& model, const VectorXd& x_d, const VectorXd& u_d,
                                      double sigma, int step_index) {
  const int n = model.n();
  const int nx = 2 * n;
  const int nu = model.m() + model.nc();
  if (x_d.size() != nx || u_d.size() != nu) throw InvalidInput("linearization point has the wrong dimension");

  // Complex-step derivative: exact to rounding for the analytic dynamics.
  using C = std::complex<double>;
  constexpr double h = 1e-30;
  ContinuousLinearization lin;
  lin.A.resize(nx, nx);
  for (int j = 0; j < nx; ++j) {
    kin::VecX<C> xc = x_d.cast<C>();
    xc(j) += C(0.0, h);
    lin.A.col(j) = sigma * dynamicsRhs<C>(model, xc, u_d).imag() / h;
  }
  // g(x) is the input map of the control-affine dynamics.
  const MatrixXd mass = kin::massMatrix<double>(model, VectorXd(x_d.head(n)));
  MatrixXd g_lower(n, nu);
  g_lower.leftCols(model.m()) = model.selection().transpose();
  if (model.nc() > 0) g_lower.rightCols(model.nc()) = -constraintJacobian(model, x_d.head(n)).transpose();
  lin.B = MatrixXd::Zero(nx, nu);
  lin.B.bottomRows(n) = sigma * mass.llt().solve(g_lower);
  lin.r = sigma * stateDerivative(model, x_d, u_d) - lin.A * x_d - lin.B * u_d;
  if (!lin.A.allFinite() || !lin.B.allFinite() || !lin.r.allFinite()) {
    throw NumericalFailure(fmt::format("linearization produced non-finite entries at step {}", step_index));
  }
  return lin;
}

LinearizedStep discretize(const ContinuousLinearization& lin, double dtau) {
  LinearizedStep step;
  step.A = lin.A * dtau + MatrixXd::Identity(lin.A.rows(), lin.A.cols());
  step.B = lin.B * dtau;
  step.r = lin.r * dtau;
  return step;
}

VectorXd StackedPrediction::predict(const VectorXd& x0, const VectorXd& inputs) const {
  return A_stack * x0 + B_stack * inputs + r_stack;
}

StackedPrediction stackPrediction(const std::vector<LinearizedStep>& steps) {
  if (steps.empty()) throw InvalidInput("prediction needs at least one step");
  StackedPrediction p;
  p.nx = static_cast<int>(steps.front().A.rows());
  p.nu = static_cast<int>(steps.front().B.cols());
  p.steps = static_cast<int>(steps.size());
  const int nx = p.nx;
  const int nu = p.nu;
  p.A_stack = MatrixXd::Zero((p.steps + 1) * nx, nx);
  p.B_stack = MatrixXd::Zero((p.steps + 1) * nx, p.steps * nu);
  p.r_stack = VectorXd::Zero((p.steps + 1) * nx);
  p.A_stack.topRows(nx).setIdentity();
  for (int i = 0; i < p.steps; ++i) {
    const LinearizedStep& s = steps[i];
    if (s.A.rows() != nx || s.A.cols() != nx || s.B.rows() != nx || s.B.cols() != nu || s.r.size() != nx) {
      throw InvalidInput(fmt::format("prediction step {} has inconsistent dimensions", i));
    }
    // Block row i+1 = A_i * (block row i) + [.., B_i at column i] + r_i.
    p.A_stack.middleRows((i + 1) * nx, nx) = s.A * p.A_stack.middleRows(i * nx, nx);
    p.B_stack.middleRows((i + 1) * nx, nx) = s.A * p.B_stack.middleRows(i * nx, nx);
    p.B_stack.block((i + 1) * nx, i * nu, nx, nu) = s.B;
    p.r_stack.segment((i + 1) * nx, nx) = s.A * p.r_stack.segment(i * nx, nx) + s.r;
  }
  return p;
}

HierarchyConstraint hierarchyConstraint(const MatrixXd& J_high, const MatrixXd& J_low, const VectorXd& q_d,
                                        double margin, const VectorXd& err_high, const VectorXd& err_low,
                                        bool psd_projection) {
  const MatrixXd raw = J_high.transpose() * J_high - J_low.transpose() * J_low;
  const MatrixXd quad = psd_projection ? projectPsd(raw) : symmetrize(raw);
  // In deviation coordinates d = q - q_d:
  //   |e_h - J_h d|^2 - |e_l - J_l d|^2 + margin ~ d^T Q d + l^T d + k
  const VectorXd lin = -2.0 * (J_high.transpose() * err_high - J_low.transpose() * err_low);
  const double k = err_high.squaredNorm() - err_low.squaredNorm() + margin;
  HierarchyConstraint c;
  c.block = quad;
  c.linear = -2.0 * quad * q_d + lin;
  c.constant = q_d.dot(quad * q_d) - lin.dot(q_d) + k;
  return c;
}

std::vector<HierarchyConstraint> hierarchyConstraints(const RobotModel& model, const std::vector<TaskDef>& tasks,
                                                      const std::vector<TaskTrajectory>& trajectories,
                                                      const NominalTrajectory& nominal, const HierarchySpec& spec,
                                                      const HierarchyOptions& options) {
  if (tasks.size() != trajectories.size()) throw InvalidInput("one trajectory per task is required");
  validate(spec, static_cast<int>(tasks.size()));
  const int steps = nominal.steps();
  for (const auto& t : trajectories) {
    if (t.steps() != steps) throw InvalidInput("trajectory and nominal lengths differ");
  }
  const std::vector<double> margins = spec.margins();
  std::vector<HierarchyConstraint> out;
  for (std::size_t k = 0; k + 1 < tasks.size(); ++k) {
    for (int i = std::max(options.first_step, 1); i <= steps; ++i) {
      const VectorXd& q = nominal.q[i];
      const MatrixXd j_high = taskJacobian(model, tasks[k].map, q);
      const MatrixXd j_low = taskJacobian(model, tasks[k + 1].map, q);
      const VectorXd e_high = trajectories[k].position[i] - taskPosition(model, tasks[k].map, q);
      const VectorXd e_low = trajectories[k + 1].position[i] - taskPosition(model, tasks[k + 1].map, q);
      HierarchyConstraint c =
          hierarchyConstraint(j_high, j_low, q, margins[k], e_high, e_low, options.psd_projection);
      c.task = static_cast<int>(k);
      c.step = i;
      out.push_back(std::move(c));
    }
  }
  return out;
}

LinearEqualities kinematicEqualities(const RobotModel& model, const NominalTrajectory& nominal) {
  const int n = model.n();
  const int nx = 2 * n;
  const int nc = model.nc();
  const int steps = nominal.steps();
  LinearEqualities eq;
  eq.H = MatrixXd::Zero(steps * nc, (steps + 1) * nx);
  eq.h = VectorXd::Zero(steps * nc);
  if (nc == 0) return eq;
  const VectorXd target = model.constraintTarget();
  for (int i = 1; i <= steps; ++i) {
    const VectorXd& q = nominal.q[i];
    const MatrixXd jc = constraintJacobian(model, q);
    const int row = (i - 1) * nc;
    // f_c(q) ~ f_c(q_d) + Jc (q - q_d) = c
    eq.H.block(row, i * nx, nc, n) = jc;
    eq.h.segment(row, nc) = constraintValue(model, q) - jc * q - target;
  }
  return eq;
}

StepCost stepCost(const RobotModel& model, const std::vector<TaskDef>& tasks,
                  const std::vector<VectorXd>& x_des, const std::vector<VectorXd>& xd_des, const VectorXd& q_d,
                  const VectorXd& qd_d, const MatrixXd& W_c, bool terminal) {
  const int n = model.n();
  int rows = 0;
  for (const auto& t : tasks) rows += t.dim();
  const PlantState state{q_d, qd_d, 0.0};
  const DynamicsTerms terms = evalDynamics(model, state);

  MatrixXd J(rows, n);
  VectorXd kp(rows), kv(rows), err(rows), psi(rows), jdot_qd(rows), pd(rows);
  int row = 0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const TaskKinematics kinematics = evalTask(model, tasks[k].map, state);
    const int d = tasks[k].dim();
    J.middleRows(row, d) = kinematics.J;
    kp.segment(row, d) = tasks[k].kp;
    kv.segment(row, d) = tasks[k].kv;
    err.segment(row, d) = x_des[k] - kinematics.x;
    psi.segment(row, d) = xd_des[k];
    jdot_qd.segment(row, d) = kinematics.Jdot_qd;
    pd.segment(row, d) = pdTaskAccel(tasks[k], x_des[k], xd_des[k], kinematics.x, kinematics.xd);
    row += d;
  }

  StepCost s;
  s.Lambda = taskInertia(terms, model, J);
  s.C.resize(rows, 2 * n);
  s.C << -(kp.asDiagonal() * J), -(kv.asDiagonal() * J);
  s.c = kp.asDiagonal() * (err + J * q_d) + kv.asDiagonal() * psi;
  s.Wxx = symmetrize(s.C.transpose() * s.Lambda * s.C);
  s.Wx = 2.0 * s.C.transpose() * s.Lambda * s.c;
  if (terminal) return s;

  const int nc = model.nc();
  s.Mcal = J * terms.Nc * terms.Minv * model.selection().transpose();
  s.b = pd - jdot_qd + J * (terms.Minv * terms.bc);
  s.Wuu = blockDiagonal(symmetrize(s.Mcal.transpose() * s.Lambda * s.Mcal), W_c);
  MatrixXd w_bu = MatrixXd::Zero(rows, model.m() + nc);
  w_bu.leftCols(model.m()) = s.Lambda * s.Mcal;
  s.Wu = -2.0 * w_bu.transpose() * s.b;
  return s;
}

QuadraticCost quadraticCost(const RobotModel& model, const std::vector<TaskDef>& tasks,
                            const std::vector<TaskTrajectory>& trajectories, const NominalTrajectory& nominal,
                            const MatrixXd& W_c) {
  const int nc = model.nc();
  if (W_c.rows() != nc || W_c.cols() != nc) throw InvalidInput("W_c must be nc x nc");
  if (nc > 0 && minEigenvalue(W_c) < -1e-12) throw InvalidInput("W_c must be positive semi-definite");
  const int steps = nominal.steps();
  const int nx = 2 * model.n();
  const int nu = model.m() + nc;
  QuadraticCost cost;
  cost.Wxx = MatrixXd::Zero((steps + 1) * nx, (steps + 1) * nx);
  cost.Wx = VectorXd::Zero((steps + 1) * nx);
  cost.Wuu = MatrixXd::Zero(steps * nu, steps * nu);
  cost.Wu = VectorXd::Zero(steps * nu);
  for (int i = 0; i <= steps; ++i) {
    std::vector<VectorXd> x_des, xd_des;
    for (const auto& t : trajectories) {
      x_des.push_back(t.position[i]);
      xd_des.push_back(t.velocity[i]);
    }
    const bool terminal = i == steps;
    const StepCost s = stepCost(model, tasks, x_des, xd_des, nominal.q[i], nominal.qd[i], W_c, terminal);
    cost.Wxx.block(i * nx, i * nx, nx, nx) = s.Wxx;
    cost.Wx.segment(i * nx, nx) = s.Wx;
    if (!terminal) {
      cost.Wuu.block(i * nu, i * nu, nu, nu) = s.Wuu;
      cost.Wu.segment(i * nu, nu) = s.Wu;
    }
  }
  return cost;
}

double QcqpProblem::objective(const VectorXd& states, const VectorXd& inputs) const {
  return states.dot(cost.Wxx * states) + cost.Wx.dot(states) + inputs.dot(cost.Wuu * inputs) +
         cost.Wu.dot(inputs);
}

double QcqpProblem::maxInequality(const VectorXd& states) const {
  double worst = -std::numeric_limits<double>::infinity();
  const int nx = prediction.nx;
  for (const auto& c : quad_ineqs) worst = std::max(worst, c.value(states.segment(c.step * nx, n)));
  return worst;
}

CanonicalQcqp QcqpProblem::condensed() const {
  const MatrixXd& S = prediction.B_stack;
  const VectorXd s0 = prediction.A_stack * x0 + prediction.r_stack;
  const int nx = prediction.nx;
  CanonicalQcqp p;
  p.P = symmetrize(2.0 * (S.transpose() * cost.Wxx * S + cost.Wuu));
  p.q = S.transpose() * (2.0 * cost.Wxx * s0 + cost.Wx) + cost.Wu;
  p.constant = s0.dot(cost.Wxx * s0) + cost.Wx.dot(s0);
  p.A = equalities.H * S;
  p.b = -(equalities.H * s0 + equalities.h);
  for (const auto& c : quad_ineqs) {
    const MatrixXd Si = S.middleRows(c.step * nx, n);
    const VectorXd si = s0.segment(c.step * nx, n);
    QuadraticInequality qi;
    qi.P = symmetrize(2.0 * Si.transpose() * c.block * Si);
    qi.q = Si.transpose() * (2.0 * c.block * si + c.linear);
    qi.r = c.value(si);
    p.inequalities.push_back(std::move(qi));
  }
  return p;
}

CanonicalQcqp QcqpProblem::sparse() const {
  const int nX = stateVariables();
  const int nU = inputVariables();
  const int nx = prediction.nx;
  CanonicalQcqp p;
  p.P = MatrixXd::Zero(nX + nU, nX + nU);
  p.P.topLeftCorner(nX, nX) = 2.0 * cost.Wxx;
  p.P.bottomRightCorner(nU, nU) = 2.0 * cost.Wuu;
  p.q.resize(nX + nU);
  p.q << cost.Wx, cost.Wu;
  const int neq = nX + static_cast<int>(equalities.H.rows());
  p.A = MatrixXd::Zero(neq, nX + nU);
  p.b = VectorXd::Zero(neq);
  p.A.topLeftCorner(nX, nX).setIdentity();
  p.A.topRightCorner(nX, nU) = -prediction.B_stack;
  p.b.head(nX) = prediction.A_stack * x0 + prediction.r_stack;
  p.A.bottomLeftCorner(equalities.H.rows(), nX) = equalities.H;
  p.b.tail(equalities.H.rows()) = -equalities.h;
  for (const auto& c : quad_ineqs) {
    QuadraticInequality qi;
    qi.P = MatrixXd::Zero(nX + nU, nX + nU);
    qi.P.block(c.step * nx, c.step * nx, n, n) = 2.0 * c.block;
    qi.q = VectorXd::Zero(nX + nU);
    qi.q.segment(c.step * nx, n) = c.linear;
    qi.r = c.constant;
    p.inequalities.push_back(std::move(qi));
  }
  return p;
}

QcqpProblem assembleQcqp(const StackedPrediction& prediction, const QuadraticCost& cost,
                         const LinearEqualities& equalities, const std::vector<HierarchyConstraint>& quad_ineqs,
                         const VectorXd& x0, int n) {
  const int nX = (prediction.steps + 1) * prediction.nx;
  const int nU = prediction.steps * prediction.nu;
  if (x0.size() != prediction.nx) throw InvalidInput("assemble: x0 does not match the state dimension");
  if (2 * n != prediction.nx) throw InvalidInput("assemble: joint count does not match the state dimension");
  if (cost.Wxx.rows() != nX || cost.Wxx.cols() != nX || cost.Wx.size() != nX) {
    throw InvalidInput("assemble: state cost block Wxx/Wx has the wrong dimension");
  }
  if (cost.Wuu.rows() != nU || cost.Wuu.cols() != nU || cost.Wu.size() != nU) {
    throw InvalidInput("assemble: input cost block Wuu/Wu has the wrong dimension");
  }
  if (equalities.H.cols() != nX || equalities.H.rows() != equalities.h.size()) {
    throw InvalidInput("assemble: kinematic equality block H has the wrong dimension");
  }
  for (const auto& c : quad_ineqs) {
    if (c.step < 0 || c.step > prediction.steps || c.block.rows() != n || c.block.cols() != n ||
        c.linear.size() != n) {
      throw InvalidInput("assemble: hierarchy constraint block has the wrong dimension");
    }
  }
  QcqpProblem p;
  p.prediction = prediction;
  p.cost = cost;
  p.equalities = equalities;
  p.quad_ineqs = quad_ineqs;
  p.x0 = x0;
  p.n = n;
  return p;
}

QcqpProblem transcribe(const RobotModel& model, const std::vector<TaskDef>& tasks,
                       const std::vector<TaskTrajectory>& trajectories, const NominalTrajectory& nominal,
                       const HierarchySpec& hierarchy, double sigma, const TranscriptionOptions& options) {
  const int steps = nominal.steps();
  const double dtau = 1.0 / steps;
  std::vector<LinearizedStep> linearized;
  for (int i = 0; i < steps; ++i) {
    VectorXd x(2 * model.n());
    x << nominal.q[i], nominal.qd[i];
    linearized.push_back(discretize(linearizeStep(model, x, nominal.u[i], sigma, i), dtau));
  }
  const MatrixXd W_c =
      options.W_c.size() == 0 ? MatrixXd(1e-2 * MatrixXd::Identity(model.nc(), model.nc())) : options.W_c;
  VectorXd x0(2 * model.n());
  x0 << nominal.q[0], nominal.qd[0];
  return assembleQcqp(stackPrediction(linearized), quadraticCost(model, tasks, trajectories, nominal, W_c),
                      kinematicEqualities(model, nominal),
                      hierarchyConstraints(model, tasks, trajectories, nominal, hierarchy, options.hierarchy), x0,
                      model.n());
}

}  // namespace hqmpc
