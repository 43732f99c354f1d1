#pragma once

#include <string>
#include <vector>

#include "hqmpc/linalg.hpp"

namespace hqmpc {

/// 0.5 x^T P x + q^T x + r <= 0
struct QuadraticInequality {
  MatrixXd P;
  VectorXd q;
  double r = 0.0;

  double value(const VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x) + r; }
  VectorXd gradient(const VectorXd& x) const { return P * x + q; }
};

/// minimize 0.5 x^T P x + q^T x + constant
/// subject to A x = b and a list of quadratic inequalities.
struct CanonicalQcqp {
  MatrixXd P;
  VectorXd q;
  double constant = 0.0;
  MatrixXd A;
  VectorXd b;
  std::vector<QuadraticInequality> inequalities;

  int variables() const { return static_cast<int>(q.size()); }
  double objective(const VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x) + constant; }
};

void checkDimensions(const CanonicalQcqp& problem);

enum class SolverMode { Convex, NonconvexLocal };

struct SolverSettings {
  double eq_tol = 1e-8;
  double ineq_tol = 1e-8;
  double duality_gap_tol = 1e-8;
  double stationarity_tol = 1e-8;  // relative to 1 + ||grad f0||_inf
  int max_iters = 200;             // total Newton iterations
  double barrier_t0 = 1.0;
  double barrier_mu = 10.0;
  double line_search_alpha = 0.3;
  double line_search_beta = 0.8;
  SolverMode mode = SolverMode::Convex;
};

void validate(const SolverSettings& settings);

enum class SolverStatus { Optimal, MaxIters, Infeasible, NumericalFailure };

std::string toString(SolverStatus status);

struct KktResiduals {
  double stationarity = 0.0;  // scaled, see SolverSettings::stationarity_tol
  double primal_eq = 0.0;
  double primal_ineq = 0.0;
  double complementarity = 0.0;
};

struct Solution {
  VectorXd x;
  VectorXd eq_duals;
  VectorXd ineq_duals;
  SolverStatus status = SolverStatus::NumericalFailure;
  bool local_only = false;  // nonconvex-local: a stationary point, not a certified optimum
  KktResiduals kkt;
  double objective = 0.0;
  int iterations = 0;
  int outer_iterations = 0;
  std::vector<double> gap_history;  // duality-gap estimate per outer iteration
  double wall_time = 0.0;           // s
  std::string message;
};

/// KKT residuals of (x, duals) recomputed from the problem data.
KktResiduals kktResiduals(const CanonicalQcqp& problem, const VectorXd& x, const VectorXd& eq_duals,
                          const VectorXd& ineq_duals);

/// Barrier interior-point solve. `warm_start` (optional) seeds the iterate.
Solution solve(const CanonicalQcqp& problem, const SolverSettings& settings = {},
               const VectorXd* warm_start = nullptr);

/// Equality-constrained QP through one KKT factorization. Requires no inequalities.
Solution solveQpFastPath(const CanonicalQcqp& problem, const SolverSettings& settings = {});

/// Dense, row-major, decimal JSON dump for cross-checking with external solvers.
std::string dumpProblem(const CanonicalQcqp& problem);
CanonicalQcqp loadProblem(const std::string& text);

}  // namespace hqmpc
