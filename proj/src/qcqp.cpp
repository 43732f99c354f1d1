#include "hqmpc/qcqp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <json.hpp>

#include "hqmpc/errors.hpp"

namespace hqmpc {

void checkDimensions(const CanonicalQcqp& p) {
  const Eigen::Index n = p.q.size();
  if (p.P.rows() != n || p.P.cols() != n) throw InvalidInput("qcqp: P must be n x n");
  if (p.A.rows() != p.b.size()) throw InvalidInput("qcqp: A and b row counts differ");
  if (p.A.rows() > 0 && p.A.cols() != n) throw InvalidInput("qcqp: A must have n columns");
  if (!allFinite(p.P) || !p.q.allFinite() || !std::isfinite(p.constant) || !allFinite(p.A) || !p.b.allFinite()) {
    throw InvalidInput("qcqp: non-finite problem data");
  }
  for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
    const auto& c = p.inequalities[i];
    if (c.P.rows() != n || c.P.cols() != n || c.q.size() != n) {
      throw InvalidInput(fmt::format("qcqp: inequality {} has the wrong dimension", i));
    }
    if (!allFinite(c.P) || !c.q.allFinite() || !std::isfinite(c.r)) {
      throw InvalidInput(fmt::format("qcqp: inequality {} has non-finite data", i));
    }
  }
}

void validate(const SolverSettings& s) {
  if (!(s.eq_tol > 0) || !(s.ineq_tol > 0) || !(s.duality_gap_tol > 0) || !(s.stationarity_tol > 0)) {
    throw InvalidInput("solver: tolerances must be positive");
  }
  if (s.max_iters <= 0) throw InvalidInput("solver: max_iters must be positive");
  if (!(s.barrier_t0 > 0)) throw InvalidInput("solver: barrier_t0 must be positive");
  if (!(s.barrier_mu > 1)) throw InvalidInput("solver: barrier_mu must exceed 1");
  if (!(s.line_search_alpha > 0 && s.line_search_alpha < 0.5)) {
    throw InvalidInput("solver: line_search_alpha must lie in (0, 0.5)");
  }
  if (!(s.line_search_beta > 0 && s.line_search_beta < 1)) {
    throw InvalidInput("solver: line_search_beta must lie in (0, 1)");
  }
}

std::string toString(SolverStatus status) {
  switch (status) {
    case SolverStatus::Optimal: return "optimal";
    case SolverStatus::MaxIters: return "max_iters";
    case SolverStatus::Infeasible: return "infeasible";
    case SolverStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

KktResiduals kktResiduals(const CanonicalQcqp& p, const VectorXd& x, const VectorXd& eq_duals,
                          const VectorXd& ineq_duals) {
  KktResiduals r;
  const VectorXd grad0 = p.P * x + p.q;
  VectorXd lagrangian = grad0;
  if (p.A.rows() > 0) {
    lagrangian += p.A.transpose() * eq_duals;
    r.primal_eq = (p.A * x - p.b).lpNorm<Eigen::Infinity>();
  }
  for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
    const auto& c = p.inequalities[i];
    const double lam = ineq_duals(static_cast<Eigen::Index>(i));
    const double g = c.value(x);
    lagrangian += lam * c.gradient(x);
    r.primal_ineq = std::max(r.primal_ineq, std::max(0.0, g));
    r.complementarity = std::max(r.complementarity, std::abs(lam * g));
    r.complementarity = std::max(r.complementarity, std::max(0.0, -lam));
  }
  r.stationarity = lagrangian.lpNorm<Eigen::Infinity>() / (1.0 + grad0.lpNorm<Eigen::Infinity>());
  return r;
}

namespace {

using Clock = std::chrono::steady_clock;

// Affine parametrization x = x0 + Z y of {A x = b}.
struct AffineSet {
  VectorXd x0;
  MatrixXd Z;
  bool consistent = true;
};

AffineSet affineSet(const CanonicalQcqp& p, double eq_tol) {
  const Eigen::Index n = p.q.size();
  AffineSet s;
  if (p.A.rows() == 0) {
    s.x0 = VectorXd::Zero(n);
    s.Z = MatrixXd::Identity(n, n);
    return s;
  }
  Eigen::JacobiSVD<MatrixXd> svd(p.A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > cutoff) ++r;
  const MatrixXd& U = svd.matrixU();
  const MatrixXd& V = svd.matrixV();
  s.x0 = V.leftCols(r) * (U.leftCols(r).transpose() * p.b).cwiseQuotient(sv.head(r));
  s.Z = V.rightCols(n - r);
  const double residual = (p.A * s.x0 - p.b).lpNorm<Eigen::Infinity>();
  s.consistent = residual <= std::max(eq_tol, 1e-12 * p.b.lpNorm<Eigen::Infinity>());
  return s;
}

// minimize 0.5 y^T P y + q^T y  s.t.  cons_i(y) <= 0, with no equalities.
struct Reduced {
  MatrixXd P;
  VectorXd q;
  std::vector<QuadraticInequality> cons;
  // Each constraint is divided by its coefficient scale so that active
  // constraint values stay well above round-off at small duality gaps.
  std::vector<double> cons_scale;

  double f0(const VectorXd& y) const { return 0.5 * y.dot(P * y) + q.dot(y); }
};

Reduced reduce(const CanonicalQcqp& p, const AffineSet& s) {
  Reduced r;
  r.P = symmetrize(s.Z.transpose() * p.P * s.Z);
  r.q = s.Z.transpose() * (p.P * s.x0 + p.q);
  for (const auto& c : p.inequalities) {
    QuadraticInequality rc;
    rc.P = symmetrize(s.Z.transpose() * c.P * s.Z);
    rc.q = s.Z.transpose() * (c.P * s.x0 + c.q);
    rc.r = c.value(s.x0);
    double scale = std::max(rc.q.size() > 0 ? rc.q.cwiseAbs().maxCoeff() : 0.0,
                            rc.P.size() > 0 ? rc.P.cwiseAbs().maxCoeff() : 0.0);
    if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
    rc.P /= scale;
    rc.q /= scale;
    rc.r /= scale;
    r.cons.push_back(std::move(rc));
    r.cons_scale.push_back(scale);
  }
  return r;
}

struct BarrierResult {
  VectorXd y;
  double t = 0.0;
  bool converged = false;
  bool stopped_early = false;
  bool numerical_failure = false;
  bool shifted = false;
  int outer = 0;
  std::vector<double> gaps;
  std::string message;
};

// Solve H d = -g. Convex mode trusts the factorization; nonconvex mode shifts
// the spectrum so the step is a descent direction.
bool newtonDirection(const MatrixXd& H, const VectorXd& g, bool nonconvex, VectorXd& d, bool& shifted) {
  const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
  if (nonconvex) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(H);
    const double floor = 1e-10 * scale;
    VectorXd ev = eig.eigenvalues();
    if (ev.minCoeff() < floor) {
      shifted = true;
      const double shift = floor - ev.minCoeff();
      ev.array() += shift;
    }
    d = -eig.eigenvectors() * (eig.eigenvectors().transpose() * g).cwiseQuotient(ev);
    return d.allFinite();
  }
  Eigen::LLT<MatrixXd> llt(H);
  if (llt.info() == Eigen::Success) {
    d = -llt.solve(g);
    d -= llt.solve(H * d + g);  // one step of iterative refinement
    if (d.allFinite()) return true;
  }
  // Singular reduced Hessian: regularize lightly.
  MatrixXd reg = H;
  reg.diagonal().array() += 1e-12 * scale;
  Eigen::LDLT<MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success) return false;
  d = -ldlt.solve(g);
  return d.allFinite();
}

// Generic log-barrier method.
// `stop` is polled after every Newton step; `done` ends the last centering
// once the caller's optimality test passes.
template <class Stop, class Done>
BarrierResult barrier(const Reduced& prob, VectorXd y, const SolverSettings& settings, bool nonconvex,
                      int& iterations, Stop stop, Done done) {
  BarrierResult out;
  const std::size_t m = prob.cons.size();
  double t = settings.barrier_t0;
  VectorXd g(m);

  auto values = [&](const VectorXd& z, VectorXd& vals) {
    for (std::size_t i = 0; i < m; ++i) vals(i) = prob.cons[i].value(z);
  };
  values(y, g);
  while (true) {
    ++out.outer;
    const bool final_stage = static_cast<double>(m) / t <= settings.duality_gap_tol;
    int final_steps = 0;
    // Centering.
    while (true) {
      if (iterations >= settings.max_iters) {
        out.y = y;
        out.t = t;
        out.message = "iteration limit reached";
        return out;
      }
      VectorXd grad = t * (prob.P * y + prob.q);
      MatrixXd H = t * prob.P;
      for (std::size_t i = 0; i < m; ++i) {
        const VectorXd gi = prob.cons[i].gradient(y);
        const double inv = -1.0 / g(i);
        grad += inv * gi;
        H += inv * prob.cons[i].P + (inv * inv) * gi * gi.transpose();
      }
      VectorXd d;
      if (!newtonDirection(H, grad, nonconvex, d, out.shifted)) {
        out.numerical_failure = true;
        out.message = "Newton system could not be solved";
        out.y = y;
        out.t = t;
        return out;
      }
      const double slope = grad.dot(d);
      const double decrement = -slope;
      if (!final_stage && decrement / 2.0 <= 1e-6) break;
      // The last centering runs until the caller's optimality test passes or
      // Newton stops making progress.
      if (final_stage && (done(y, g, t) || decrement / 2.0 <= 1e-16 || ++final_steps > 20)) break;
      if (!(slope < 0.0)) break;

      // Backtracking: first stay strictly feasible, then sufficient decrease.
      // Along the ray every term is an exact quadratic in s, so the change in
      // the barrier function is formed from increments; differencing two large
      // phi values would drown the decrease in round-off once t is large.
      const double f_lin = (prob.P * y + prob.q).dot(d);
      const double f_quad = d.dot(prob.P * d);
      VectorXd c_lin(m), c_quad(m);
      for (std::size_t i = 0; i < m; ++i) {
        c_lin(i) = prob.cons[i].gradient(y).dot(d);
        c_quad(i) = d.dot(prob.cons[i].P * d);
      }
      auto increments = [&](double s) -> VectorXd { return s * c_lin + 0.5 * s * s * c_quad; };
      auto feasible = [&](double s) {
        const VectorXd dg = increments(s);
        for (std::size_t i = 0; i < m; ++i) {
          if (!(g(i) + dg(i) < 0.0)) return false;
        }
        return true;
      };
      auto change = [&](double s) {
        const VectorXd dg = increments(s);
        double delta = t * (s * f_lin + 0.5 * s * s * f_quad);
        for (std::size_t i = 0; i < m; ++i) delta -= std::log1p(dg(i) / g(i));
        return delta;
      };
      double s = 1.0;
      while (s >= 1e-20 && !feasible(s)) s *= settings.line_search_beta;
      while (s >= 1e-20 && !(change(s) <= settings.line_search_alpha * s * slope)) {
        s *= settings.line_search_beta;
      }
      ++iterations;
      if (s < 1e-20) break;  // no progress possible at this t
      const VectorXd y_new = y + s * d;
      VectorXd g_new(m);
      values(y_new, g_new);
      if (m > 0 && !(g_new.maxCoeff() < 0.0)) break;
      y = y_new;
      g = g_new;
      if (!std::isfinite(prob.f0(y)) || std::abs(prob.f0(y)) > 1e300) {
        out.numerical_failure = true;
        out.message = "objective unbounded below";
        out.y = y;
        out.t = t;
        return out;
      }
      if (stop(y, g)) {
        out.stopped_early = true;
        out.y = y;
        out.t = t;
        return out;
      }
    }
    const double gap = static_cast<double>(m) / t;
    out.gaps.push_back(gap);
    if (final_stage || gap <= settings.duality_gap_tol) {
      if (final_stage) {
        out.converged = true;
        out.y = y;
        out.t = t;
        return out;
      }
    }
    t = std::min(t * settings.barrier_mu, std::max(t, static_cast<double>(m) / settings.duality_gap_tol));
    if (static_cast<double>(m) / t > settings.duality_gap_tol && t * settings.barrier_mu > 1e300) {
      out.numerical_failure = true;
      out.message = "barrier parameter overflow";
      out.y = y;
      out.t = t;
      return out;
    }
  }
}

// Active-set polish. Near the end of the barrier the multipliers of strongly
// active constraints are recovered from constraint values of order 1e-12,
// which round-off corrupts. Newton steps on the KKT system of the identified
// active set (treated as equalities) recover an accurate point and duals.
// Returns false if the active set is inconsistent with a KKT point.
bool polish(const Reduced& prob, VectorXd& y, VectorXd& lam, bool nonconvex) {
  const std::size_t m = prob.cons.size();
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < m; ++i) {
    if (lam(i) > -prob.cons[i].value(y)) active.push_back(i);
  }
  const Eigen::Index k = y.size();
  const Eigen::Index na = static_cast<Eigen::Index>(active.size());
  VectorXd ya = y;
  VectorXd la = VectorXd::Zero(na);
  for (Eigen::Index j = 0; j < na; ++j) la(j) = lam(active[j]);
  for (int it = 0; it < 10; ++it) {
    MatrixXd kkt = MatrixXd::Zero(k + na, k + na);
    VectorXd rhs(k + na);
    kkt.topLeftCorner(k, k) = prob.P;
    VectorXd grad = prob.P * ya + prob.q;
    for (Eigen::Index j = 0; j < na; ++j) {
      const auto& c = prob.cons[active[j]];
      kkt.topLeftCorner(k, k) += la(j) * c.P;
      const VectorXd gj = c.gradient(ya);
      kkt.block(0, k + j, k, 1) = gj;
      kkt.block(k + j, 0, 1, k) = gj.transpose();
      rhs(k + j) = -c.value(ya);
    }
    rhs.head(k) = -grad;
    // Solve for the step in y and the new multipliers directly.
    Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (!lu.isInvertible()) return false;
    const VectorXd sol = lu.solve(rhs);
    if (!sol.allFinite()) return false;
    const VectorXd step = sol.head(k);
    ya += step;
    la = sol.tail(na);
    if (step.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + ya.lpNorm<Eigen::Infinity>())) break;
  }
  if (!nonconvex && na > 0 && la.minCoeff() < 0.0) return false;
  for (std::size_t i = 0; i < m; ++i) {
    if (std::find(active.begin(), active.end(), i) == active.end() && !(prob.cons[i].value(ya) < 0.0)) return false;
  }
  y = ya;
  lam.setZero();
  for (Eigen::Index j = 0; j < na; ++j) lam(active[j]) = la(j);
  return true;
}

bool isPsd(const MatrixXd& a) {
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return minEigenvalue(symmetrize(a)) >= -1e-9 * scale;
}

VectorXd leastSquaresEqDuals(const CanonicalQcqp& p, const VectorXd& x, const VectorXd& lam) {
  if (p.A.rows() == 0) return VectorXd();
  VectorXd g = p.P * x + p.q;
  for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
    g += lam(static_cast<Eigen::Index>(i)) * p.inequalities[i].gradient(x);
  }
  return -pinv(p.A.transpose(), 1e-12) * g;
}

void finalize(const CanonicalQcqp& p, const SolverSettings& settings, Solution& sol) {
  sol.objective = p.objective(sol.x);
  sol.kkt = kktResiduals(p, sol.x, sol.eq_duals, sol.ineq_duals);
  if (sol.status == SolverStatus::Optimal) {
    const KktResiduals& k = sol.kkt;
    const bool ok = k.stationarity <= settings.stationarity_tol && k.primal_eq <= settings.eq_tol &&
                    k.primal_ineq <= settings.ineq_tol && k.complementarity <= settings.duality_gap_tol;
    if (!ok) {
      sol.status = SolverStatus::NumericalFailure;
      sol.message = fmt::format("KKT tolerances not met (stat {:.3g}, eq {:.3g}, ineq {:.3g}, comp {:.3g})",
                                k.stationarity, k.primal_eq, k.primal_ineq, k.complementarity);
    }
  }
}

}  // namespace

Solution solveQpFastPath(const CanonicalQcqp& p, const SolverSettings& settings) {
  checkDimensions(p);
  validate(settings);
  if (!p.inequalities.empty()) throw InvalidInput("fast path: problem has inequalities");
  if (settings.mode == SolverMode::Convex && !isPsd(p.P)) {
    throw InvalidInput("qcqp: objective Hessian is not positive semi-definite");
  }
  const auto start = Clock::now();
  Solution sol;
  const AffineSet set = affineSet(p, settings.eq_tol);
  if (!set.consistent) {
    sol.status = SolverStatus::Infeasible;
    sol.message = "equality constraints are inconsistent";
    sol.x = set.x0;
    sol.eq_duals = VectorXd::Zero(p.A.rows());
    sol.ineq_duals = VectorXd();
    finalize(p, settings, sol);
    return sol;
  }
  const Reduced r = reduce(p, set);
  VectorXd y;
  if (r.q.size() == 0) {
    y = VectorXd();
  } else {
    const MatrixXd& H = r.P;
    if (settings.mode == SolverMode::NonconvexLocal) {
      bool shifted = false;
      if (!newtonDirection(H, r.q, true, y, shifted)) throw NumericalFailure("fast path: KKT solve failed");
      sol.local_only = shifted || !isPsd(p.P);
    } else {
      Eigen::LDLT<MatrixXd> ldlt(H);
      const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
      if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-13 * scale) {
        sol.status = SolverStatus::NumericalFailure;
        sol.message = "reduced Hessian is singular; the QP has no unique minimizer";
        sol.x = set.x0;
        sol.eq_duals = VectorXd::Zero(p.A.rows());
        finalize(p, settings, sol);
        return sol;
      }
      y = -ldlt.solve(r.q);
      // One step of iterative refinement.
      y -= ldlt.solve(H * y + r.q);
    }
  }
  sol.x = set.x0 + set.Z * y;
  sol.ineq_duals = VectorXd();
  sol.eq_duals = leastSquaresEqDuals(p, sol.x, VectorXd());
  sol.status = SolverStatus::Optimal;
  sol.iterations = 1;
  sol.outer_iterations = 1;
  sol.gap_history.push_back(0.0);
  sol.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
  finalize(p, settings, sol);
  return sol;
}

static Solution solveFrom(const CanonicalQcqp& p, const SolverSettings& settings, const VectorXd* warm_start) {
  checkDimensions(p);
  validate(settings);
  const bool nonconvex = settings.mode == SolverMode::NonconvexLocal;
  bool problem_convex = isPsd(p.P);
  for (const auto& c : p.inequalities) problem_convex = problem_convex && isPsd(c.P);
  if (!nonconvex && !problem_convex) {
    throw InvalidInput("qcqp: convex mode requires positive semi-definite objective and constraint Hessians");
  }
  if (p.inequalities.empty()) {
    Solution sol = solveQpFastPath(p, settings);
    if (nonconvex && !problem_convex) sol.local_only = true;
    return sol;
  }
  const auto start = Clock::now();
  const std::size_t m = p.inequalities.size();
  Solution sol;
  sol.local_only = nonconvex && !problem_convex;
  const AffineSet set = affineSet(p, settings.eq_tol);
  sol.eq_duals = VectorXd::Zero(p.A.rows());
  sol.ineq_duals = VectorXd::Zero(static_cast<Eigen::Index>(m));
  if (!set.consistent) {
    sol.status = SolverStatus::Infeasible;
    sol.message = "equality constraints are inconsistent";
    sol.x = set.x0;
    finalize(p, settings, sol);
    return sol;
  }
  const Reduced r = reduce(p, set);
  const Eigen::Index k = r.q.size();
  VectorXd y = VectorXd::Zero(k);
  if (warm_start != nullptr && warm_start->size() == p.q.size() && warm_start->allFinite()) {
    y = set.Z.transpose() * (*warm_start - set.x0);
  }
  int iterations = 0;

  auto maxValue = [&](const VectorXd& z) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& c : r.cons) worst = std::max(worst, c.value(z));
    return worst;
  };

  if (!(maxValue(y) < 0.0)) {
    // Phase I over (y, s): minimize s subject to cons_i(y) <= s and s >= -1.
    Reduced ph;
    ph.P = MatrixXd::Zero(k + 1, k + 1);
    ph.q = VectorXd::Zero(k + 1);
    ph.q(k) = 1.0;
    for (const auto& c : r.cons) {
      QuadraticInequality e;
      e.P = MatrixXd::Zero(k + 1, k + 1);
      e.P.topLeftCorner(k, k) = c.P;
      e.q.resize(k + 1);
      e.q << c.q, -1.0;
      e.r = c.r;
      ph.cons.push_back(std::move(e));
    }
    QuadraticInequality floor;
    floor.P = MatrixXd::Zero(k + 1, k + 1);
    floor.q = VectorXd::Zero(k + 1);
    floor.q(k) = -1.0;
    floor.r = -1.0;
    ph.cons.push_back(std::move(floor));
    VectorXd z(k + 1);
    const double s0 = maxValue(y);
    if (!std::isfinite(s0)) throw InvalidInput("qcqp: constraints are not finite at the starting point");
    z << y, std::max(s0, 0.0) + 1.0;
    const double target = -1e-6 * (1.0 + std::abs(s0));
    BarrierResult p1 = barrier(
        ph, z, settings, nonconvex, iterations, [&](const VectorXd& zz, const VectorXd&) { return zz(k) < target; },
        [](const VectorXd&, const VectorXd&, double) { return false; });
    sol.outer_iterations += p1.outer;
    y = p1.y.head(k);
    if (!(maxValue(y) < 0.0)) {
      sol.x = set.x0 + set.Z * y;
      sol.iterations = iterations;
      if (p1.numerical_failure) {
        sol.status = SolverStatus::NumericalFailure;
        sol.message = "phase I: " + p1.message;
      } else if (p1.converged || p1.stopped_early) {
        sol.status = nonconvex ? SolverStatus::NumericalFailure : SolverStatus::Infeasible;
        sol.message = fmt::format("no strictly feasible point (phase I optimum {:.6g})", p1.y(k));
      } else {
        sol.status = SolverStatus::MaxIters;
        sol.message = "phase I: " + p1.message;
      }
      sol.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
      finalize(p, settings, sol);
      return sol;
    }
  }

  const MatrixXd at_pinv = p.A.rows() > 0 ? pinv(p.A.transpose(), 1e-12) : MatrixXd();
  auto optimal = [&](const VectorXd& yy, const VectorXd& g, double t) {
    const VectorXd x = set.x0 + set.Z * yy;
    const VectorXd grad0 = p.P * x + p.q;
    VectorXd lagrangian = grad0;
    for (std::size_t i = 0; i < m; ++i) lagrangian -= p.inequalities[i].gradient(x) / (t * g(i) * r.cons_scale[i]);
    if (p.A.rows() > 0) lagrangian -= p.A.transpose() * (at_pinv * lagrangian);
    return lagrangian.lpNorm<Eigen::Infinity>() <= 0.5 * settings.stationarity_tol * (1.0 + grad0.lpNorm<Eigen::Infinity>());
  };
  BarrierResult p2 = barrier(
      r, y, settings, nonconvex, iterations, [](const VectorXd&, const VectorXd&) { return false; }, optimal);
  sol.outer_iterations += p2.outer;
  sol.gap_history = p2.gaps;
  sol.iterations = iterations;
  sol.local_only = sol.local_only || p2.shifted;
  sol.x = set.x0 + set.Z * p2.y;
  VectorXd lam_scaled(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) lam_scaled(i) = -1.0 / (p2.t * r.cons[i].value(p2.y));
  for (std::size_t i = 0; i < m; ++i) sol.ineq_duals(i) = lam_scaled(i) / r.cons_scale[i];
  sol.eq_duals = leastSquaresEqDuals(p, sol.x, sol.ineq_duals);
  if (p2.converged) {
    VectorXd y_pol = p2.y;
    if (polish(r, y_pol, lam_scaled, nonconvex)) {
      const VectorXd x_pol = set.x0 + set.Z * y_pol;
      VectorXd lam_pol(static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < m; ++i) lam_pol(i) = lam_scaled(i) / r.cons_scale[i];
      const VectorXd nu_pol = leastSquaresEqDuals(p, x_pol, lam_pol);
      auto score = [&](const KktResiduals& k) {
        return std::max({k.stationarity / settings.stationarity_tol, k.primal_eq / settings.eq_tol,
                         k.primal_ineq / settings.ineq_tol, k.complementarity / settings.duality_gap_tol});
      };
      const bool better = score(kktResiduals(p, x_pol, nu_pol, lam_pol)) <
                          score(kktResiduals(p, sol.x, sol.eq_duals, sol.ineq_duals));
      if (better && (nonconvex || p.objective(x_pol) <= p.objective(sol.x) + settings.duality_gap_tol)) {
        sol.x = x_pol;
        sol.ineq_duals = lam_pol;
        sol.eq_duals = nu_pol;
      }
    }
  }
  if (p2.converged) {
    sol.status = SolverStatus::Optimal;
  } else if (p2.numerical_failure) {
    sol.status = SolverStatus::NumericalFailure;
    sol.message = p2.message;
  } else {
    sol.status = SolverStatus::MaxIters;
    sol.message = p2.message;
  }
  sol.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
  finalize(p, settings, sol);
  return sol;
}

// A warm start taken from a previous solution can sit very close to the
// constraint boundary, where the first centerings are badly conditioned.
// A failed warm-started solve is retried from the cold start.
Solution solve(const CanonicalQcqp& p, const SolverSettings& settings, const VectorXd* warm_start) {
  Solution sol = solveFrom(p, settings, warm_start);
  if (warm_start == nullptr || sol.status == SolverStatus::Optimal || sol.status == SolverStatus::Infeasible) {
    return sol;
  }
  Solution cold = solveFrom(p, settings, nullptr);
  cold.iterations += sol.iterations;
  cold.outer_iterations += sol.outer_iterations;
  cold.wall_time += sol.wall_time;
  return cold;
}

namespace {

nlohmann::json matrixJson(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vectorJson(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

MatrixXd matrixFrom(const nlohmann::json& j, Eigen::Index cols, const char* field) {
  if (!j.is_array()) throw InvalidInput(fmt::format("qcqp json: {} must be an array of rows", field));
  MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols) {
      throw InvalidInput(fmt::format("qcqp json: {}[{}] must have {} entries", field, i, cols));
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = j[i][c].get<double>();
  }
  return m;
}

VectorXd vectorFrom(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw InvalidInput(fmt::format("qcqp json: {} must be an array", field));
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

std::string dumpProblem(const CanonicalQcqp& p) {
  checkDimensions(p);
  nlohmann::json j;
  j["n"] = p.variables();
  j["P"] = matrixJson(p.P);
  j["q"] = vectorJson(p.q);
  j["constant"] = p.constant;
  j["A"] = matrixJson(p.A);
  j["b"] = vectorJson(p.b);
  j["inequalities"] = nlohmann::json::array();
  for (const auto& c : p.inequalities) {
    j["inequalities"].push_back({{"P", matrixJson(c.P)}, {"q", vectorJson(c.q)}, {"r", c.r}});
  }
  return j.dump(1);
}

CanonicalQcqp loadProblem(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    const Eigen::Index n = j.at("n").get<Eigen::Index>();
    CanonicalQcqp p;
    p.P = matrixFrom(j.at("P"), n, "P");
    p.q = vectorFrom(j.at("q"), "q");
    p.constant = j.value("constant", 0.0);
    p.A = matrixFrom(j.at("A"), n, "A");
    p.b = vectorFrom(j.at("b"), "b");
    for (const auto& c : j.at("inequalities")) {
      QuadraticInequality qi;
      qi.P = matrixFrom(c.at("P"), n, "inequalities.P");
      qi.q = vectorFrom(c.at("q"), "inequalities.q");
      qi.r = c.at("r").get<double>();
      p.inequalities.push_back(std::move(qi));
    }
    checkDimensions(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(fmt::format("qcqp json: {}", e.what()));
  }
}

}  // namespace hqmpc
