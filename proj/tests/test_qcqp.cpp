#include <chrono>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hqmpc/errors.hpp"
#include "hqmpc/qcqp.hpp"
#include "oracles.hpp"

using namespace hqmpc;

namespace {

QuadraticInequality inequality(const MatrixXd& P, const VectorXd& q, double r) { return {P, q, r}; }

CanonicalQcqp unconstrained(const MatrixXd& P, const VectorXd& q) {
  CanonicalQcqp p;
  p.P = P;
  p.q = q;
  p.A = MatrixXd::Zero(0, q.size());
  p.b = VectorXd::Zero(0);
  return p;
}

void expectCertified(const CanonicalQcqp& p, const Solution& s, double tol) {
  // Recompute the residuals from the problem data outside the solver.
  const KktResiduals k = kktResiduals(p, s.x, s.eq_duals, s.ineq_duals);
  EXPECT_LE(k.stationarity, tol);
  EXPECT_LE(k.primal_eq, tol);
  EXPECT_LE(k.primal_ineq, tol);
  EXPECT_LE(k.complementarity, tol);
  for (Eigen::Index i = 0; i < s.ineq_duals.size(); ++i) EXPECT_GE(s.ineq_duals(i), 0.0);
}

}  // namespace

TEST(QcqpAnalytic, HalfLineConstraint) {
  // min x^2  s.t.  -x + 1 <= 0
  CanonicalQcqp p = unconstrained(MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1));
  p.inequalities.push_back(inequality(MatrixXd::Zero(1, 1), VectorXd::Constant(1, -1.0), 1.0));
  const Solution s = solve(p);
  ASSERT_EQ(s.status, SolverStatus::Optimal);
  EXPECT_NEAR(s.x(0), 1.0, 1e-9);
  EXPECT_NEAR(s.objective, 1.0, 1e-9);
  EXPECT_NEAR(s.ineq_duals(0), 2.0, 1e-6);
  expectCertified(p, s, 1e-8);
}

TEST(QcqpAnalytic, DiskProjection) {
  // min (x-2)^2 + (y-2)^2  s.t.  x^2 + y^2 <= 1
  CanonicalQcqp p = unconstrained(2.0 * MatrixXd::Identity(2, 2), VectorXd::Constant(2, -4.0));
  p.constant = 8.0;
  p.inequalities.push_back(inequality(2.0 * MatrixXd::Identity(2, 2), VectorXd::Zero(2), -1.0));
  const Solution s = solve(p);
  ASSERT_EQ(s.status, SolverStatus::Optimal);
  EXPECT_NEAR(s.x(0), 1 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(s.x(1), 1 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(s.objective, 2 * std::pow(2 - 1 / std::sqrt(2.0), 2), 1e-9);
  expectCertified(p, s, 1e-8);
}

TEST(QcqpRandom, MatchesKnownOptimum) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> vars(2, 12), eqs(0, 4), ineqs(0, 3);
  const auto start = std::chrono::steady_clock::now();
  int optimal = 0;
  for (int k = 0; k < 100; ++k) {
    const int n = vars(rng);
    const int p = std::min(eqs(rng), n - 1);
    const int m = ineqs(rng);
    const int active = m == 0 ? 0 : std::uniform_int_distribution<int>(0, m)(rng);
    const oracle::KnownQcqp known = oracle::knownQcqp(rng, n, p, m, active);
    const Solution s = solve(known.problem);
    ASSERT_EQ(s.status, SolverStatus::Optimal) << "problem " << k << ": " << s.message;
    ++optimal;
    EXPECT_NEAR(s.objective, known.f_star, 1e-6 * std::max(1.0, std::abs(known.f_star))) << "problem " << k;
    EXPECT_NEAR(known.problem.objective(s.x), known.f_star, 1e-6 * std::max(1.0, std::abs(known.f_star)));
    expectCertified(known.problem, s, 1e-8);
  }
  EXPECT_EQ(optimal, 100);
  EXPECT_LE(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
}

TEST(QcqpRandom, DualityGapIsNonincreasing) {
  std::mt19937_64 rng(52);
  for (int k = 0; k < 20; ++k) {
    const oracle::KnownQcqp known = oracle::knownQcqp(rng, 6, 2, 3, 2);
    const Solution s = solve(known.problem);
    ASSERT_EQ(s.status, SolverStatus::Optimal);
    for (std::size_t i = 1; i < s.gap_history.size(); ++i) {
      EXPECT_LE(s.gap_history[i], s.gap_history[i - 1] + 1e-12);
    }
  }
}

TEST(QcqpRandom, Deterministic) {
  std::mt19937_64 rng(53);
  const oracle::KnownQcqp known = oracle::knownQcqp(rng, 8, 2, 3, 2);
  const Solution a = solve(known.problem);
  const Solution b = solve(known.problem);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.outer_iterations, b.outer_iterations);
  EXPECT_LE((a.x - b.x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QcqpRandom, WarmStartReachesTheSameOptimum) {
  std::mt19937_64 rng(54);
  for (int k = 0; k < 20; ++k) {
    const oracle::KnownQcqp known = oracle::knownQcqp(rng, 6, 1, 3, 1);
    const VectorXd warm = known.x_star + 0.01 * VectorXd::Ones(6);
    const Solution s = solve(known.problem, {}, &warm);
    ASSERT_EQ(s.status, SolverStatus::Optimal);
    EXPECT_NEAR(s.objective, known.f_star, 1e-6 * std::max(1.0, std::abs(known.f_star)));
  }
}

TEST(QcqpStatus, InfeasibleQuadratic) {
  // x^2 + 1 <= 0 has no solution.
  CanonicalQcqp p = unconstrained(MatrixXd::Identity(1, 1), VectorXd::Zero(1));
  p.inequalities.push_back(inequality(MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1), 1.0));
  EXPECT_EQ(solve(p).status, SolverStatus::Infeasible);
}

TEST(QcqpStatus, InfeasibleIntersection) {
  // |x| <= 1 and x >= 2.
  CanonicalQcqp p = unconstrained(MatrixXd::Identity(1, 1), VectorXd::Zero(1));
  p.inequalities.push_back(inequality(MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1), -1.0));
  p.inequalities.push_back(inequality(MatrixXd::Zero(1, 1), VectorXd::Constant(1, -1.0), 2.0));
  EXPECT_EQ(solve(p).status, SolverStatus::Infeasible);
}

TEST(QcqpStatus, InconsistentEqualities) {
  CanonicalQcqp p = unconstrained(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  p.A = (MatrixXd(2, 2) << 1, 1, 1, 1).finished();
  p.b = (VectorXd(2) << 1, 2).finished();
  EXPECT_EQ(solve(p).status, SolverStatus::Infeasible);
  EXPECT_EQ(solveQpFastPath(p).status, SolverStatus::Infeasible);
}

TEST(QcqpStatus, MaxItersReturnsIterateAndResiduals) {
  std::mt19937_64 rng(55);
  const oracle::KnownQcqp known = oracle::knownQcqp(rng, 8, 2, 3, 3);
  SolverSettings settings;
  settings.max_iters = 3;
  const Solution s = solve(known.problem, settings);
  EXPECT_EQ(s.status, SolverStatus::MaxIters);
  EXPECT_EQ(s.x.size(), 8);
  EXPECT_TRUE(s.x.allFinite());
}

TEST(QcqpStatus, ConvexModeRejectsIndefiniteData) {
  CanonicalQcqp p = unconstrained(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  p.inequalities.push_back(inequality((MatrixXd(2, 2) << 1, 0, 0, -1).finished(), VectorXd::Zero(2), -1.0));
  EXPECT_THROW(solve(p), InvalidInput);
  CanonicalQcqp q = unconstrained(-MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  EXPECT_THROW(solveQpFastPath(q), InvalidInput);
}

TEST(QcqpStatus, NonconvexModeFlagsLocalSolution) {
  // min x^2 + y^2  s.t.  1 - x^2 + y^2 <= 0, an indefinite constraint; the
  // minima are (+-1, 0) with objective 1.
  CanonicalQcqp p = unconstrained(2.0 * MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  p.inequalities.push_back(inequality((MatrixXd(2, 2) << -2, 0, 0, 2).finished(), VectorXd::Zero(2), 1.0));
  SolverSettings settings;
  settings.mode = SolverMode::NonconvexLocal;
  const VectorXd warm = (VectorXd(2) << 2.0, 0.5).finished();
  const Solution s = solve(p, settings, &warm);
  ASSERT_EQ(s.status, SolverStatus::Optimal) << s.message;
  EXPECT_TRUE(s.local_only);
  EXPECT_NEAR(std::abs(s.x(0)), 1.0, 1e-6);
  EXPECT_NEAR(s.x(1), 0.0, 1e-6);
}

TEST(QcqpSettings, Validation) {
  SolverSettings s;
  EXPECT_NO_THROW(validate(s));
  s.barrier_mu = 1.0;
  EXPECT_THROW(validate(s), InvalidInput);
  s = SolverSettings{};
  s.eq_tol = 0.0;
  EXPECT_THROW(validate(s), InvalidInput);
  s = SolverSettings{};
  s.max_iters = 0;
  EXPECT_THROW(validate(s), InvalidInput);
}

TEST(QcqpDimensions, NamesTheBadInequality) {
  CanonicalQcqp p = unconstrained(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  p.inequalities.push_back(inequality(MatrixXd::Identity(2, 2), VectorXd::Zero(2), -1.0));
  p.inequalities.push_back(inequality(MatrixXd::Identity(3, 3), VectorXd::Zero(3), -1.0));
  try {
    checkDimensions(p);
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("inequality 1"), std::string::npos);
  }
}

TEST(QpFastPath, UnconstrainedNormalEquations) {
  std::mt19937_64 rng(56);
  const MatrixXd H = oracle::randomPsd(rng, 5, 5, 1.0) + 0.5 * MatrixXd::Identity(5, 5);
  VectorXd g(5);
  g << 1, -2, 0.5, 3, -1;
  const CanonicalQcqp p = unconstrained(H, g);
  const Solution s = solveQpFastPath(p);
  ASSERT_EQ(s.status, SolverStatus::Optimal);
  EXPECT_LE((s.x + H.inverse() * g).norm(), 1e-10);
}

TEST(QpFastPath, MatchesNullSpaceElimination) {
  std::mt19937_64 rng(57);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 50; ++k) {
    const int n = 7, m = 3;
    CanonicalQcqp p = unconstrained(oracle::randomPsd(rng, n, n, 1.0) + 0.1 * MatrixXd::Identity(n, n),
                                    VectorXd::NullaryExpr(n, [&] { return gauss(rng); }));
    p.A = MatrixXd::NullaryExpr(m, n, [&] { return gauss(rng); });
    p.b = VectorXd::NullaryExpr(m, [&] { return gauss(rng); });
    // Oracle: x = x_p + Z y with Z spanning null(A) from a full QR of A^T.
    const Eigen::HouseholderQR<MatrixXd> qr(p.A.transpose());
    const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
    const MatrixXd Z = Q.rightCols(n - m);
    const VectorXd xp = p.A.transpose() * (p.A * p.A.transpose()).ldlt().solve(p.b);
    const VectorXd y = -(Z.transpose() * p.P * Z).ldlt().solve(Z.transpose() * (p.P * xp + p.q));
    const VectorXd ref = xp + Z * y;
    const Solution s = solveQpFastPath(p);
    ASSERT_EQ(s.status, SolverStatus::Optimal);
    EXPECT_LE((s.x - ref).norm(), 1e-10 * std::max(1.0, ref.norm()));
    const KktResiduals r = kktResiduals(p, s.x, s.eq_duals, s.ineq_duals);
    EXPECT_LE(r.stationarity, 1e-10);
    EXPECT_LE(r.primal_eq, 1e-10);
  }
}

TEST(QpFastPath, RedundantEqualityRow) {
  // min |x|^2  s.t.  x0 + x1 = 1 written twice: minimum-norm point (0.5, 0.5, 0).
  CanonicalQcqp p = unconstrained(2.0 * MatrixXd::Identity(3, 3), VectorXd::Zero(3));
  p.A = (MatrixXd(2, 3) << 1, 1, 0, 1, 1, 0).finished();
  p.b = VectorXd::Ones(2);
  const Solution s = solveQpFastPath(p);
  ASSERT_EQ(s.status, SolverStatus::Optimal);
  EXPECT_LE((s.x - Eigen::Vector3d(0.5, 0.5, 0.0)).norm(), 1e-8);
  EXPECT_LE(kktResiduals(p, s.x, s.eq_duals, s.ineq_duals).primal_eq, 1e-8);
}

TEST(QpFastPath, RejectsInequalities) {
  CanonicalQcqp p = unconstrained(MatrixXd::Identity(1, 1), VectorXd::Zero(1));
  p.inequalities.push_back(inequality(MatrixXd::Identity(1, 1), VectorXd::Zero(1), -1.0));
  EXPECT_THROW(solveQpFastPath(p), InvalidInput);
}

TEST(QcqpDump, RoundTripIsExact) {
  std::mt19937_64 rng(58);
  const oracle::KnownQcqp known = oracle::knownQcqp(rng, 5, 2, 3, 1);
  const CanonicalQcqp back = loadProblem(dumpProblem(known.problem));
  EXPECT_EQ(back.P, known.problem.P);
  EXPECT_EQ(back.q, known.problem.q);
  EXPECT_EQ(back.constant, known.problem.constant);
  EXPECT_EQ(back.A, known.problem.A);
  EXPECT_EQ(back.b, known.problem.b);
  ASSERT_EQ(back.inequalities.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back.inequalities[i].P, known.problem.inequalities[i].P);
    EXPECT_EQ(back.inequalities[i].q, known.problem.inequalities[i].q);
    EXPECT_EQ(back.inequalities[i].r, known.problem.inequalities[i].r);
  }
}

TEST(QcqpDump, MalformedInputIsRejected) {
  EXPECT_THROW(loadProblem("{"), InvalidInput);
  EXPECT_THROW(loadProblem(R"({"n": 2, "P": [[1, 0]], "q": [0, 0], "A": [], "b": [], "inequalities": []})"),
               InvalidInput);
}
