#include <random>

#include <gtest/gtest.h>

#include "hqmpc/dynamics.hpp"
#include "hqmpc/errors.hpp"
#include "hqmpc/nominal.hpp"
#include "hqmpc/scenario.hpp"
#include "oracles.hpp"

using namespace hqmpc;

namespace {

MatrixXd randomMatrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g;
  MatrixXd a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = g(rng);
  return a;
}

VectorXd randomVector(std::mt19937_64& rng, int n) { return randomMatrix(rng, n, 1); }

// Two-stage least squares: task 1 exactly in the least-squares sense, then
// task 2 within the solution set of task 1 (minimum-norm overall).
VectorXd lexicographic(const MatrixXd& j1, const VectorXd& d1, const MatrixXd& j2, const VectorXd& d2) {
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> c1(j1);
  const VectorXd base = c1.solve(d1);
  const MatrixXd n1 = MatrixXd::Identity(j1.cols(), j1.cols()) - c1.pseudoInverse() * j1;
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> c2(j2 * n1);
  return base + n1 * c2.solve(d2 - j2 * base);
}

}  // namespace

TEST(LinearTrajectory, EndpointsAndConstantVelocity) {
  const VectorXd a = VectorXd::Constant(2, 1.0), b = VectorXd::Constant(2, 3.0);
  const TaskTrajectory t = linearTrajectory(a, b, 0.8, 80);
  ASSERT_EQ(t.steps(), 80);
  EXPECT_EQ(t.position.front(), a);
  EXPECT_LE((t.position.back() - b).norm(), 1e-15);
  for (const auto& v : t.velocity) EXPECT_NEAR(v(0), 2.5, 1e-12);
}

TEST(Window, HoldsFinalSampleWithZeroVelocity) {
  const TaskTrajectory t = linearTrajectory(VectorXd::Zero(1), VectorXd::Ones(1), 1.0, 10);
  const TaskTrajectory w = window(t, 8, 5);
  ASSERT_EQ(w.steps(), 5);
  EXPECT_EQ(w.position[0], t.position[8]);
  EXPECT_EQ(w.position[2], t.position[10]);
  EXPECT_EQ(w.position[5], t.position[10]);
  EXPECT_EQ(w.velocity[5](0), 0.0);
}

TEST(PrioritizedIk, SquareNonsingularIsInverse) {
  std::mt19937_64 rng(31);
  const MatrixXd j = randomMatrix(rng, 3, 3) + 3.0 * MatrixXd::Identity(3, 3);
  const VectorXd dx = randomVector(rng, 3);
  const IkStep s = prioritizedIkStep({j}, {dx});
  EXPECT_LE((s.dq - j.inverse() * dx).norm(), 1e-12);
}

TEST(PrioritizedIk, ExhaustedNullSpaceIgnoresLowerTask) {
  const MatrixXd j = MatrixXd::Constant(1, 1, 2.0);
  const IkStep s = prioritizedIkStep({j, j}, {VectorXd::Constant(1, 1.0), VectorXd::Constant(1, -7.0)});
  EXPECT_NEAR(s.dq(0), 0.5, 1e-15);
}

TEST(PrioritizedIk, TwoLinkMatchesLexicographicLeastSquares) {
  const RobotModel m = loadModel(oracle::modelPath("two_link.json"));
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> angle(-2.5, 2.5);
  for (int k = 0; k < 50; ++k) {
    VectorXd q(2);
    q << angle(rng), angle(rng);
    const MatrixXd ee = oracle::pointJacobian<double>(m, q, 1, Vec3(0, 0, -0.5)).topRows(1);
    MatrixXd joint1(1, 2);
    joint1 << 1, 0;
    const VectorXd d1 = VectorXd::Constant(1, 0.01), d2 = VectorXd::Constant(1, -0.02);
    const IkStep s = prioritizedIkStep({ee, joint1}, {d1, d2});
    const VectorXd ref = lexicographic(ee, d1, joint1, d2);
    EXPECT_LE((s.dq - ref).norm(), 1e-10 * std::max(1.0, ref.norm()));
    if (!s.damped) {
      EXPECT_LE(s.residuals[0], 1e-10);
      EXPECT_LE(s.residuals[1], 1e-10);
    }
  }
}

TEST(PrioritizedIk, AppendingTasksNeverHurtsHigherPriorities) {
  std::mt19937_64 rng(33);
  for (int k = 0; k < 100; ++k) {
    std::vector<MatrixXd> js{randomMatrix(rng, 2, 4), randomMatrix(rng, 1, 4), randomMatrix(rng, 2, 4)};
    std::vector<VectorXd> ds{randomVector(rng, 2), randomVector(rng, 1), randomVector(rng, 2)};
    const IkStep full = prioritizedIkStep(js, ds);
    for (std::size_t cut = 1; cut < js.size(); ++cut) {
      const IkStep part = prioritizedIkStep({js.begin(), js.begin() + cut}, {ds.begin(), ds.begin() + cut});
      for (std::size_t level = 0; level < cut; ++level) {
        EXPECT_LE(full.residuals[level], part.residuals[level] + 1e-10);
      }
    }
  }
}

class MiniScorpioNominal : public ::testing::Test {
 protected:
  void SetUp() override { r = resolve(loadScenario(oracle::scenarioPath("two_task_mini_scorpio.json"))); }
  ResolvedScenario r;
};

TEST_F(MiniScorpioNominal, TopTaskIsTrackedByForwardKinematics) {
  const double dt = r.config.horizon.dt();
  const NominalTrajectory nom = buildNominal(r.model, r.x0, r.tasks, r.trajectories, dt);
  ASSERT_EQ(nom.steps(), 80);
  const TaskDef& wrist = r.tasks[0];
  for (int i = 0; i <= 80; ++i) {
    const oracle::Vec2<double> p = oracle::point<double>(r.model, nom.q[i], wrist.map.link, wrist.map.point);
    EXPECT_LE((p - r.trajectories[0].position[i]).lpNorm<Eigen::Infinity>(), 1e-3) << "step " << i;
  }
}

TEST_F(MiniScorpioNominal, AnchoredVelocityConsistentAndOnConstraint) {
  const double dt = r.config.horizon.dt();
  const NominalTrajectory nom = buildNominal(r.model, r.x0, r.tasks, r.trajectories, dt);
  EXPECT_EQ(nom.q[0], r.x0.q);
  EXPECT_EQ(nom.qd[0], r.x0.qd);
  ASSERT_EQ(nom.u.size(), 80u);
  for (int i = 0; i < 80; ++i) {
    EXPECT_LE((nom.qd[i + 1] * dt - (nom.q[i + 1] - nom.q[i])).lpNorm<Eigen::Infinity>(), 1e-15);
    EXPECT_EQ(nom.u[i].size(), r.model.m() + r.model.nc());
    EXPECT_TRUE(nom.u[i].allFinite());
  }
  for (const auto& q : nom.q) {
    EXPECT_LE((constraintValue(r.model, q) - r.model.constraintTarget()).lpNorm<Eigen::Infinity>(), 1e-3);
  }
}

TEST_F(MiniScorpioNominal, ConstantTargetsGiveStationaryNominal) {
  std::vector<TaskTrajectory> fixed;
  for (const auto& t : r.trajectories) {
    fixed.push_back(linearTrajectory(t.position[0], t.position[0], 0.8, 80));
  }
  const NominalTrajectory nom = buildNominal(r.model, r.x0, r.tasks, fixed, 0.01);
  for (int i = 0; i <= 80; ++i) {
    EXPECT_LE((nom.q[i] - r.x0.q).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LE(nom.qd[i].lpNorm<Eigen::Infinity>(), 1e-10);
  }
}

TEST_F(MiniScorpioNominal, DivergenceNamesTheStep) {
  std::vector<TaskTrajectory> far;
  for (const auto& t : r.trajectories) {
    far.push_back(linearTrajectory(t.position[0], t.position[0] + VectorXd::Constant(2, 5.0), 0.8, 80));
  }
  NominalOptions options;
  options.max_joint_step = 0.05;
  try {
    buildNominal(r.model, r.x0, r.tasks, far, 0.01, options);
    FAIL() << "expected NominalInfeasible";
  } catch (const NominalInfeasible& e) {
    EXPECT_GE(e.step(), 0);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(NonlinearConstraintNominal, StaysOnConstraintManifold) {
  const RobotModel m = loadModel(oracle::modelPath("mini_scorpio_nl.json"));
  PlantState x0{VectorXd(4), VectorXd::Zero(4), 0.0};
  x0.q << -M_PI / 4, M_PI / 2, -M_PI / 2, M_PI / 2;
  TaskDef tip;
  tip.name = "tip";
  tip.map.link = 3;
  tip.map.point = Vec3(0, 0, -0.1);
  tip.map.indices = {0, 2};
  tip.kp = VectorXd::Constant(2, 40.0);
  tip.kv = VectorXd::Constant(2, 2.0);
  const VectorXd start = oracle::point<double>(m, x0.q, 3, tip.map.point);
  const TaskTrajectory traj = linearTrajectory(start, start + VectorXd::Constant(2, 0.02), 0.8, 80);
  const NominalTrajectory nom = buildNominal(m, x0, {tip}, {traj}, 0.01);
  for (const auto& q : nom.q) {
    EXPECT_LE((constraintValue(m, q) - m.constraintTarget()).lpNorm<Eigen::Infinity>(), 1e-3);
  }
}
