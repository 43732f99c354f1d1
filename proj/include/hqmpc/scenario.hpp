#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hqmpc/mpc.hpp"

namespace hqmpc {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Angle as written in the file; `degrees` records a "deg" suffix.
struct Angle {
  double value = 0.0;
  bool degrees = false;

  double radians() const;
};

struct ScenarioTask {
  std::string name;
  int link = -1;                  // body-point task
  Vec3 point = Vec3::Zero();
  std::vector<int> axes;          // world axes 0..2
  std::vector<int> joints;        // joint-coordinate task when non-empty
  int priority = 1;
  std::optional<VectorXd> x_start;  // empty: task position at the initial configuration
  std::optional<VectorXd> x_end;    // absolute end point
  std::optional<VectorXd> x_delta;  // end point relative to the start
  VectorXd kp;
  VectorXd kv;
};

struct Scenario {
  std::string name;
  std::string model_path;  // as written, relative to base_dir
  std::string base_dir;
  std::vector<ScenarioTask> tasks;
  double t0 = 0.0;
  double tf = 0.8;
  double dt = 0.01;
  int Np = 10;
  int Ne = 4;
  HierarchySpec hierarchy;
  std::string default_controller = "mpc";
  FeedbackMode feedback = FeedbackMode::Measured;
  bool hierarchy_constraints = true;
  int hierarchy_first_step = 2;
  bool psd_projection = true;
  double w_c = 1e-2;  // W_c = w_c I
  SimulationOptions sim;
  SolverSettings solver;
  std::vector<Angle> initial_q;
  std::vector<double> initial_qd;  // rad/s, empty means zero

  HorizonSpec horizon() const;
  std::string resolvedModelPath() const;
};

/// Parses and validates structure; errors carry the field path.
Scenario parseScenario(const std::string& text, const std::string& base_dir = ".");
Scenario loadScenario(const std::string& path);
std::string serializeScenario(const Scenario& scenario);

/// Everything needed to run either controller.
struct ResolvedScenario {
  RobotModel model;
  std::vector<TaskDef> tasks;  // priority order
  std::vector<TaskTrajectory> trajectories;
  PlantState x0;
  MpcConfig config;
};

/// Loads the model and checks every scenario invariant against it.
ResolvedScenario resolve(const Scenario& scenario);
ResolvedScenario resolve(const Scenario& scenario, const RobotModel& model);

/// 64-bit FNV-1a of the canonical serialization.
std::uint64_t scenarioHash(const Scenario& scenario);

/// Rounds to the 12 significant digits used in every output file.
double roundOutput(double value);

struct RunOutput {
  TrajectoryLog log;
  Metrics metrics;
};

RunOutput runController(const ResolvedScenario& resolved, const std::string& controller);

/// trajectory.csv content. Timing columns are zero unless `timing`.
std::string trajectoryCsv(const TrajectoryLog& log, const RobotModel& model, bool timing);
/// summary.json content.
std::string summaryJson(const Scenario& scenario, const RunOutput& run, bool timing);
/// compare.json content.
std::string compareJson(const Scenario& scenario, const RunOutput& baseline, const RunOutput& candidate,
                        bool timing);

}  // namespace hqmpc
