#include "hqmpc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "hqmpc/errors.hpp"

namespace hqmpc {

using nlohmann::json;
using nlohmann::ordered_json;

double Angle::radians() const { return degrees ? value * M_PI / 180.0 : value; }

HorizonSpec Scenario::horizon() const {
  HorizonSpec h;
  h.t0 = t0;
  h.tf = tf;
  h.N = static_cast<int>(std::llround((tf - t0) / dt));
  h.Np = Np;
  h.Ne = Ne;
  return h;
}

std::string Scenario::resolvedModelPath() const {
  const std::filesystem::path p(model_path);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw InvalidInput(fmt::format("{}: {}", path, what));
}

const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

VectorXd vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], fmt::format("{}[{}]", path, i));
  return v;
}

// Scalar gains broadcast over the task dimension.
VectorXd gains(const json& j, int dim, const std::string& path) {
  if (j.is_number()) return VectorXd::Constant(dim, number(j, path));
  VectorXd v = vector(j, path);
  if (v.size() != dim) fail(path, fmt::format("expected {} entries", dim));
  return v;
}

int axis(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
  } else if (j.is_number_integer()) {
    const int a = j.get<int>();
    if (a >= 0 && a <= 2) return a;
  }
  fail(path, "expected one of \"x\", \"y\", \"z\"");
}

Angle angle(const json& j, const std::string& path) {
  if (j.is_number()) return Angle{number(j, path), false};
  if (!j.is_string()) fail(path, "expected a number or a string with a deg/rad suffix");
  std::string s = j.get<std::string>();
  Angle a;
  if (s.size() > 3 && s.compare(s.size() - 3, 3, "deg") == 0) {
    a.degrees = true;
    s.resize(s.size() - 3);
  } else if (s.size() > 3 && s.compare(s.size() - 3, 3, "rad") == 0) {
    s.resize(s.size() - 3);
  } else {
    fail(path, "angle strings need a deg or rad suffix");
  }
  try {
    std::size_t used = 0;
    a.value = std::stod(s, &used);
    while (used < s.size() && s[used] == ' ') ++used;
    if (used != s.size()) fail(path, "malformed angle");
  } catch (const std::logic_error&) {
    fail(path, "malformed angle");
  }
  if (!std::isfinite(a.value)) fail(path, "must be finite");
  return a;
}

const char* kAxisNames[] = {"x", "y", "z"};

ScenarioTask parseTask(const json& tj, const std::string& path) {
  ScenarioTask t;
  t.name = text(field(tj, "name", path), path + ".name");
  int dim = 0;
  if (tj.contains("joints")) {
    if (tj.contains("frame")) fail(path, "give either frame or joints, not both");
    const json& jj = tj["joints"];
    if (!jj.is_array() || jj.empty()) fail(path + ".joints", "expected a non-empty array");
    for (std::size_t i = 0; i < jj.size(); ++i) t.joints.push_back(integer(jj[i], fmt::format("{}.joints[{}]", path, i)));
    dim = static_cast<int>(t.joints.size());
  } else {
    const json& fr = field(tj, "frame", path);
    t.link = integer(field(fr, "link", path + ".frame"), path + ".frame.link");
    if (fr.contains("point")) {
      const VectorXd p = vector(fr["point"], path + ".frame.point");
      if (p.size() != 3) fail(path + ".frame.point", "expected 3 numbers");
      t.point = p;
    }
    const json& ax = field(tj, "axes", path);
    if (!ax.is_array() || ax.empty()) fail(path + ".axes", "expected a non-empty array");
    for (std::size_t i = 0; i < ax.size(); ++i) t.axes.push_back(axis(ax[i], fmt::format("{}.axes[{}]", path, i)));
    dim = static_cast<int>(t.axes.size());
  }
  t.priority = integer(field(tj, "priority", path), path + ".priority");
  if (tj.contains("interpolation") && text(tj["interpolation"], path + ".interpolation") != "linear") {
    fail(path + ".interpolation", "only \"linear\" is supported");
  }
  if (tj.contains("x_start")) {
    const json& xs = tj["x_start"];
    if (xs.is_string()) {
      if (xs.get<std::string>() != "initial") fail(path + ".x_start", "expected an array or \"initial\"");
    } else {
      t.x_start = vector(xs, path + ".x_start");
      if (t.x_start->size() != dim) fail(path + ".x_start", fmt::format("expected {} entries", dim));
    }
  }
  if (tj.contains("x_end") == tj.contains("x_delta")) fail(path, "give exactly one of x_end or x_delta");
  if (tj.contains("x_end")) {
    t.x_end = vector(tj["x_end"], path + ".x_end");
    if (t.x_end->size() != dim) fail(path + ".x_end", fmt::format("expected {} entries", dim));
  } else {
    t.x_delta = vector(tj["x_delta"], path + ".x_delta");
    if (t.x_delta->size() != dim) fail(path + ".x_delta", fmt::format("expected {} entries", dim));
  }
  t.kp = gains(field(tj, "kp", path), dim, path + ".kp");
  t.kv = gains(field(tj, "kv", path), dim, path + ".kv");
  return t;
}

ordered_json vectorJson(const VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ordered_json roundedJson(const VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(roundOutput(v(i)));
  return a;
}

}  // namespace

Scenario parseScenario(const std::string& content, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw InvalidInput(fmt::format("scenario: {}", e.what()));
  }
  if (!doc.is_object()) fail("scenario", "expected an object");
  Scenario s;
  s.base_dir = base_dir;
  try {
    s.name = doc.contains("name") ? text(doc["name"], "scenario.name") : "";
    s.model_path = text(field(doc, "model", "scenario"), "scenario.model");

    const json& q0 = field(doc, "initial_q", "scenario");
    if (!q0.is_array()) fail("scenario.initial_q", "expected an array");
    for (std::size_t i = 0; i < q0.size(); ++i) s.initial_q.push_back(angle(q0[i], fmt::format("scenario.initial_q[{}]", i)));
    if (doc.contains("initial_qd")) {
      const VectorXd v = vector(doc["initial_qd"], "scenario.initial_qd");
      s.initial_qd.assign(v.data(), v.data() + v.size());
    }

    const json& hz = field(doc, "horizon", "scenario");
    if (hz.contains("t0")) s.t0 = number(hz["t0"], "scenario.horizon.t0");
    s.tf = number(field(hz, "tf", "scenario.horizon"), "scenario.horizon.tf");
    s.dt = number(field(hz, "dt", "scenario.horizon"), "scenario.horizon.dt");
    s.Np = integer(field(hz, "Np", "scenario.horizon"), "scenario.horizon.Np");
    s.Ne = integer(field(hz, "Ne", "scenario.horizon"), "scenario.horizon.Ne");
    if (!(s.dt > 0.0)) fail("scenario.horizon.dt", "must be positive");
    if (!(s.tf > s.t0)) fail("scenario.horizon.tf", "must exceed t0");
    const double steps = (s.tf - s.t0) / s.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
      fail("scenario.horizon.dt", "(tf - t0) / dt must be an integer");
    }

    const json& tasks = field(doc, "tasks", "scenario");
    if (!tasks.is_array() || tasks.empty()) fail("scenario.tasks", "expected a non-empty array");
    for (std::size_t k = 0; k < tasks.size(); ++k) s.tasks.push_back(parseTask(tasks[k], fmt::format("scenario.tasks[{}]", k)));

    if (doc.contains("hierarchy")) {
      const json& h = doc["hierarchy"];
      const std::string mode = text(field(h, "mode", "scenario.hierarchy"), "scenario.hierarchy.mode");
      if (mode == "weak") {
        s.hierarchy.mode = HierarchySpec::Mode::Weak;
      } else if (mode == "strong") {
        s.hierarchy.mode = HierarchySpec::Mode::Strong;
      } else {
        fail("scenario.hierarchy.mode", "expected \"weak\" or \"strong\"");
      }
      if (h.contains("epsilons")) {
        const VectorXd e = vector(h["epsilons"], "scenario.hierarchy.epsilons");
        s.hierarchy.epsilons.assign(e.data(), e.data() + e.size());
      }
    }
    if (s.hierarchy.epsilons.empty()) s.hierarchy.epsilons.assign(s.tasks.size(), 0.0);

    if (doc.contains("controller")) {
      const json& c = doc["controller"];
      const std::string p = "scenario.controller";
      if (c.contains("default")) {
        s.default_controller = text(c["default"], p + ".default");
        if (s.default_controller != "wbc" && s.default_controller != "mpc") {
          fail(p + ".default", "expected one of wbc, mpc");
        }
      }
      if (c.contains("feedback")) {
        const std::string fb = text(c["feedback"], p + ".feedback");
        if (fb == "measured") {
          s.feedback = FeedbackMode::Measured;
        } else if (fb == "predicted") {
          s.feedback = FeedbackMode::Predicted;
        } else {
          fail(p + ".feedback", "expected \"measured\" or \"predicted\"");
        }
      }
      if (c.contains("hierarchy_constraints")) s.hierarchy_constraints = boolean(c["hierarchy_constraints"], p + ".hierarchy_constraints");
      if (c.contains("hierarchy_first_step")) s.hierarchy_first_step = integer(c["hierarchy_first_step"], p + ".hierarchy_first_step");
      if (c.contains("psd_projection")) s.psd_projection = boolean(c["psd_projection"], p + ".psd_projection");
      if (c.contains("w_c")) s.w_c = number(c["w_c"], p + ".w_c");
      if (s.w_c < 0.0) fail(p + ".w_c", "must be nonnegative");
      if (s.hierarchy_first_step < 1) fail(p + ".hierarchy_first_step", "must be at least 1");
    }
    if (doc.contains("sim")) {
      const json& m = doc["sim"];
      if (m.contains("dt_sim")) s.sim.dt_sim = number(m["dt_sim"], "scenario.sim.dt_sim");
      if (m.contains("baumgarte")) s.sim.baumgarte = boolean(m["baumgarte"], "scenario.sim.baumgarte");
      if (m.contains("baumgarte_alpha")) s.sim.baumgarte_alpha = number(m["baumgarte_alpha"], "scenario.sim.baumgarte_alpha");
      if (m.contains("baumgarte_beta")) s.sim.baumgarte_beta = number(m["baumgarte_beta"], "scenario.sim.baumgarte_beta");
    }
    if (doc.contains("solver")) {
      const json& v = doc["solver"];
      const std::string p = "scenario.solver";
      for (auto it = v.begin(); it != v.end(); ++it) {
        const std::string& key = it.key();
        const std::string fp = p + "." + key;
        if (key == "eq_tol") s.solver.eq_tol = number(*it, fp);
        else if (key == "ineq_tol") s.solver.ineq_tol = number(*it, fp);
        else if (key == "duality_gap_tol") s.solver.duality_gap_tol = number(*it, fp);
        else if (key == "stationarity_tol") s.solver.stationarity_tol = number(*it, fp);
        else if (key == "max_iters") s.solver.max_iters = integer(*it, fp);
        else if (key == "barrier_t0") s.solver.barrier_t0 = number(*it, fp);
        else if (key == "barrier_mu") s.solver.barrier_mu = number(*it, fp);
        else if (key == "line_search_alpha") s.solver.line_search_alpha = number(*it, fp);
        else if (key == "line_search_beta") s.solver.line_search_beta = number(*it, fp);
        else fail(fp, "unknown solver setting");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInput(fmt::format("scenario: {}", e.what()));
  }
  validate(s.horizon());
  validate(s.hierarchy, static_cast<int>(s.tasks.size()));
  validate(s.sim);
  validate(s.solver);
  return s;
}

Scenario loadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(fmt::format("scenario: cannot open {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parseScenario(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string serializeScenario(const Scenario& s) {
  ordered_json doc;
  doc["name"] = s.name;
  doc["model"] = s.model_path;
  ordered_json q0 = ordered_json::array();
  for (const Angle& a : s.initial_q) {
    if (a.degrees) {
      q0.push_back(fmt::format("{}deg", a.value));
    } else {
      q0.push_back(a.value);
    }
  }
  doc["initial_q"] = q0;
  if (!s.initial_qd.empty()) doc["initial_qd"] = s.initial_qd;
  doc["horizon"] = {{"t0", s.t0}, {"tf", s.tf}, {"dt", s.dt}, {"Np", s.Np}, {"Ne", s.Ne}};
  ordered_json tasks = ordered_json::array();
  for (const ScenarioTask& t : s.tasks) {
    ordered_json tj;
    tj["name"] = t.name;
    if (!t.joints.empty()) {
      tj["joints"] = t.joints;
    } else {
      tj["frame"] = {{"link", t.link}, {"point", vectorJson(t.point)}};
      ordered_json axes = ordered_json::array();
      for (int a : t.axes) axes.push_back(kAxisNames[a]);
      tj["axes"] = axes;
    }
    tj["priority"] = t.priority;
    tj["interpolation"] = "linear";
    tj["x_start"] = t.x_start ? vectorJson(*t.x_start) : ordered_json("initial");
    if (t.x_end) tj["x_end"] = vectorJson(*t.x_end);
    if (t.x_delta) tj["x_delta"] = vectorJson(*t.x_delta);
    tj["kp"] = vectorJson(t.kp);
    tj["kv"] = vectorJson(t.kv);
    tasks.push_back(tj);
  }
  doc["tasks"] = tasks;
  doc["hierarchy"] = {{"mode", s.hierarchy.mode == HierarchySpec::Mode::Weak ? "weak" : "strong"},
                      {"epsilons", s.hierarchy.epsilons}};
  doc["controller"] = {{"default", s.default_controller},
                       {"feedback", toString(s.feedback)},
                       {"hierarchy_constraints", s.hierarchy_constraints},
                       {"hierarchy_first_step", s.hierarchy_first_step},
                       {"psd_projection", s.psd_projection},
                       {"w_c", s.w_c}};
  doc["sim"] = {{"dt_sim", s.sim.dt_sim},
                {"baumgarte", s.sim.baumgarte},
                {"baumgarte_alpha", s.sim.baumgarte_alpha},
                {"baumgarte_beta", s.sim.baumgarte_beta}};
  doc["solver"] = {{"eq_tol", s.solver.eq_tol},
                   {"ineq_tol", s.solver.ineq_tol},
                   {"duality_gap_tol", s.solver.duality_gap_tol},
                   {"stationarity_tol", s.solver.stationarity_tol},
                   {"max_iters", s.solver.max_iters},
                   {"barrier_t0", s.solver.barrier_t0},
                   {"barrier_mu", s.solver.barrier_mu},
                   {"line_search_alpha", s.solver.line_search_alpha},
                   {"line_search_beta", s.solver.line_search_beta}};
  return doc.dump(2) + "\n";
}

ResolvedScenario resolve(const Scenario& s) { return resolve(s, loadModel(s.resolvedModelPath())); }

ResolvedScenario resolve(const Scenario& s, const RobotModel& model) {
  ResolvedScenario r;
  r.model = model;
  const int n = model.n();
  if (static_cast<int>(s.initial_q.size()) != n) {
    fail("scenario.initial_q", fmt::format("expected {} entries for model '{}'", n, model.name));
  }
  if (!s.initial_qd.empty() && static_cast<int>(s.initial_qd.size()) != n) {
    fail("scenario.initial_qd", fmt::format("expected {} entries", n));
  }
  r.x0.q.resize(n);
  for (int i = 0; i < n; ++i) r.x0.q(i) = s.initial_q[i].radians();
  r.x0.qd = s.initial_qd.empty() ? VectorXd::Zero(n) : Eigen::Map<const VectorXd>(s.initial_qd.data(), n).eval();
  r.x0.t = s.t0;
  checkState(model, r.x0);

  std::vector<std::size_t> order(s.tasks.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.tasks[a].priority < s.tasks[b].priority; });
  const HorizonSpec hz = s.horizon();
  for (std::size_t idx : order) {
    const ScenarioTask& st = s.tasks[idx];
    const std::string path = fmt::format("scenario.tasks[{}]", idx);
    TaskDef t;
    t.name = st.name;
    t.priority = st.priority;
    t.kp = st.kp;
    t.kv = st.kv;
    if (!st.joints.empty()) {
      t.map.kind = TaskMap::Kind::JointCoordinates;
      t.map.indices = st.joints;
    } else {
      t.map.kind = TaskMap::Kind::BodyPoint;
      t.map.link = st.link;
      t.map.point = st.point;
      t.map.indices = st.axes;
    }
    try {
      validate(model, t);
    } catch (const InvalidInput& e) {
      fail(path, e.what());
    }
    const VectorXd start = st.x_start ? *st.x_start : taskPosition(model, t.map, r.x0.q);
    const VectorXd end = st.x_end ? *st.x_end : VectorXd(start + *st.x_delta);
    r.trajectories.push_back(linearTrajectory(start, end, hz.tf - hz.t0, hz.N));
    r.tasks.push_back(std::move(t));
  }
  validate(model, r.tasks);

  r.config.horizon = hz;
  r.config.hierarchy = s.hierarchy;
  // Epsilons follow the file order; reorder to priority order.
  r.config.hierarchy.epsilons.clear();
  for (std::size_t idx : order) r.config.hierarchy.epsilons.push_back(s.hierarchy.epsilons[idx]);
  r.config.hierarchy_constraints = s.hierarchy_constraints;
  r.config.hierarchy_options.psd_projection = s.psd_projection;
  r.config.hierarchy_options.first_step = s.hierarchy_first_step;
  r.config.feedback = s.feedback;
  r.config.solver = s.solver;
  r.config.W_c = s.w_c * MatrixXd::Identity(model.nc(), model.nc());
  r.config.sim = s.sim;
  validate(r.config, static_cast<int>(r.tasks.size()));
  return r;
}

std::uint64_t scenarioHash(const Scenario& scenario) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : serializeScenario(scenario)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double roundOutput(double value) {
  if (!std::isfinite(value)) return value;
  return std::stod(fmt::format("{:.12g}", value));
}

RunOutput runController(const ResolvedScenario& r, const std::string& controller) {
  RunOutput out;
  if (controller == "wbc") {
    out.log = wbcRun(r.model, r.tasks, r.trajectories, r.x0, r.config.horizon, r.config.sim);
  } else if (controller == "mpc") {
    out.log = mpcRun(r.model, r.tasks, r.trajectories, r.x0, r.config).log;
  } else {
    throw InvalidInput(fmt::format("controller: unknown value '{}'; expected one of wbc, mpc", controller));
  }
  out.metrics = metrics(out.log, r.model);
  return out;
}

std::string trajectoryCsv(const TrajectoryLog& log, const RobotModel& model, bool timing) {
  std::string out = "t";
  for (int i = 0; i < model.n(); ++i) out += fmt::format(",q_{}", i);
  for (int i = 0; i < model.n(); ++i) out += fmt::format(",qd_{}", i);
  for (int i = 0; i < model.m(); ++i) out += fmt::format(",tau_{}", i);
  for (int i = 0; i < model.nc(); ++i) out += fmt::format(",fc_{}", i);
  const std::size_t tasks = log.task_names.size();
  for (std::size_t k = 0; k < tasks; ++k) {
    const Eigen::Index dim = log.rows.empty() ? 0 : log.rows.front().x[k].size();
    for (Eigen::Index j = 0; j < dim; ++j) out += fmt::format(",task{}_x{}", k, j);
    for (Eigen::Index j = 0; j < dim; ++j) out += fmt::format(",task{}_xdes{}", k, j);
    for (Eigen::Index j = 0; j < dim; ++j) out += fmt::format(",task{}_err{}", k, j);
    out += fmt::format(",task{}_errnorm", k);
  }
  out += ",solver_status,solver_iters,solve_ms\n";
  auto append = [&out](const VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out += fmt::format(",{:.12g}", v(i));
  };
  for (const StepLog& row : log.rows) {
    out += fmt::format("{:.12g}", row.t);
    append(row.q);
    append(row.qd);
    append(row.torque);
    append(row.fc);
    for (std::size_t k = 0; k < tasks; ++k) {
      append(row.x[k]);
      append(row.x_des[k]);
      append(row.err[k]);
      out += fmt::format(",{:.12g}", row.err_norm[k]);
    }
    out += fmt::format(",{},{},{:.12g}\n", row.solver_status, row.solver_iters, timing ? row.solve_ms : 0.0);
  }
  return out;
}

namespace {

ordered_json metricsJson(const Metrics& m, bool timing) {
  ordered_json j;
  ordered_json tasks = ordered_json::array();
  for (const TaskMetrics& t : m.tasks) {
    tasks.push_back({{"name", t.name},
                     {"max_abs_error", roundedJson(t.max_abs_error)},
                     {"accumulated_error_norm", roundOutput(t.accumulated)}});
  }
  j["tasks"] = tasks;
  j["accumulated_error_norm"] = roundOutput(m.accumulated_total);
  ordered_json hierarchy = ordered_json::object();
  if (!m.ordering_fraction.empty()) {
    hierarchy["ordering_tolerance"] = m.ordering_tolerance;
    ordered_json fr = ordered_json::array();
    for (double f : m.ordering_fraction) fr.push_back(roundOutput(f));
    hierarchy["ordering_fraction"] = fr;
  }
  j["hierarchy"] = hierarchy;
  j["max_constraint_drift"] = roundOutput(m.max_constraint_drift);
  j["solver"] = {{"solves", m.solves}, {"total_iterations", m.total_iterations}, {"max_iterations", m.max_iterations}};
  j["wall_time_s"] = {{"total", timing ? roundOutput(m.wall_time) : 0.0},
                      {"max_solve", timing ? roundOutput(m.max_solve_time) : 0.0}};
  return j;
}

std::string hashText(const Scenario& s) { return fmt::format("{:016x}", scenarioHash(s)); }

}  // namespace

std::string summaryJson(const Scenario& scenario, const RunOutput& run, bool timing) {
  ordered_json j;
  j["artifact_version"] = kArtifactVersion;
  j["scenario"] = scenario.name;
  j["scenario_hash"] = hashText(scenario);
  j["controller"] = run.log.controller;
  j["rows"] = run.log.rows.size();
  j["metrics"] = metricsJson(run.metrics, timing);
  ordered_json subs = ordered_json::array();
  for (const SubproblemRecord& r : run.log.subproblems) {
    subs.push_back({{"index", r.index},
                    {"first_step", r.first_step},
                    {"status", r.status},
                    {"iterations", r.iterations},
                    {"outer_iterations", r.outer_iterations},
                    {"objective", roundOutput(r.objective)},
                    {"max_hierarchy_value", roundOutput(r.max_hierarchy_value)},
                    {"local_only", r.local_only},
                    {"wall_time_s", timing ? roundOutput(r.wall_time) : 0.0}});
  }
  j["subproblems"] = subs;
  return j.dump(2) + "\n";
}

std::string compareJson(const Scenario& scenario, const RunOutput& baseline, const RunOutput& candidate,
                        bool timing) {
  ordered_json j;
  j["artifact_version"] = kArtifactVersion;
  j["scenario"] = scenario.name;
  j["scenario_hash"] = hashText(scenario);
  j["baseline"] = baseline.log.controller;
  j["candidate"] = candidate.log.controller;
  const double a = baseline.metrics.accumulated_total;
  const double b = candidate.metrics.accumulated_total;
  j["accumulated_error_norm"] = {{"baseline", roundOutput(a)}, {"candidate", roundOutput(b)}};
  j["ratio"] = a > 0.0 ? roundOutput(b / a) : (b == 0.0 ? 1.0 : 0.0);
  ordered_json tasks = ordered_json::array();
  for (std::size_t k = 0; k < baseline.metrics.tasks.size(); ++k) {
    const TaskMetrics& tb = baseline.metrics.tasks[k];
    const TaskMetrics& tc = candidate.metrics.tasks[k];
    tasks.push_back({{"name", tb.name},
                     {"max_abs_error", {{"baseline", roundedJson(tb.max_abs_error)},
                                        {"candidate", roundedJson(tc.max_abs_error)}}},
                     {"accumulated_error_norm", {{"baseline", roundOutput(tb.accumulated)},
                                                 {"candidate", roundOutput(tc.accumulated)}}}});
  }
  j["tasks"] = tasks;
  ordered_json hierarchy = ordered_json::object();
  if (!baseline.metrics.ordering_fraction.empty()) {
    hierarchy["ordering_tolerance"] = baseline.metrics.ordering_tolerance;
    ordered_json fb = ordered_json::array();
    ordered_json fc = ordered_json::array();
    for (double f : baseline.metrics.ordering_fraction) fb.push_back(roundOutput(f));
    for (double f : candidate.metrics.ordering_fraction) fc.push_back(roundOutput(f));
    hierarchy["ordering_fraction"] = {{"baseline", fb}, {"candidate", fc}};
  }
  j["hierarchy"] = hierarchy;
  j["summaries"] = {{"baseline", ordered_json::parse(summaryJson(scenario, baseline, timing))},
                    {"candidate", ordered_json::parse(summaryJson(scenario, candidate, timing))}};
  return j.dump(2) + "\n";
}

}  // namespace hqmpc
