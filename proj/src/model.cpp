#include "hqmpc/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "hqmpc/errors.hpp"

namespace hqmpc {

using nlohmann::json;

int RobotModel::nc() const {
  int total = 0;
  for (const auto& c : constraints) total += c.dim();
  return total;
}

MatrixXd RobotModel::selection() const {
  MatrixXd u = MatrixXd::Zero(m(), n());
  for (int i = 0; i < m(); ++i) u(i, actuated[i]) = 1.0;
  return u;
}

VectorXd RobotModel::constraintTarget() const {
  VectorXd c(nc());
  int row = 0;
  for (const auto& def : constraints) {
    c.segment(row, def.dim()) = def.target;
    row += def.dim();
  }
  return c;
}

Mat3 rpyToRotation(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

void validate(const RobotModel& model) {
  const int n = model.n();
  if (n == 0) throw InvalidInput("model: joints must be nonempty");
  if (static_cast<int>(model.links.size()) != n) {
    throw InvalidInput(fmt::format("model: {} links for {} joints", model.links.size(), n));
  }
  if (model.m() > n) throw InvalidInput("model.actuated: more actuated joints than joints");
  std::set<int> seen;
  for (int idx : model.actuated) {
    if (idx < 0 || idx >= n) throw InvalidInput(fmt::format("model.actuated: index {} out of range", idx));
    if (!seen.insert(idx).second) throw InvalidInput(fmt::format("model.actuated: duplicate index {}", idx));
  }
  for (int i = 0; i < n; ++i) {
    const Joint& j = model.joints[i];
    if (j.parent < -1 || j.parent >= i) {
      throw InvalidInput(fmt::format("model.joints[{}].parent: must reference an earlier joint or -1", i));
    }
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw InvalidInput(fmt::format("model.joints[{}].axis: must be a unit vector", i));
    }
    const Link& l = model.links[i];
    if (!(l.mass > 0.0)) throw InvalidInput(fmt::format("model.links[{}].mass: must be positive", i));
    if (infNorm(l.inertia - l.inertia.transpose()) > 1e-12) {
      throw InvalidInput(fmt::format("model.links[{}].inertia_6: not symmetric", i));
    }
    if (minEigenvalue(l.inertia) < -1e-12) {
      throw InvalidInput(fmt::format("model.links[{}].inertia_6: not positive semi-definite", i));
    }
  }
  for (std::size_t k = 0; k < model.constraints.size(); ++k) {
    const ConstraintDef& c = model.constraints[k];
    if (c.dim() == 0) throw InvalidInput(fmt::format("model.constraints[{}].rows: empty", k));
    if (c.target.size() != c.dim()) {
      throw InvalidInput(fmt::format("model.constraints[{}].target: expected {} entries", k, c.dim()));
    }
    if (c.type == ConstraintDef::Type::JointLinear) {
      if (c.coeffs.cols() != n) {
        throw InvalidInput(fmt::format("model.constraints[{}].coeffs: expected {} columns", k, n));
      }
    } else {
      if (c.link < 0 || c.link >= n) {
        throw InvalidInput(fmt::format("model.constraints[{}].frame.link: out of range", k));
      }
      for (int r : c.rows) {
        if (r < 0 || r > 2) throw InvalidInput(fmt::format("model.constraints[{}].rows: axis out of range", k));
      }
    }
  }
  if (model.nc() >= n) throw InvalidInput("model.constraints: constraint dimension must be below n");
}

namespace {

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw InvalidInput(path + ": expected 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

VectorXd vecX(const json& j, const std::string& path) {
  if (!j.is_array()) throw InvalidInput(path + ": expected an array");
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

int axisIndex(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<int>();
  const std::string s = j.get<std::string>();
  if (s == "x") return 0;
  if (s == "y") return 1;
  if (s == "z") return 2;
  throw InvalidInput(path + ": unknown axis '" + s + "'");
}

}  // namespace

RobotModel parseModel(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("model: ") + e.what());
  }
  RobotModel model;
  try {
    model.name = doc.value("name", "");
    if (doc.contains("gravity")) model.gravity = vec3(doc["gravity"], "model.gravity");
    const json& joints = doc.at("joints");
    for (std::size_t i = 0; i < joints.size(); ++i) {
      const std::string path = fmt::format("model.joints[{}]", i);
      const json& jj = joints[i];
      Joint j;
      j.axis = vec3(jj.at("axis"), path + ".axis");
      if (j.axis.norm() == 0.0) throw InvalidInput(path + ".axis: zero vector");
      j.axis.normalize();
      j.parent = jj.value("parent", static_cast<int>(i) - 1);
      if (jj.contains("offset_xyz")) j.offset_xyz = vec3(jj["offset_xyz"], path + ".offset_xyz");
      if (jj.contains("offset_rpy")) j.offset_rpy = vec3(jj["offset_rpy"], path + ".offset_rpy");
      j.offset_rotation = rpyToRotation(j.offset_rpy);
      model.joints.push_back(j);
    }
    if (doc.contains("n") && doc["n"].get<int>() != model.n()) {
      throw InvalidInput(fmt::format("model.n: {} does not match {} joints", doc["n"].get<int>(), model.n()));
    }
    const json& links = doc.at("links");
    for (std::size_t i = 0; i < links.size(); ++i) {
      const std::string path = fmt::format("model.links[{}]", i);
      const json& lj = links[i];
      Link l;
      l.mass = lj.at("mass").get<double>();
      if (lj.contains("com_xyz")) l.com = vec3(lj["com_xyz"], path + ".com_xyz");
      if (lj.contains("inertia_6")) {
        const VectorXd in = vecX(lj["inertia_6"], path + ".inertia_6");
        if (in.size() != 6) throw InvalidInput(path + ".inertia_6: expected 6 numbers");
        l.inertia << in(0), in(3), in(4), in(3), in(1), in(5), in(4), in(5), in(2);
      }
      model.links.push_back(l);
    }
    if (doc.contains("actuated")) model.actuated = doc["actuated"].get<std::vector<int>>();
    if (doc.contains("constraints")) {
      const json& cons = doc["constraints"];
      for (std::size_t k = 0; k < cons.size(); ++k) {
        const std::string path = fmt::format("model.constraints[{}]", k);
        const json& cj = cons[k];
        ConstraintDef c;
        const std::string type = cj.at("type").get<std::string>();
        if (type == "joint_linear") {
          c.type = ConstraintDef::Type::JointLinear;
          const json& rows = cj.at("coeffs");
          const int cols = rows.empty() ? 0 : static_cast<int>(rows[0].size());
          c.coeffs.resize(rows.size(), cols);
          for (std::size_t r = 0; r < rows.size(); ++r) {
            if (static_cast<int>(rows[r].size()) != cols) throw InvalidInput(path + ".coeffs: ragged rows");
            for (int col = 0; col < cols; ++col) c.coeffs(r, col) = rows[r][col].get<double>();
          }
        } else if (type == "frame_point") {
          c.type = ConstraintDef::Type::FramePoint;
          c.link = cj.at("frame").at("link").get<int>();
          c.point = vec3(cj.at("frame").at("point"), path + ".frame.point");
          for (const json& r : cj.at("rows")) c.rows.push_back(axisIndex(r, path + ".rows"));
        } else {
          throw InvalidInput(path + ".type: expected joint_linear or frame_point");
        }
        c.target = vecX(cj.at("target"), path + ".target");
        model.constraints.push_back(std::move(c));
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("model: ") + e.what());
  }
  validate(model);
  return model;
}

RobotModel loadModel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parseModel(ss.str());
}

void checkState(const RobotModel& model, const PlantState& state) {
  if (state.q.size() != model.n() || state.qd.size() != model.n()) {
    throw InvalidInput(fmt::format("state: expected q and qd of size {}, got {} and {}", model.n(),
                                   state.q.size(), state.qd.size()));
  }
  if (!state.q.allFinite() || !state.qd.allFinite() || !std::isfinite(state.t)) {
    throw InvalidInput("state: non-finite entries");
  }
}

}  // namespace hqmpc
