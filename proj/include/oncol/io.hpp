#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oncol/demo_gen.hpp"
#include "oncol/dmp.hpp"
#include "oncol/field_opt.hpp"
#include "oncol/sim.hpp"
#include "oncol/skill_planner.hpp"

namespace oncol::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file '" + path.string() + "'");
  out << content;
}

inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error("invalid JSON in '" + origin + "': " + e.what());
  }
}

inline Json load_json(const fs::path& path) { return parse_json(read_file(path), path.string()); }

// ---- small converters ----------------------------------------------------

inline Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw Error(what + ": expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json quat_to_json(const Quaternion& q) { return Json::array({q.w, q.x, q.y, q.z}); }

inline Quaternion quat_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw Error(what + ": expected a 4-element array (w,x,y,z)");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline Json pose_to_json(const Pose& p) {
  return Json{{"t", vec3_to_json(p.translation)}, {"r", quat_to_json(p.rotation)}};
}

inline Pose pose_from_json(const Json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("t") || !j.contains("r"))
    throw Error(what + ": pose needs fields 't' and 'r'");
  for (const auto& [key, _] : j.items())
    if (key != "t" && key != "r") throw Error(what + ": unknown pose field '" + key + "'");
  return {vec3_from_json(j["t"], what + ".t"), quat_from_json(j["r"], what + ".r")};
}

// ---- trajectory files ------------------------------------------------------

struct TrajectoryDoc {
  std::string name;
  std::vector<Pose> poses;
};

inline Json trajectory_to_json(const TrajectoryDoc& doc) {
  Json poses = Json::array();
  for (const Pose& p : doc.poses) poses.push_back(pose_to_json(p));
  return Json{{"name", doc.name}, {"poses", poses}};
}

/// Strict reader: unknown top-level fields are rejected.
inline TrajectoryDoc trajectory_from_json(const Json& j, const std::string& origin) {
  if (!j.is_object()) throw Error(origin + ": trajectory document must be an object");
  for (const auto& [key, _] : j.items())
    if (key != "name" && key != "poses")
      throw Error(origin + ": unknown top-level field '" + key + "'");
  if (!j.contains("name") || !j.contains("poses"))
    throw Error(origin + ": trajectory document needs 'name' and 'poses'");
  TrajectoryDoc doc;
  doc.name = j["name"].get<std::string>();
  for (const Json& p : j["poses"]) doc.poses.push_back(pose_from_json(p, origin));
  return doc;
}

inline TrajectoryDoc load_trajectory(const fs::path& path) {
  return trajectory_from_json(load_json(path), path.string());
}

inline void save_trajectory(const fs::path& path, const TrajectoryDoc& doc) {
  write_file(path, trajectory_to_json(doc).dump(2) + "\n");
}

// ---- demonstration library -------------------------------------------------

struct LibraryIndexEntry {
  std::string id;
  std::string file;
  double duration{1.0};
  std::vector<std::size_t> critical;  // optional key-configuration indices
};

inline std::vector<LibraryIndexEntry> load_library_index(const fs::path& dir) {
  const fs::path index = dir / "index.json";
  const Json j = load_json(index);
  if (!j.contains("demos") || !j["demos"].is_array())
    throw Error(index.string() + ": needs a 'demos' array");
  std::vector<LibraryIndexEntry> out;
  for (const Json& e : j["demos"]) {
    LibraryIndexEntry entry{e.at("id").get<std::string>(), e.at("file").get<std::string>(),
                            e.at("duration").get<double>(), {}};
    if (e.contains("critical")) entry.critical = e["critical"].get<std::vector<std::size_t>>();
    out.push_back(std::move(entry));
  }
  if (out.empty()) throw Error(index.string() + ": library is empty");
  return out;
}

inline void upsert_library_index(const fs::path& dir, const LibraryIndexEntry& entry) {
  const fs::path index = dir / "index.json";
  Json j = Json{{"demos", Json::array()}};
  if (fs::exists(index)) j = load_json(index);
  Json doc{{"id", entry.id}, {"file", entry.file}, {"duration", entry.duration}};
  if (!entry.critical.empty()) doc["critical"] = entry.critical;
  Json& demos = j["demos"];
  bool replaced = false;
  for (Json& e : demos)
    if (e.at("id").get<std::string>() == entry.id) {
      e = doc;
      replaced = true;
    }
  if (!replaced) demos.push_back(doc);
  write_file(index, j.dump(2) + "\n");
}

inline std::vector<Demonstration> load_library(const fs::path& dir,
                                               FeaturizeMode mode = FeaturizeMode::paper) {
  std::vector<Demonstration> out;
  for (const LibraryIndexEntry& e : load_library_index(dir)) {
    const TrajectoryDoc doc = load_trajectory(dir / e.file);
    if (doc.poses.size() < 2)
      throw Error(dir.string() + "/" + e.file + ": demonstration needs >= 2 poses");
    out.push_back(Demonstration::make(e.id, doc.poses, e.duration, mode, e.critical));
  }
  return out;
}

// ---- DMP model ---------------------------------------------------------------

inline Json model_to_json(const DmpModel& m) {
  return Json{{"gains",
               Json{{"alpha_z", m.gains.alpha_z},
                    {"beta_z", m.gains.beta_z},
                    {"alpha_s_hat", m.gains.alpha_s_hat},
                    {"tau", m.gains.tau}}},
              {"basis", Json{{"centers", m.basis.centers}, {"widths", m.basis.widths}}},
              {"weights", Json{{"x", m.weights[0]}, {"y", m.weights[1]}, {"z", m.weights[2]}}},
              {"start", vec3_to_json(m.start)},
              {"goal", vec3_to_json(m.goal)},
              {"degenerate", m.degenerate}};
}

inline DmpModel model_from_json(const Json& j, const std::string& origin) {
  DmpModel m;
  try {
    const Json& g = j.at("gains");
    m.gains = {g.at("alpha_z").get<double>(), g.at("beta_z").get<double>(),
               g.at("alpha_s_hat").get<double>(), g.at("tau").get<double>()};
    m.basis.centers = j.at("basis").at("centers").get<std::vector<double>>();
    m.basis.widths = j.at("basis").at("widths").get<std::vector<double>>();
    m.weights[0] = j.at("weights").at("x").get<std::vector<double>>();
    m.weights[1] = j.at("weights").at("y").get<std::vector<double>>();
    m.weights[2] = j.at("weights").at("z").get<std::vector<double>>();
    m.start = vec3_from_json(j.at("start"), origin + ".start");
    m.goal = vec3_from_json(j.at("goal"), origin + ".goal");
    m.degenerate = j.value("degenerate", false);
  } catch (const Json::exception& e) {
    throw Error(origin + ": bad model document: " + e.what());
  }
  return m;
}

// ---- Q agent -------------------------------------------------------------------

inline Json agent_to_json(const QAgent& agent, const std::vector<std::string>& action_ids) {
  Json values = Json::object();
  for (const auto& [key, row] : agent.value_table) values[key] = row;
  return Json{{"hyperparameters",
               Json{{"epsilon", agent.epsilon},
                    {"epsilon_end", agent.epsilon_end},
                    {"learning_rate", agent.learning_rate},
                    {"discount", agent.discount},
                    {"key_mode",
                     agent.key_mode == QKeyMode::task_cursor ? "task_cursor" : "quantized"}}},
              {"actions", action_ids},
              {"values", values}};
}

struct AgentDoc {
  QAgent agent;
  std::vector<std::string> action_ids;
};

inline AgentDoc agent_from_json(const Json& j, const std::string& origin) {
  AgentDoc doc;
  try {
    const Json& h = j.at("hyperparameters");
    doc.agent.epsilon = h.at("epsilon").get<double>();
    doc.agent.epsilon_end = h.at("epsilon_end").get<double>();
    doc.agent.learning_rate = h.at("learning_rate").get<double>();
    doc.agent.discount = h.at("discount").get<double>();
    const std::string km = h.at("key_mode").get<std::string>();
    if (km != "task_cursor" && km != "quantized")
      throw Error(origin + ": unknown key_mode '" + km + "'");
    doc.agent.key_mode = km == "task_cursor" ? QKeyMode::task_cursor : QKeyMode::quantized;
    doc.action_ids = j.at("actions").get<std::vector<std::string>>();
    for (const auto& [key, row] : j.at("values").items())
      doc.agent.value_table[key] = row.get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw Error(origin + ": bad agent document: " + e.what());
  }
  return doc;
}

// ---- tasks ------------------------------------------------------------------------

inline std::vector<TaskSpec> tasks_from_json(const Json& j, const std::string& origin) {
  if (!j.contains("tasks") || !j["tasks"].is_array())
    throw Error(origin + ": needs a 'tasks' array");
  std::vector<TaskSpec> out;
  for (const Json& t : j["tasks"]) {
    TaskSpec spec;
    spec.robot_id = t.at("robot_id").get<std::string>();
    for (const Json& p : t.at("critical_configurations"))
      spec.critical_configurations.push_back(pose_from_json(p, origin));
    if (spec.critical_configurations.size() < 2)
      throw Error(origin + ": task '" + spec.robot_id + "' needs >= 2 critical configurations");
    out.push_back(std::move(spec));
  }
  return out;
}

inline Json tasks_to_json(const std::vector<TaskSpec>& tasks) {
  Json arr = Json::array();
  for (const TaskSpec& t : tasks) {
    Json cfgs = Json::array();
    for (const Pose& p : t.critical_configurations) cfgs.push_back(pose_to_json(p));
    arr.push_back(Json{{"robot_id", t.robot_id}, {"critical_configurations", cfgs}});
  }
  return Json{{"tasks", arr}};
}

// ---- planned trajectory -------------------------------------------------------------

inline Json plan_to_json(const PlannedTrajectory& plan) {
  Json segments = Json::array();
  for (const PlanSegment& s : plan.segments)
    segments.push_back(Json{{"demo_id", s.demo_id},
                            {"first_pose", s.first_pose},
                            {"last_pose", s.last_pose},
                            {"start_index", s.start_index}});
  Json poses = Json::array();
  for (const Pose& p : plan.poses) poses.push_back(pose_to_json(p));
  return Json{{"robot_id", plan.robot_id},
              {"duration", plan.duration},
              {"quality", plan.quality},
              {"segments", segments},
              {"poses", poses}};
}

inline PlannedTrajectory plan_from_json(const Json& j, const std::string& origin) {
  PlannedTrajectory plan;
  try {
    plan.robot_id = j.at("robot_id").get<std::string>();
    plan.duration = j.at("duration").get<double>();
    plan.quality = j.value("quality", 0.0);
    for (const Json& s : j.at("segments"))
      plan.segments.push_back({s.at("demo_id").get<std::string>(),
                               s.at("first_pose").get<std::size_t>(),
                               s.at("last_pose").get<std::size_t>(),
                               s.at("start_index").get<std::size_t>()});
    for (const Json& p : j.at("poses")) plan.poses.push_back(pose_from_json(p, origin));
  } catch (const Json::exception& e) {
    throw Error(origin + ": bad plan document: " + e.what());
  }
  if (plan.poses.size() < 2) throw Error(origin + ": plan needs >= 2 poses");
  return plan;
}

// ---- optimizer result ------------------------------------------------------------------

inline Json optimization_result_to_json(const OptimizationResult& r) {
  return Json{{"params",
               Json{{"lambda", r.params.lambda}, {"beta", r.params.beta}, {"eta", r.params.eta}}},
              {"objective", r.objective},
              {"constraint_violations", r.constraint_violations},
              {"evaluations", r.evaluations},
              {"converged", r.converged}};
}

inline FieldParams field_params_from_json(const Json& j, const std::string& origin) {
  try {
    if (j.contains("params")) {
      const Json& p = j["params"];
      return {p.at("lambda").get<double>(), p.at("beta").get<double>(), p.at("eta").get<double>()};
    }
    return {j.at("lambda").get<double>(), j.at("beta").get<double>(), j.at("eta").get<double>()};
  } catch (const Json::exception& e) {
    throw Error(origin + ": bad field params: " + e.what());
  }
}

// ---- obstacles & scenario ------------------------------------------------------------------

inline EllipsoidObstacle obstacle_from_json(const Json& j, const std::string& origin) {
  for (const auto& [key, _] : j.items())
    if (key != "center" && key != "radii" && key != "velocity")
      throw Error(origin + ": unknown obstacle field '" + key + "'");
  EllipsoidObstacle ob;
  ob.center = vec3_from_json(j.at("center"), origin + ".center");
  ob.radii = vec3_from_json(j.at("radii"), origin + ".radii");
  if (j.contains("velocity")) ob.velocity = vec3_from_json(j["velocity"], origin + ".velocity");
  for (int k = 0; k < 3; ++k)
    if (ob.radii[k] <= 0.0) throw Error(origin + ": obstacle radii must be positive");
  return ob;
}

inline Json obstacle_to_json(const EllipsoidObstacle& ob) {
  return Json{{"center", vec3_to_json(ob.center)},
              {"radii", vec3_to_json(ob.radii)},
              {"velocity", vec3_to_json(ob.velocity)}};
}

inline DemoGenSpec demo_spec_from_json(const Json& j, const std::string& origin) {
  DemoGenSpec spec;
  spec.kind = demo_kind_from_string(j.at("kind").get<std::string>());
  for (const Json& w : j.at("waypoints"))
    spec.waypoints.push_back(vec3_from_json(w, origin + ".waypoints"));
  spec.duration = j.at("duration").get<double>();
  spec.samples = j.value("samples", std::size_t{100});
  if (j.contains("rotation")) {
    spec.rotation_start = quat_from_json(j["rotation"], origin + ".rotation");
    spec.rotation_end = spec.rotation_start;
  }
  if (j.contains("rotation_end"))
    spec.rotation_end = quat_from_json(j["rotation_end"], origin + ".rotation_end");
  spec.arc_height = j.value("arc_height", 0.0);
  spec.lift_height = j.value("lift_height", 0.1);
  return spec;
}

/// An arm's "planned" entry: inline plan document, generator spec, or a
/// path (plan or trajectory document) relative to the scenario file.
inline PlannedTrajectory planned_from_json(const Json& j, const std::string& arm_id,
                                           const fs::path& base_dir, const std::string& origin) {
  if (j.is_string()) {
    const fs::path path = base_dir / j.get<std::string>();
    const Json doc = load_json(path);
    if (doc.contains("segments")) return plan_from_json(doc, path.string());
    const TrajectoryDoc traj = trajectory_from_json(doc, path.string());
    PlannedTrajectory plan;
    plan.robot_id = arm_id;
    plan.duration = 1.0;  // trajectory documents carry no timing
    plan.poses = traj.poses;
    plan.segments.push_back({traj.name, 0, traj.poses.size() - 1, 0});
    return plan;
  }
  if (j.is_object() && j.contains("kind")) {
    const DemoGenSpec spec = demo_spec_from_json(j, origin);
    PlannedTrajectory plan;
    plan.robot_id = arm_id;
    plan.duration = spec.duration;
    plan.poses = generate_demo(spec);
    plan.segments.push_back(
        {"generated:" + j.at("kind").get<std::string>(), 0, plan.poses.size() - 1, 0});
    return plan;
  }
  return plan_from_json(j, origin);
}

struct ScenarioLoadOptions {
  DmpGains gains{};
  std::size_t basis_count{30};
  bool align_frames{false};
};

inline Scenario scenario_from_json(const Json& j, const fs::path& base_dir,
                                   const std::string& origin,
                                   const ScenarioLoadOptions& opts = {}) {
  Scenario sc;
  if (!j.contains("arms") || !j["arms"].is_array() || j["arms"].empty())
    throw Error(origin + ": scenario needs a non-empty 'arms' array");
  sc.dt = j.value("dt", 0.01);
  sc.max_duration = j.value("max_duration", 30.0);
  sc.seed = j.value("seed", std::uint64_t{0});
  if (sc.dt <= 0.0) throw Error(origin + ": dt must be positive");

  if (j.contains("static_obstacles"))
    for (const Json& ob : j["static_obstacles"])
      sc.static_obstacles.push_back(obstacle_from_json(ob, origin));

  for (const Json& a : j["arms"]) {
    ArmConfig arm;
    arm.id = a.at("id").get<std::string>();
    arm.planned = planned_from_json(a.at("planned"), arm.id, base_dir, origin);
    arm.ee_radius = a.value("ee_radius", 0.1);
    if (arm.ee_radius <= 0.0) throw Error(origin + ": arm '" + arm.id + "': ee_radius must be positive");

    if (a.contains("field_params")) {
      const Json& fp = a["field_params"];
      arm.field_params = fp.is_string()
                             ? field_params_from_json(load_json(base_dir / fp.get<std::string>()),
                                                      fp.get<std::string>())
                             : field_params_from_json(fp, origin);
    }

    if (a.contains("coupling")) {
      const Json& c = a["coupling"];
      arm.coupling.enabled = c.value("enabled", false);
      arm.coupling.alpha_hat = c.value("alpha_hat", 25.0 / 3.0);
      arm.coupling.epsilon_s = c.value("epsilon_s", 0.25);
      arm.coupling.priority = c.value("priority", 0);
    }

    const std::vector<Vec3> pts = arm.planned.translations();
    if (a.contains("model")) {
      arm.model = model_from_json(a["model"], origin);
    } else {
      if (pts.size() < 3) throw Error(origin + ": arm '" + arm.id + "': planned trajectory too short to fit");
      const double demo_dt = arm.planned.duration / static_cast<double>(pts.size() - 1);
      arm.model = fit_lwr(pts, demo_dt, opts.gains, RbfBasis::make(opts.basis_count, opts.gains.alpha_s_hat));
    }
    if (arm.model.degenerate) {
      // parked arm: identity frame anchored at its position
      arm.frame.bias = pts.front();
    } else {
      arm.frame = frame_from_trajectory(pts, opts.align_frames);
    }
    sc.arms.push_back(std::move(arm));
  }
  return sc;
}

inline Scenario load_scenario(const fs::path& path, const ScenarioLoadOptions& opts = {}) {
  return scenario_from_json(load_json(path), path.parent_path(), path.string(), opts);
}

// ---- run summary ---------------------------------------------------------------------------

inline Json summary_to_json(const RunLog& log) {
  Json events = Json::array();
  for (const Event& e : log.events)
    events.push_back(Json{{"time", e.time}, {"kind", e.kind}, {"detail", e.detail}});
  Json metrics = Json::object();
  for (std::size_t i = 0; i < log.arm_ids.size(); ++i) {
    const ArmMetrics& m = log.metrics[i];
    metrics[log.arm_ids[i]] = Json{{"max_deviation", m.max_deviation},
                                   {"max_deviation_time_indexed", m.max_deviation_time_indexed},
                                   {"completion_time", m.completion_time},
                                   {"goal_reached", m.goal_reached}};
  }
  Json out{{"dt", log.dt}, {"events", events}, {"metrics", metrics}};
  if (log.series.size() >= 2) out["minimum_clearance"] = minimum_clearance(log);
  return out;
}

}  // namespace oncol::io
