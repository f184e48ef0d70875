// Command-line front end: demonstration synthesis, agent training, skill
// planning, field-parameter optimization, multi-arm simulation, and run
// comparison reports.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oncol/demo_gen.hpp"
#include "oncol/io.hpp"

namespace {

using namespace oncol;
namespace fs = std::filesystem;

struct RuntimeConfig {
  FeaturizeMode featurize_mode{FeaturizeMode::paper};
  RewardMode reward_mode{RewardMode::paper};
  QKeyMode key_mode{QKeyMode::task_cursor};
  DmpGains gains{};
  std::size_t basis_count{30};
  double learning_rate{0.1};
  double discount{0.95};
  double epsilon_start{1.0};
  double epsilon_end{0.05};
  OptimizerConfig optimizer{};
  RunOptions run_options{};
  bool align_frames{false};
};

RuntimeConfig load_config(const std::string& path) {
  RuntimeConfig cfg;
  if (path.empty()) return cfg;
  const io::Json j = io::load_json(path);
  const auto mode = [&](const char* key, const std::string& fallback) {
    return j.value(key, fallback);
  };
  const std::string fm = mode("featurize_mode", "paper");
  if (fm == "conjugate")
    cfg.featurize_mode = FeaturizeMode::conjugate;
  else if (fm != "paper")
    throw Error(path + ": featurize_mode must be paper or conjugate");
  const std::string rm = mode("reward_mode", "paper");
  if (rm == "aligned")
    cfg.reward_mode = RewardMode::aligned;
  else if (rm != "paper")
    throw Error(path + ": reward_mode must be paper or aligned");
  const std::string km = mode("key_mode", "task_cursor");
  if (km == "quantized")
    cfg.key_mode = QKeyMode::quantized;
  else if (km != "task_cursor")
    throw Error(path + ": key_mode must be task_cursor or quantized");

  if (j.contains("dmp")) {
    const io::Json& d = j["dmp"];
    cfg.gains.alpha_z = d.value("alpha_z", cfg.gains.alpha_z);
    cfg.gains.beta_z = d.value("beta_z", cfg.gains.beta_z);
    cfg.gains.alpha_s_hat = d.value("alpha_s_hat", cfg.gains.alpha_s_hat);
    cfg.basis_count = d.value("basis_count", cfg.basis_count);
  }
  if (j.contains("planner")) {
    const io::Json& p = j["planner"];
    cfg.learning_rate = p.value("learning_rate", cfg.learning_rate);
    cfg.discount = p.value("discount", cfg.discount);
    cfg.epsilon_start = p.value("epsilon_start", cfg.epsilon_start);
    cfg.epsilon_end = p.value("epsilon_end", cfg.epsilon_end);
  }
  if (j.contains("optimizer")) {
    const io::Json& o = j["optimizer"];
    cfg.optimizer.lambda_p = o.value("lambda_p", cfg.optimizer.lambda_p);
    cfg.optimizer.mass = o.value("mass", cfg.optimizer.mass);
    cfg.optimizer.penalty_weight = o.value("penalty_weight", cfg.optimizer.penalty_weight);
    cfg.optimizer.max_evals = o.value("max_evals", cfg.optimizer.max_evals);
    if (o.contains("initial_params"))
      cfg.optimizer.initial_params = io::field_params_from_json(o["initial_params"], path);
    const auto bounds = [&](const char* key, std::pair<double, double> fb) {
      if (!o.contains(key)) return fb;
      return std::pair<double, double>{o[key].at(0).get<double>(), o[key].at(1).get<double>()};
    };
    cfg.optimizer.lambda_bounds = bounds("lambda_bounds", cfg.optimizer.lambda_bounds);
    cfg.optimizer.beta_bounds = bounds("beta_bounds", cfg.optimizer.beta_bounds);
    cfg.optimizer.eta_bounds = bounds("eta_bounds", cfg.optimizer.eta_bounds);
  }
  if (j.contains("sim")) {
    const io::Json& s = j["sim"];
    cfg.run_options.goal_position_tol = s.value("goal_position_tol", 1e-3);
    cfg.run_options.goal_phase_tol = s.value("goal_phase_tol", 0.01);
    cfg.run_options.deadlock_window = s.value("deadlock_window", 2.0);
    cfg.align_frames = s.value("align_frames", false);
  }
  return cfg;
}

Vec3 parse_vec3(const std::string& text, const std::string& what) {
  Vec3 v;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &v.x(), &v.y(), &v.z()) != 3)
    throw Error(what + ": expected x,y,z but got '" + text + "'");
  return v;
}

Quaternion parse_quat(const std::string& text, const std::string& what) {
  Quaternion q;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf", &q.w, &q.x, &q.y, &q.z) != 4)
    throw Error(what + ": expected w,x,y,z but got '" + text + "'");
  return q;
}

SkillMdp build_mdp(const RuntimeConfig& cfg, const fs::path& library_dir,
                   const std::string& tasks_path) {
  auto library = io::load_library(library_dir, cfg.featurize_mode);
  auto tasks = io::tasks_from_json(io::load_json(tasks_path), tasks_path);
  return SkillMdp(std::move(library), std::move(tasks), cfg.reward_mode, cfg.featurize_mode);
}

QAgent make_agent(const RuntimeConfig& cfg) {
  QAgent agent;
  agent.learning_rate = cfg.learning_rate;
  agent.discount = cfg.discount;
  agent.epsilon = cfg.epsilon_start;
  agent.epsilon_end = cfg.epsilon_end;
  agent.key_mode = cfg.key_mode;
  return agent;
}

double greedy_total_reward(const QAgent& agent, const SkillMdp& mdp, std::size_t task_index) {
  MdpState s{task_index, 0};
  double total = 0.0;
  while (!mdp.terminal(s)) {
    const auto* row = agent.row(agent.state_key(mdp, s));
    std::size_t a = 0;
    if (row && row->size() == mdp.library().size()) {
      for (std::size_t i = 1; i < row->size(); ++i)
        if ((*row)[i] > (*row)[a]) a = i;
    } else {
      for (std::size_t i = 1; i < mdp.library().size(); ++i)
        if (mdp.reward(s, i) > mdp.reward(s, a)) a = i;
    }
    total += mdp.reward(s, a);
    s = mdp.transition(s, a);
  }
  return total;
}

DmpModel fit_plan(const RuntimeConfig& cfg, const PlannedTrajectory& plan) {
  const std::vector<Vec3> pts = plan.translations();
  if (pts.size() < 3) throw Error("plan '" + plan.robot_id + "': too short to fit a model");
  const double dt = plan.duration / static_cast<double>(pts.size() - 1);
  return fit_lwr(pts, dt, cfg.gains, RbfBasis::make(cfg.basis_count, cfg.gains.alpha_s_hat));
}

int cmd_demo_gen(const RuntimeConfig&, const std::string& kind,
                 const std::vector<std::string>& waypoints, double duration,
                 std::size_t samples, const std::string& rotation,
                 const std::string& rotation_end, double arc_height, double lift_height,
                 const std::string& name, const std::string& out) {
  DemoGenSpec spec;
  spec.kind = demo_kind_from_string(kind);
  for (const std::string& w : waypoints) spec.waypoints.push_back(parse_vec3(w, "--waypoint"));
  spec.duration = duration;
  spec.samples = samples;
  if (!rotation.empty()) {
    spec.rotation_start = parse_quat(rotation, "--rotation");
    spec.rotation_end = spec.rotation_start;
  }
  if (!rotation_end.empty()) spec.rotation_end = parse_quat(rotation_end, "--rotation-end");
  spec.arc_height = arc_height;
  spec.lift_height = lift_height;

  const fs::path path(out);
  const std::string demo_name =
      name.empty() ? path.stem().string() : name;
  const std::vector<Pose> poses = generate_demo(spec);
  io::save_trajectory(path, {demo_name, poses});
  if (path.has_parent_path())
    io::upsert_library_index(path.parent_path(), {demo_name, path.filename().string(), duration,
                                                  critical_sample_indices(spec, poses)});
  std::cout << "wrote " << out << " (" << samples + 1 << " poses, " << duration << " s)\n";
  return 0;
}

int cmd_train(const RuntimeConfig& cfg, const std::string& library_dir,
              const std::string& tasks_path, std::size_t episodes, std::uint64_t seed,
              const std::string& out) {
  const SkillMdp mdp = build_mdp(cfg, library_dir, tasks_path);
  const QAgent trained = train(make_agent(cfg), mdp, episodes, seed);
  std::vector<std::string> ids;
  for (const Demonstration& d : mdp.library()) ids.push_back(d.id);
  io::write_file(out, io::agent_to_json(trained, ids).dump(2) + "\n");
  for (std::size_t t = 0; t < mdp.tasks().size(); ++t)
    std::cout << "task " << mdp.tasks()[t].robot_id << ": greedy reward "
              << greedy_total_reward(trained, mdp, t) << "\n";
  std::cout << "wrote " << out << " (" << trained.value_table.size() << " states)\n";
  return 0;
}

int cmd_plan(const RuntimeConfig& cfg, const std::string& agent_path,
             const std::string& library_dir, const std::string& tasks_path,
             const std::string& robot, const std::string& out) {
  const io::AgentDoc doc = io::agent_from_json(io::load_json(agent_path), agent_path);
  const SkillMdp mdp = build_mdp(cfg, library_dir, tasks_path);
  if (doc.action_ids.size() != mdp.library().size())
    throw Error(agent_path + ": agent was trained on a different library (" +
                std::to_string(doc.action_ids.size()) + " vs " +
                std::to_string(mdp.library().size()) + " demos)");
  for (std::size_t i = 0; i < doc.action_ids.size(); ++i)
    if (doc.action_ids[i] != mdp.library()[i].id)
      throw Error(agent_path + ": library order mismatch at action " + std::to_string(i) +
                  " ('" + doc.action_ids[i] + "' vs '" + mdp.library()[i].id + "')");

  std::size_t task_index = mdp.tasks().size();
  for (std::size_t t = 0; t < mdp.tasks().size(); ++t)
    if (robot.empty() || mdp.tasks()[t].robot_id == robot) {
      task_index = t;
      if (!robot.empty()) break;
    }
  if (robot.empty() && mdp.tasks().size() != 1)
    throw Error(tasks_path + ": several tasks present, select one with --task");
  if (task_index >= mdp.tasks().size())
    throw Error(tasks_path + ": no task for robot '" + robot + "'");
  if (robot.empty()) task_index = 0;

  const PlannedTrajectory planned = plan(doc.agent, mdp, task_index);
  io::write_file(out, io::plan_to_json(planned).dump(2) + "\n");
  std::cout << "plan for " << planned.robot_id << ": " << planned.segments.size()
            << " segment(s), " << planned.poses.size() << " poses, quality "
            << planned.quality << "\n";
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_optimize_field(const RuntimeConfig& cfg, const std::string& scenario_path,
                       const std::string& plan_path, std::size_t max_evals,
                       const std::string& out, const std::string& log_path) {
  io::ScenarioLoadOptions lopts;
  lopts.gains = cfg.gains;
  lopts.basis_count = cfg.basis_count;
  lopts.align_frames = cfg.align_frames;
  const Scenario scenario = io::load_scenario(scenario_path, lopts);
  const PlannedTrajectory planned =
      io::plan_from_json(io::load_json(plan_path), plan_path);
  const DmpModel model = fit_plan(cfg, planned);

  OptimizerConfig opt = cfg.optimizer;
  if (max_evals > 0) opt.max_evals = max_evals;
  opt.dt = scenario.dt;
  const OptimizationResult result =
      optimize(planned.translations(), model, scenario.static_obstacles, opt);
  io::write_file(out, io::optimization_result_to_json(result).dump(2) + "\n");

  std::vector<FieldRolloutSample> log;
  evaluate_field_objective(result.params, planned.translations(), model,
                           scenario.static_obstacles, opt, &log);
  std::string csv = "tick,time,x,y,z,vx,vy,vz,min_C\n";
  char buf[256];
  for (std::size_t k = 0; k < log.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k,
                  log[k].t, log[k].x.x(), log[k].x.y(), log[k].x.z(), log[k].v.x(), log[k].v.y(),
                  log[k].v.z(), log[k].min_c);
    csv += buf;
  }
  if (!log_path.empty()) io::write_file(log_path, csv);

  std::cout << "params: lambda " << result.params.lambda << ", beta " << result.params.beta
            << ", eta " << result.params.eta << "\n"
            << "objective " << result.objective << ", evaluations " << result.evaluations
            << ", violations " << result.constraint_violations << ", converged "
            << (result.converged ? "yes" : "no") << "\n"
            << "wrote " << out << "\n";
  return result.converged ? 0 : 2;
}

int cmd_run(const RuntimeConfig& cfg, const std::string& scenario_path, std::string out_dir,
            const std::string& params_path, bool disable_coupling, std::uint64_t seed,
            bool seed_given) {
  io::ScenarioLoadOptions lopts;
  lopts.gains = cfg.gains;
  lopts.basis_count = cfg.basis_count;
  lopts.align_frames = cfg.align_frames;
  Scenario scenario = io::load_scenario(scenario_path, lopts);
  if (seed_given) scenario.seed = seed;
  if (!params_path.empty()) {
    const FieldParams p = io::field_params_from_json(io::load_json(params_path), params_path);
    for (ArmConfig& arm : scenario.arms) arm.field_params = p;
  }
  if (disable_coupling)
    for (ArmConfig& arm : scenario.arms) arm.coupling.enabled = false;

  if (out_dir.empty()) {
    const auto stamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    out_dir = "runs/" + fs::path(scenario_path).stem().string() + "-" + std::to_string(stamp);
  }
  const fs::path dir(out_dir);
  if (fs::exists(dir)) throw Error("run directory '" + out_dir + "' already exists, refusing to overwrite");
  fs::create_directories(dir);

  const RunLog log = run(scenario, cfg.run_options);
  for (std::size_t i = 0; i < log.arm_ids.size(); ++i)
    io::write_file(dir / ("arm-" + log.arm_ids[i] + ".csv"), to_csv(log, i));
  io::write_file(dir / "summary.json", io::summary_to_json(log).dump(2) + "\n");

  for (std::size_t i = 0; i < log.arm_ids.size(); ++i)
    std::cout << log.arm_ids[i] << ": max deviation " << log.metrics[i].max_deviation
              << " m (time-indexed " << log.metrics[i].max_deviation_time_indexed
              << " m), completed "
              << (log.metrics[i].goal_reached ? std::to_string(log.metrics[i].completion_time) + " s"
                                              : std::string("never"))
              << "\n";
  if (log.series.size() >= 2)
    std::cout << "minimum clearance " << minimum_clearance(log) << " m\n";
  for (const Event& e : log.events)
    if (e.kind != "goal_reached")
      std::cout << "event " << e.kind << " at " << e.time << " s: " << e.detail << "\n";
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs) {
  struct Row {
    std::string label;
    io::Json metrics;
  };
  std::vector<Row> rows;
  const char* labels[2] = {"DMP", "ONCol DMP"};
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    const io::Json summary = io::load_json(fs::path(run_dirs[i]) / "summary.json");
    rows.push_back({run_dirs.size() == 2 ? labels[i] : run_dirs[i], summary["metrics"]});
  }

  std::vector<std::string> arms;
  for (const auto& [arm, _] : rows.front().metrics.items()) arms.push_back(arm);

  std::printf("%-12s", "");
  for (const std::string& arm : arms) std::printf("  %10s", arm.c_str());
  std::printf("\n");
  for (const Row& row : rows) {
    std::printf("%-12s", row.label.c_str());
    for (const std::string& arm : arms) {
      if (!row.metrics.contains(arm)) throw Error("run is missing arm '" + arm + "'");
      std::printf("  %10.4f", row.metrics[arm]["max_deviation"].get<double>());
    }
    std::printf("\n");
  }
  std::printf("(max phase-indexed deviation, meters)\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ONCol-DMP: demonstration-library skill planning and collaborative "
               "multi-arm DMP execution"};
  app.require_subcommand(1);
  app.fallthrough();  // accept --seed/--config after the subcommand too

  std::string config_path;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "runtime configuration JSON");
  auto* seed_opt = app.add_option("--seed", seed, "seed for all randomized steps");

  // demo-gen
  auto* demo = app.add_subcommand("demo-gen", "synthesize a demonstration trajectory file");
  std::string kind{"minjerk"}, rotation, rotation_end, demo_name, demo_out;
  std::vector<std::string> waypoints;
  double duration = 1.0, arc_height = 0.0, lift_height = 0.1;
  std::size_t samples = 100;
  demo->add_option("--kind", kind, "line|minjerk|arc|lift-place");
  demo->add_option("--waypoint", waypoints, "waypoint x,y,z (repeat, >= 2)")->required();
  demo->add_option("--duration", duration, "seconds");
  demo->add_option("--samples", samples, "sample count (writes samples+1 poses)");
  demo->add_option("--rotation", rotation, "constant rotation w,x,y,z");
  demo->add_option("--rotation-end", rotation_end, "slerp target rotation w,x,y,z");
  demo->add_option("--arc-height", arc_height, "arc bulge height (default chord/4)");
  demo->add_option("--lift-height", lift_height, "lift-place corridor height");
  demo->add_option("--name", demo_name, "demo id (default: file stem)");
  demo->add_option("--out", demo_out, "output trajectory file")->required();

  // train
  auto* tr = app.add_subcommand("train", "train the skill-sequencing agent");
  std::string library_dir, tasks_path, agent_out;
  std::size_t episodes = 2000;
  tr->add_option("--library", library_dir, "demonstration library directory")->required();
  tr->add_option("--tasks", tasks_path, "task specification file")->required();
  tr->add_option("--episodes", episodes, "training episodes");
  tr->add_option("--out", agent_out, "output agent file")->required();

  // plan
  auto* pl = app.add_subcommand("plan", "plan a reference trajectory for one robot");
  std::string agent_path, plan_tasks, plan_robot, plan_out;
  std::string plan_library;
  pl->add_option("--agent", agent_path, "trained agent file")->required();
  pl->add_option("--library", plan_library, "demonstration library directory")->required();
  pl->add_option("--tasks", plan_tasks, "task specification file")->required();
  pl->add_option("--task", plan_robot, "robot id to plan for");
  pl->add_option("--out", plan_out, "output plan file")->required();

  // optimize-field
  auto* of = app.add_subcommand("optimize-field", "optimize potential-field gains for a plan");
  std::string of_scenario, of_plan, of_out, of_log;
  std::size_t of_evals = 0;
  of->add_option("--scenario", of_scenario, "scenario file (obstacle source)")->required();
  of->add_option("--plan", of_plan, "reference plan file")->required();
  of->add_option("--max-evals", of_evals, "evaluation budget override");
  of->add_option("--out", of_out, "output params file")->required();
  of->add_option("--log", of_log, "verification rollout CSV");

  // run
  auto* rn = app.add_subcommand("run", "simulate a scenario");
  std::string run_scenario, run_out, run_params;
  bool disable_coupling = false;
  rn->add_option("--scenario", run_scenario, "scenario file")->required();
  rn->add_option("--out", run_out, "run directory (default runs/<name>-<stamp>)");
  rn->add_option("--params", run_params, "field params file applied to all arms");
  rn->add_flag("--disable-coupling", disable_coupling, "turn phase coupling off everywhere");

  // report
  auto* rp = app.add_subcommand("report", "summarize one run or compare two");
  std::vector<std::string> report_dirs;
  rp->add_option("dirs", report_dirs, "run directories (1 or 2)")->expected(1, 2);

  CLI11_PARSE(app, argc, argv);

  try {
    const RuntimeConfig cfg = load_config(config_path);
    if (demo->parsed())
      return cmd_demo_gen(cfg, kind, waypoints, duration, samples, rotation, rotation_end,
                          arc_height, lift_height, demo_name, demo_out);
    if (tr->parsed()) return cmd_train(cfg, library_dir, tasks_path, episodes, seed, agent_out);
    if (pl->parsed()) return cmd_plan(cfg, agent_path, plan_library, plan_tasks, plan_robot, plan_out);
    if (of->parsed()) return cmd_optimize_field(cfg, of_scenario, of_plan, of_evals, of_out, of_log);
    if (rn->parsed())
      return cmd_run(cfg, run_scenario, run_out, run_params, disable_coupling, seed,
                     seed_opt->count() > 0);
    if (rp->parsed()) return cmd_report(report_dirs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
