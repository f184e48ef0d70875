#pragma once

#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "oncol/collab.hpp"
#include "oncol/dmp.hpp"
#include "oncol/field.hpp"
#include "oncol/normalize.hpp"
#include "oncol/skill_planner.hpp"

namespace oncol {

/// One arm's execution bundle: reference plan, fitted DMP, optimized field
/// gains, normalization frame, and coupling role. ee_radius is the sphere
/// the other arms see this end-effector as.
struct ArmConfig {
  std::string id;
  PlannedTrajectory planned;
  DmpModel model;
  FieldParams field_params;
  NormalizationFrame frame;
  PhaseCoupling coupling;
  double ee_radius{0.1};
};

struct Scenario {
  std::vector<ArmConfig> arms;
  std::vector<EllipsoidObstacle> static_obstacles;
  double dt{0.01};
  double max_duration{30.0};
  std::uint64_t seed{0};
};

struct Event {
  double time{0.0};
  std::string kind;  // goal_reached | constraint_violation | deadlock | divergence
  std::string detail;
};

struct ArmSeries {
  std::vector<double> time;
  std::vector<Vec3> x;
  std::vector<Vec3> v;
  std::vector<double> s;
  std::vector<double> alpha_s;
  std::vector<Vec3> force;
  std::vector<std::vector<double>> c_values;  // per obstacle proxy, canonical order
  std::vector<double> min_c;
};

struct ArmMetrics {
  double max_deviation{0.0};               // phase-indexed
  double max_deviation_time_indexed{0.0};
  double completion_time{0.0};
  bool goal_reached{false};
};

/// Phase-indexed reference lookup. The reference is the arm's own
/// unperturbed rollout sampled on the sim tick grid, so deviation measures
/// exactly what the field and the coupling did: an untouched run scores 0,
/// and a slowed-but-on-path arm scores 0 as well (x_ref is indexed by s,
/// not wall time).
struct PhaseReference {
  std::vector<double> phase;  // strictly decreasing from 1
  std::vector<Vec3> position;
  double dt{0.01};

  Vec3 at_phase(double s) const {
    if (s >= phase.front()) return position.front();
    if (s <= phase.back()) return position.back();
    std::size_t lo = 0, hi = phase.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (phase[mid] > s ? lo : hi) = mid;
    }
    const double a = (phase[lo] - s) / (phase[lo] - phase[hi]);
    return (1.0 - a) * position[lo] + a * position[hi];
  }

  Vec3 at_time(double t) const {
    const double u = std::max(t, 0.0) / dt;
    const std::size_t i = std::min(static_cast<std::size_t>(u), position.size() - 1);
    if (i + 1 >= position.size()) return position.back();
    const double a = u - static_cast<double>(i);
    return (1.0 - a) * position[i] + a * position[i + 1];
  }
};

struct RunLog {
  double dt{0.01};
  std::vector<std::string> arm_ids;
  std::vector<ArmSeries> series;
  std::vector<PhaseReference> references;
  std::vector<Event> events;
  std::vector<ArmMetrics> metrics;

  std::size_t arm_index(const std::string& id) const {
    for (std::size_t i = 0; i < arm_ids.size(); ++i)
      if (arm_ids[i] == id) return i;
    throw Error("run log does not contain arm '" + id + "'");
  }
};

struct RunOptions {
  std::vector<std::size_t> update_order;  // empty = canonical 0..n-1
  double goal_position_tol{1e-3};
  double goal_phase_tol{0.01};
  double deadlock_alpha_threshold{1e-3};
  double deadlock_window{2.0};  // seconds
};

/// Max over ticks of the phase-indexed distance to the reference.
inline double max_deviation(const RunLog& log, const std::string& arm_id) {
  const std::size_t i = log.arm_index(arm_id);
  const ArmSeries& ser = log.series[i];
  double worst = 0.0;
  for (std::size_t k = 0; k < ser.x.size(); ++k)
    worst = std::max(worst, (ser.x[k] - log.references[i].at_phase(ser.s[k])).norm());
  return worst;
}

inline double max_deviation_time_indexed(const RunLog& log, const std::string& arm_id) {
  const std::size_t i = log.arm_index(arm_id);
  const ArmSeries& ser = log.series[i];
  double worst = 0.0;
  for (std::size_t k = 0; k < ser.x.size(); ++k)
    worst = std::max(worst, (ser.x[k] - log.references[i].at_time(ser.time[k])).norm());
  return worst;
}

/// Min over ticks and arm pairs of the end-effector distance. Collision-free
/// means this exceeds the pair's summed ee radii.
inline double minimum_clearance(const RunLog& log) {
  if (log.series.size() < 2) throw Error("minimum_clearance: needs >= 2 arms");
  double best = std::numeric_limits<double>::infinity();
  const std::size_t ticks = log.series.front().x.size();
  for (std::size_t k = 0; k < ticks; ++k)
    for (std::size_t i = 0; i < log.series.size(); ++i)
      for (std::size_t j = i + 1; j < log.series.size(); ++j)
        best = std::min(best, (log.series[i].x[k] - log.series[j].x[k]).norm());
  return best;
}

namespace detail {

/// Unperturbed rollout at the sim tick grid, extended past tau until the
/// nominal phase has effectively decayed.
inline PhaseReference make_phase_reference(const ArmConfig& arm, double dt) {
  PhaseReference ref;
  ref.dt = dt;
  const double tau = arm.model.gains.tau;
  double duration = 1.5 * tau;
  const double decay = 1.0 - arm.model.gains.alpha_s_hat * dt / tau;
  if (decay > 0.0 && decay < 1.0) {
    const double t_phase = std::log(1e-4) / std::log(decay) * dt;
    duration = std::max(duration, std::min(t_phase, 20.0 * tau));
  }
  const std::vector<DmpState> states = arm.model.rollout(dt, duration);
  ref.phase.reserve(states.size());
  ref.position.reserve(states.size());
  for (const DmpState& st : states) {
    ref.phase.push_back(st.s);
    ref.position.push_back(st.x);
  }
  return ref;
}

}  // namespace detail

/// Tick loop: snapshot all arms, evaluate each arm's normalized field
/// forces and coupling rate against the snapshot (Jacobi update, so arm
/// order cannot matter), then step every DMP.
inline RunLog run(const Scenario& scenario, const RunOptions& options = {}) {
  if (scenario.arms.empty()) throw Error("run: scenario has no arms");
  if (scenario.dt <= 0.0) throw Error("run: dt must be positive");
  const std::size_t n = scenario.arms.size();

  std::vector<std::size_t> order = options.update_order;
  if (order.empty()) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
  }
  if (order.size() != n) throw Error("run: update_order size mismatch");

  RunLog log;
  log.dt = scenario.dt;
  log.series.resize(n);
  for (const ArmConfig& arm : scenario.arms) {
    log.arm_ids.push_back(arm.id);
    log.references.push_back(detail::make_phase_reference(arm, scenario.dt));
  }
  log.metrics.resize(n);

  std::vector<DmpState> states;
  states.reserve(n);
  for (const ArmConfig& arm : scenario.arms) states.push_back(arm.model.initial_state());

  std::vector<bool> reached(n, false);
  std::vector<bool> inside(n * (scenario.static_obstacles.size() + n), false);
  double deadlock_accum = 0.0;
  bool halted = false;
  const std::size_t max_ticks =
      static_cast<std::size_t>(std::ceil(scenario.max_duration / scenario.dt - 1e-12));

  for (std::size_t tick = 0; tick <= max_ticks && !halted; ++tick) {
    const double t = static_cast<double>(tick) * scenario.dt;

    // Snapshot.
    std::vector<Vec3> pos(n), vel(n);
    for (std::size_t i = 0; i < n; ++i) {
      pos[i] = states[i].x;
      vel[i] = scenario.arms[i].model.velocity(states[i]);
      if (!pos[i].allFinite() || !vel[i].allFinite()) {
        log.events.push_back({t, "divergence", "arm=" + scenario.arms[i].id});
        halted = true;
      }
    }
    if (halted) break;

    // Per-arm forces, vicinity coupling, and constraint checks, all from
    // the snapshot in canonical obstacle order.
    std::vector<Vec3> force(n, Vec3::Zero());
    std::vector<double> alpha(n, 0.0);
    std::vector<std::vector<double>> cvals(n);
    for (std::size_t i = 0; i < n; ++i) {
      const ArmConfig& arm = scenario.arms[i];
      const Vec3 xn = normalize_point(arm.frame, pos[i]);
      const Vec3 vn = normalize_vector(arm.frame, vel[i]);
      Vec3 fn = Vec3::Zero();
      std::size_t slot = i * (scenario.static_obstacles.size() + n);
      for (std::size_t m = 0; m < scenario.static_obstacles.size(); ++m, ++slot) {
        EllipsoidObstacle ob = scenario.static_obstacles[m];
        ob.center += ob.velocity * t;
        const EllipsoidObstacle obn = normalize_obstacle(arm.frame, ob);
        const double c = isopotential(obn, xn);
        cvals[i].push_back(c);
        fn += field_force(arm.field_params, obn, xn, vn);
        if (c < 1.0 && !inside[slot])
          log.events.push_back({t, "constraint_violation",
                                "arm=" + arm.id + " obstacle=" + std::to_string(m) +
                                    " C=" + std::to_string(c)});
        inside[slot] = c < 1.0;
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const EllipsoidObstacle proxy =
            EllipsoidObstacle::sphere(pos[j], scenario.arms[j].ee_radius, vel[j]);
        const EllipsoidObstacle obn = normalize_obstacle(arm.frame, proxy);
        const double c = isopotential(obn, xn);
        cvals[i].push_back(c);
        fn += field_force(arm.field_params, obn, xn, vn);
        if (c < 1.0 && !inside[slot])
          log.events.push_back({t, "constraint_violation",
                                "arm=" + arm.id + " obstacle=arm:" + scenario.arms[j].id +
                                    " C=" + std::to_string(c)});
        inside[slot] = c < 1.0;
        ++slot;
      }
      force[i] = rescale_vector(arm.frame, fn);

      double d_min = std::numeric_limits<double>::infinity();
      if (arm.coupling.enabled) {
        for (std::size_t j = 0; j < n; ++j)
          if (j != i && scenario.arms[j].coupling.priority < arm.coupling.priority)
            d_min = std::min(d_min, vicinity(pos[i], pos[j], arm.coupling.epsilon_s));
      }
      alpha[i] = phase_rate_from_vicinity(arm.coupling, d_min);
    }

    // Log the tick.
    for (std::size_t i = 0; i < n; ++i) {
      ArmSeries& ser = log.series[i];
      ser.time.push_back(t);
      ser.x.push_back(pos[i]);
      ser.v.push_back(vel[i]);
      ser.s.push_back(states[i].s);
      ser.alpha_s.push_back(alpha[i]);
      ser.force.push_back(force[i]);
      double mc = std::numeric_limits<double>::infinity();
      for (double c : cvals[i]) mc = std::min(mc, c);
      ser.c_values.push_back(std::move(cvals[i]));
      ser.min_c.push_back(mc);
    }

    // Goal events and termination.
    bool all_reached = true;
    for (std::size_t i = 0; i < n; ++i) {
      const ArmConfig& arm = scenario.arms[i];
      const bool at_goal = (pos[i] - arm.model.goal).norm() < options.goal_position_tol &&
                           states[i].s < options.goal_phase_tol;
      if (at_goal && !reached[i]) {
        reached[i] = true;
        log.metrics[i].goal_reached = true;
        log.metrics[i].completion_time = t;
        log.events.push_back({t, "goal_reached", "arm=" + arm.id});
      }
      all_reached = all_reached && reached[i];
    }
    if (all_reached) break;

    // Deadlock watchdog over the coupling-enabled arms.
    bool any_coupled = false, all_frozen = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!scenario.arms[i].coupling.enabled) continue;
      any_coupled = true;
      all_frozen = all_frozen && alpha[i] < options.deadlock_alpha_threshold;
    }
    if (any_coupled && all_frozen) {
      deadlock_accum += scenario.dt;
      if (deadlock_accum > options.deadlock_window) {
        log.events.push_back({t, "deadlock", "coupled arms frozen for " +
                                                 std::to_string(deadlock_accum) + " s"});
        break;
      }
    } else {
      deadlock_accum = 0.0;
    }

    if (tick == max_ticks) break;
    for (std::size_t idx : order) {
      states[idx] = scenario.arms[idx].model.step(states[idx], scenario.dt, force[idx], alpha[idx]);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    log.metrics[i].max_deviation = max_deviation(log, scenario.arms[i].id);
    log.metrics[i].max_deviation_time_indexed = max_deviation_time_indexed(log, scenario.arms[i].id);
    if (!log.metrics[i].goal_reached)
      log.metrics[i].completion_time = log.series[i].time.back();
  }
  return log;
}

/// CSV with the pinned header; %.17g keeps round-trips exact and the file
/// bit-identical across runs.
inline std::string to_csv(const RunLog& log, std::size_t arm_index) {
  const ArmSeries& ser = log.series[arm_index];
  std::string out = "tick,time,x,y,z,vx,vy,vz,s,alpha_s,min_C,fx,fy,fz\n";
  char buf[512];
  for (std::size_t k = 0; k < ser.time.size(); ++k) {
    std::snprintf(buf, sizeof(buf),
                  "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  k, ser.time[k], ser.x[k].x(), ser.x[k].y(), ser.x[k].z(), ser.v[k].x(),
                  ser.v[k].y(), ser.v[k].z(), ser.s[k], ser.alpha_s[k], ser.min_c[k],
                  ser.force[k].x(), ser.force[k].y(), ser.force[k].z());
    out += buf;
  }
  return out;
}

}  // namespace oncol
