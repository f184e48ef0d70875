#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "oncol/dualquat.hpp"

namespace oncol {

/// One demonstrated skill with its cached end-pose-relative featurization.
/// critical_indices mark the demo's key configurations inside the recorded
/// poses; a coarse demo (the default) treats every pose as critical, a
/// densely sampled one typically marks its waypoints.
struct Demonstration {
  std::string id;
  std::vector<Pose> poses;
  FeaturizedTrajectory featurized;           // of all poses
  FeaturizedTrajectory featurized_critical;  // of the critical subsequence
  std::vector<std::size_t> critical_indices;
  double duration{1.0};  // seconds

  /// Number of task configurations an action with this demo consumes.
  std::size_t n_segments() const { return critical_indices.size() - 1; }

  static Demonstration make(std::string id, std::vector<Pose> poses, double duration,
                            FeaturizeMode mode = FeaturizeMode::paper,
                            std::vector<std::size_t> critical = {}) {
    Demonstration d;
    d.id = std::move(id);
    d.featurized = featurize(poses, mode);
    if (critical.empty()) {
      critical.resize(poses.size());
      for (std::size_t i = 0; i < poses.size(); ++i) critical[i] = i;
    }
    if (critical.size() < 2 || critical.front() != 0 || critical.back() != poses.size() - 1 ||
        !std::is_sorted(critical.begin(), critical.end()))
      throw Error("demonstration '" + d.id + "': critical indices must be sorted, start at 0, "
                  "and end at the last pose");
    std::vector<Pose> key;
    key.reserve(critical.size());
    for (std::size_t i : critical) key.push_back(poses[i]);
    d.featurized_critical = featurize(key, mode);
    d.critical_indices = std::move(critical);
    d.poses = std::move(poses);
    d.duration = duration;
    return d;
  }
};

/// Task as a sequence of K+1 critical configurations.
struct TaskSpec {
  std::string robot_id;
  std::vector<Pose> critical_configurations;

  std::size_t segment_count() const { return critical_configurations.size() - 1; }  // K
};

struct MdpState {
  std::size_t task_index{0};
  std::size_t cursor{0};  // 0 <= cursor <= K
};

enum class RewardMode {
  paper,    // all-pairs sum over remaining task deltas x demo deltas
  aligned,  // task delta j paired with demo delta j - cursor
};

enum class QKeyMode {
  task_cursor,  // exact key over the fixed training task set
  quantized,    // generalizing key over the next segment's featurized pose
};

/// The skill-sequencing MDP: states are cursors into a task's featurized
/// configurations, actions are demonstrations, rewards the negated
/// semantic-similarity sum (0 = perfect match is the maximum).
class SkillMdp {
 public:
  SkillMdp(std::vector<Demonstration> library, std::vector<TaskSpec> tasks,
           RewardMode mode = RewardMode::paper, FeaturizeMode featurize_mode = FeaturizeMode::paper)
      : library_(std::move(library)), tasks_(std::move(tasks)), mode_(mode) {
    if (library_.empty()) throw Error("skill planner: demonstration library is empty");
    task_deltas_.reserve(tasks_.size());
    for (const TaskSpec& t : tasks_) {
      if (t.critical_configurations.size() < 2)
        throw Error("task '" + t.robot_id + "': needs >= 2 critical configurations");
      task_deltas_.push_back(featurize(t.critical_configurations, featurize_mode));
    }
  }

  const std::vector<Demonstration>& library() const { return library_; }
  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  std::size_t segment_count(std::size_t task_index) const {
    return task_deltas_[task_index].deltas.size();
  }

  bool terminal(const MdpState& s) const { return s.cursor >= segment_count(s.task_index); }

  double reward(const MdpState& s, std::size_t demo_index) const {
    const Demonstration& demo = library_[demo_index];
    if (demo.featurized_critical.deltas.empty())
      throw Error("reward: demonstration has no segments");
    const auto& task = task_deltas_[s.task_index].deltas;
    const auto& dd = demo.featurized_critical.deltas;
    double sum = 0.0;
    if (mode_ == RewardMode::paper) {
      for (std::size_t j = s.cursor; j < task.size(); ++j)
        for (const FeaturizedPose& dl : dd) sum += semantic_similarity(task[j], dl);
    } else {
      const std::size_t span = std::min(dd.size(), task.size() - s.cursor);
      for (std::size_t l = 0; l < span; ++l)
        sum += semantic_similarity(task[s.cursor + l], dd[l]);
    }
    return -sum;
  }

  MdpState transition(const MdpState& s, std::size_t demo_index) const {
    const std::size_t k = segment_count(s.task_index);
    const std::size_t consumed = std::min(library_[demo_index].n_segments(), k - s.cursor);
    return {s.task_index, s.cursor + consumed};
  }

 private:
  std::vector<Demonstration> library_;
  std::vector<TaskSpec> tasks_;
  std::vector<FeaturizedTrajectory> task_deltas_;
  RewardMode mode_;
};

/// Tabular Q-learner over (state key, demonstration) pairs. The key is
/// either exact (task id + cursor) or a quantized featurized-pose key that
/// generalizes across tasks.
struct QAgent {
  std::map<std::string, std::vector<double>> value_table;  // state key -> Q per demo
  double epsilon{1.0};
  double epsilon_end{0.05};
  double learning_rate{0.1};
  double discount{0.95};
  QKeyMode key_mode{QKeyMode::task_cursor};

  std::string state_key(const SkillMdp& mdp, const MdpState& s) const {
    if (key_mode == QKeyMode::task_cursor)
      return mdp.tasks()[s.task_index].robot_id + "|" + std::to_string(s.cursor);
    // Quantize the next configuration's featurized rotation to one decimal.
    const auto& cfgs = mdp.tasks()[s.task_index].critical_configurations;
    const std::size_t j = std::min(s.cursor, cfgs.size() - 2);
    const FeaturizedPose d =
        featurize({cfgs[j], cfgs.back()}).deltas.front();
    const Quaternion q = d.delta.real.canonicalized();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f|%.1f|%.1f|%.1f", q.w, q.x, q.y, q.z);
    return buf;
  }

  const std::vector<double>* row(const std::string& key) const {
    const auto it = value_table.find(key);
    return it == value_table.end() ? nullptr : &it->second;
  }

  std::vector<double>& row_mut(const std::string& key, std::size_t n_actions) {
    auto& r = value_table[key];
    if (r.size() != n_actions) r.assign(n_actions, 0.0);
    return r;
  }
};

namespace detail {

// xorshift-free deterministic uniforms from std::mt19937_64 output.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  std::size_t index(std::size_t n) {
    return std::min(static_cast<std::size_t>(uniform() * static_cast<double>(n)), n - 1);
  }
};

inline std::size_t argmax_action(const std::vector<double>& q) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < q.size(); ++a)
    if (q[a] > q[best]) best = a;
  return best;
}

}  // namespace detail

/// Epsilon-greedy Q-learning with the exploration rate annealed linearly
/// from agent.epsilon to agent.epsilon_end across episodes.
inline QAgent train(QAgent agent, const SkillMdp& mdp, std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) return agent;
  detail::Rng rng(seed);
  const std::size_t n_actions = mdp.library().size();
  const double eps0 = agent.epsilon, eps1 = agent.epsilon_end;

  for (std::size_t ep = 0; ep < episodes; ++ep) {
    const double frac = episodes > 1 ? static_cast<double>(ep) / static_cast<double>(episodes - 1)
                                     : 1.0;
    const double eps = eps0 + (eps1 - eps0) * frac;
    MdpState s{rng.index(mdp.tasks().size()), 0};
    std::size_t guard = 0;
    while (!mdp.terminal(s) && guard++ <= mdp.segment_count(s.task_index) + 1) {
      const std::string key = agent.state_key(mdp, s);
      auto& q = agent.row_mut(key, n_actions);
      const std::size_t a =
          rng.uniform() < eps ? rng.index(n_actions) : detail::argmax_action(q);
      const double r = mdp.reward(s, a);
      const MdpState s2 = mdp.transition(s, a);
      double target = r;
      if (!mdp.terminal(s2)) {
        const auto& q2 = agent.row_mut(agent.state_key(mdp, s2), n_actions);
        target += agent.discount * *std::max_element(q2.begin(), q2.end());
      }
      q[a] += agent.learning_rate * (target - q[a]);
      s = s2;
    }
  }
  agent.epsilon = eps1;
  return agent;
}

struct PlanSegment {
  std::string demo_id;
  std::size_t first_pose{0};
  std::size_t last_pose{0};   // inclusive index into the demo's poses
  std::size_t start_index{0}; // index of this segment's anchor pose in `poses`
};

/// Stitched reference trajectory for one robot.
struct PlannedTrajectory {
  std::string robot_id;
  double duration{0.0};
  double quality{0.0};  // mean per-configuration similarity, 0 = exact
  std::vector<PlanSegment> segments;
  std::vector<Pose> poses;

  std::vector<Vec3> translations() const {
    std::vector<Vec3> out;
    out.reserve(poses.size());
    for (const Pose& p : poses) out.push_back(p.translation);
    return out;
  }
};

/// Greedy rollout of the trained policy. States the training never visited
/// fall back to the one-step reward-maximizing demonstration, so planning
/// degrades to a greedy stitch instead of failing on unseen tasks.
inline PlannedTrajectory plan(const QAgent& agent, const SkillMdp& mdp, std::size_t task_index) {
  const TaskSpec& task = mdp.tasks()[task_index];
  const std::size_t k = mdp.segment_count(task_index);
  const std::size_t n_actions = mdp.library().size();

  PlannedTrajectory out;
  out.robot_id = task.robot_id;

  MdpState s{task_index, 0};
  const FeaturizedTrajectory task_f = featurize(task.critical_configurations);
  double quality_sum = 0.0;
  std::size_t quality_terms = 0;
  while (!mdp.terminal(s)) {
    const std::vector<double>* q = agent.row(agent.state_key(mdp, s));
    std::size_t a;
    if (q && q->size() == n_actions) {
      a = detail::argmax_action(*q);
    } else {
      a = 0;
      for (std::size_t i = 1; i < n_actions; ++i)
        if (mdp.reward(s, i) > mdp.reward(s, a)) a = i;
    }
    const Demonstration& demo = mdp.library()[a];
    const MdpState s2 = mdp.transition(s, a);
    const std::size_t consumed = s2.cursor - s.cursor;  // critical segments
    if (consumed == 0)
      throw Error("plan: policy made no progress at task '" + task.robot_id + "' cursor " +
                  std::to_string(s.cursor));

    // Segment 0 anchors at the task start; later segments at the previous
    // segment's end, which keeps the stitch continuous regardless of how
    // well the demo matches the task. The pose range runs up to the last
    // consumed critical configuration, so a densely recorded demo
    // contributes its whole shape.
    const std::size_t last_pose = demo.critical_indices[consumed];
    const Vec3 anchor =
        out.poses.empty() ? task.critical_configurations.front().translation
                          : out.poses.back().translation;
    const Vec3 shift = anchor - demo.poses.front().translation;
    PlanSegment seg{demo.id, 0, last_pose, out.poses.empty() ? 0 : out.poses.size() - 1};
    const std::size_t begin = out.poses.empty() ? 0 : 1;
    for (std::size_t i = begin; i <= last_pose; ++i) {
      Pose p = demo.poses[i];
      p.translation += shift;
      out.poses.push_back(p);
    }
    out.segments.push_back(seg);
    out.duration += demo.duration * static_cast<double>(consumed) /
                    static_cast<double>(demo.n_segments());

    for (std::size_t l = 0; l < consumed && s.cursor + l < k; ++l) {
      quality_sum += semantic_similarity(task_f.deltas[s.cursor + l],
                                         demo.featurized_critical.deltas[l]);
      ++quality_terms;
    }
    s = s2;
  }
  out.quality = quality_terms ? quality_sum / static_cast<double>(quality_terms) : 0.0;
  return out;
}

}  // namespace oncol
