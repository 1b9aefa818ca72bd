#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amorph/error.hpp"
#include "amorph/materials/springs.hpp"
#include "amorph/observe/observation.hpp"
#include "amorph/rng.hpp"
#include "amorph/sim/snapshot.hpp"
#include "amorph/sim/world.hpp"
#include "amorph/tasks/rewards.hpp"
#include "amorph/tasks/task_config.hpp"

namespace amorph {

struct StepInfo {
  double far_distance = 0.0;  // farthest particle to the goal, planar
  int occupied_cells = 0;     // world-frame height map
  Vec3 omega = Vec3::Zero();  // material angular velocity
  int outliers = 0;           // particles beyond the spreading interior radius
  double d_ymin = 0.0;        // lowest particle height above the tool origin
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

inline int curriculum_update(int level, double episode_return, double threshold, int max_level = 4) {
  return (episode_return > threshold && level < max_level) ? level + 1 : level;
}

// Tracks the gathering curriculum across training iterations. With a fixed
// threshold any rollout return above it advances the level; otherwise the
// threshold is factor * best per-iteration return over the last `window`
// iterations at the current level, engaged once that many have been seen.
class CurriculumTracker {
 public:
  explicit CurriculumTracker(const CurriculumConfig& cfg = {}, int level = 1) : cfg_(cfg), level_(level) {}

  int level() const { return level_; }

  double threshold() const {
    if (cfg_.threshold) return *cfg_.threshold;
    if (static_cast<int>(best_.size()) < cfg_.window) return std::numeric_limits<double>::infinity();
    double b = -std::numeric_limits<double>::infinity();
    for (double v : best_) b = std::max(b, v);
    return b >= 0.0 ? cfg_.factor * b : b / cfg_.factor;
  }

  // Returns true when the level advanced.
  bool observe_iteration(std::span<const double> episode_returns) {
    if (!cfg_.enabled || episode_returns.empty()) return false;
    const double thr = threshold();
    double best = -std::numeric_limits<double>::infinity();
    for (double r : episode_returns) best = std::max(best, r);
    const int next = curriculum_update(level_, best, thr, cfg_.max_level);
    if (next != level_) {
      level_ = next;
      best_.clear();
      return true;
    }
    best_.push_back(best);
    while (static_cast<int>(best_.size()) > cfg_.window) best_.pop_front();
    return false;
  }

  nlohmann::json to_json() const { return {{"level", level_}, {"best", best_}}; }

  void from_json(const nlohmann::json& j) {
    level_ = j.at("level").get<int>();
    best_.clear();
    for (const auto& v : j.at("best")) best_.push_back(v.get<double>());
  }

 private:
  CurriculumConfig cfg_;
  int level_;
  std::deque<double> best_;
};

class Env {
 public:
  Env(TaskConfig task, SolverConfig solver) : task_(std::move(task)), solver_(std::move(solver)) {
    task_.validate();
    solver_.validate();
  }

  const TaskConfig& task() const { return task_; }
  TaskConfig& task() { return task_; }
  const SolverConfig& solver() const { return solver_; }
  const WorldState& world() const { return world_; }
  WorldState& world() { return world_; }
  int steps() const { return steps_; }
  int action_dim() const { return amorph::action_dim(task_.kind); }

  Observation reset(std::uint64_t seed) {
    task_.validate();
    Rng rng(seed);
    world_ = WorldState{};
    world_.tool.dof_mask = task_.dof_mask();
    switch (task_.kind) {
      case TaskKind::gathering: spawn_gathering(rng); break;
      case TaskKind::spreading: spawn_spreading(rng); break;
      case TaskKind::flipping: spawn_flipping(); break;
    }
    world_.rng = Rng(derive_seed(seed, 0x5eed));
    steps_ = 0;
    tilt_target_ = 0.0;
    started_ = true;
    return observe();
  }

  Observation observe() const { return assemble_observation(world_, task_.layout()); }

  // Local-frame action to a world-frame PD target.
  Pose action_to_target(std::span<const double> action) {
    require(static_cast<int>(action.size()) == action_dim(), ErrorKind::invalid_action,
            "expected " + std::to_string(action_dim()) + " action entries, got " +
                std::to_string(action.size()));
    require(all_finite(action), ErrorKind::invalid_action, "non-finite action");
    std::vector<double> a(action.begin(), action.end());
    // Every task's last action entry is the angular one.
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double b = k + 1 == a.size() ? task_.action_ang_bound : task_.action_pos_bound;
      a[k] = std::clamp(a[k], -b, b);
    }
    const auto& q = world_.tool.q;
    Pose target = q;
    const double c = std::cos(q[kPsi]), s = std::sin(q[kPsi]);
    auto planar = [&](double lx, double lz) {
      target[kX] = q[kX] + c * lx + s * lz;
      target[kZ] = q[kZ] - s * lx + c * lz;
    };
    switch (task_.kind) {
      case TaskKind::gathering:
        planar(a[0], a[1]);
        target[kPsi] = q[kPsi] + a[2];
        break;
      case TaskKind::spreading: {
        planar(a[0], a[2]);
        target[kY] = std::clamp(q[kY] + a[1], task_.tool_y_min, task_.tool_y_max);
        target[kPsi] = q[kPsi] + a[3];
        // Lean the blade top toward its motion along the blade normal.
        const auto& v = world_.tool.qdot;
        if (std::hypot(v[kX], v[kZ]) > task_.tilt_speed_threshold) {
          const double along = v[kX] * s + v[kZ] * c;
          tilt_target_ = along >= 0.0 ? task_.tilt_angle : -task_.tilt_angle;
        }
        target[kPhi] = tilt_target_;
        break;
      }
      case TaskKind::flipping:
        planar(a[0], a[2]);
        target[kY] = std::clamp(q[kY] + a[1], task_.tool_y_min, task_.tool_y_max);
        target[kPhi] = q[kPhi] + a[3];
        break;
    }
    return target;
  }

  StepResult step(std::span<const double> action) {
    require(started_, ErrorKind::internal, "step before reset");
    const Pose target = action_to_target(action);
    WorldState prev = world_;
    advance_world(world_, target, solver_);
    ++steps_;
    StepResult r;
    r.reward = task_reward(prev, world_, task_);
    r.done = steps_ >= task_.horizon;
    r.info = info();
    r.observation = observe();
    return r;
  }

  StepInfo info() const {
    StepInfo i;
    const auto& ps = world_.particles;
    if (ps.empty()) return i;
    i.far_distance = farthest_from_goal(ps, task_.goal).distance;
    i.occupied_cells = occupied_cells(ps, task_);
    i.omega = material_angular_velocity(ps);
    for (const auto& x : ps.positions)
      if (std::hypot(x.x(), x.z()) > task_.spreading.c_rad) ++i.outliers;
    i.d_ymin = min_height_above_tool(world_);
    return i;
  }

  nlohmann::json save_state() const {
    return {{"world", world_to_json(world_)}, {"steps", steps_}, {"tilt_target", tilt_target_},
            {"level", task_.curriculum_level}, {"started", started_}};
  }

  void load_state(const nlohmann::json& j) {
    world_ = world_from_json(j.at("world"));
    steps_ = j.at("steps").get<int>();
    tilt_target_ = j.at("tilt_target").get<double>();
    task_.curriculum_level = j.at("level").get<int>();
    started_ = j.at("started").get<bool>();
  }

 private:
  double spacing() const { return 2.0 * task_.effective_radius() * task_.spacing_factor; }
  int cluster_count() const { return task_.particle_count * resolution_count_factor(task_.resolution_multiplier); }

  double cluster_half_width() const {
    const int side = std::max(1, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(cluster_count())))));
    return 0.5 * (side - 1) * spacing() + task_.effective_radius();
  }

  void attach_springs() {
    const double r = task_.effective_radius();
    if (task_.material == Material::visco_plastic) {
      world_.springs = SpringSet{{}, SpringParams::for_radius(r)};
      world_.springs = update_springs(world_.particles, world_.springs, nullptr);
    } else if (task_.material == Material::elastic) {
      world_.springs = elastic_spring_network(world_.particles, 1.75 * spacing());
    } else {
      world_.springs = SpringSet{{}, SpringParams::for_radius(r)};
    }
  }

  void spawn_gathering(Rng& rng) {
    const auto& sp = task_.spawn;
    const double half = cluster_half_width();
    const double extent = std::min(sp.cluster_extent, solver_.table_half_extent - half);
    require(extent > 0.0, ErrorKind::config, "clusters do not fit on the table");
    std::vector<Vec2> centers;
    for (int c = 0; c < task_.clusters(); ++c) {
      bool placed = false;
      for (int attempt = 0; attempt < sp.retries && !placed; ++attempt) {
        const Vec2 p(uniform(rng, -extent, extent), uniform(rng, -extent, extent));
        if ((p - task_.goal).norm() < sp.min_goal_distance) continue;
        bool clear = true;
        for (const auto& o : centers) clear = clear && (p - o).norm() >= 2.0 * half + 2.0 * task_.effective_radius();
        if (!clear) continue;
        centers.push_back(p);
        placed = true;
      }
      require(placed, ErrorKind::config, "cluster placement failed after bounded retries");
    }
    auto& ps = world_.particles;
    ps.radius = task_.effective_radius();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const auto cl = spawn_cluster(centers[c], cluster_count(), task_.material, spacing(),
                                    rng(), ps.radius, solver_.table_half_extent);
      for (std::size_t i = 0; i < cl.size(); ++i) ps.add(cl.positions[i], cl.material[i], cl.inv_mass[i]);
    }
    attach_springs();

    auto& tool = world_.tool;
    tool.geometry = ScraperBlade{};
    bool placed = false;
    for (int attempt = 0; attempt < sp.retries && !placed; ++attempt) {
      const Vec2 p(uniform(rng, -sp.tool_extent, sp.tool_extent), uniform(rng, -sp.tool_extent, sp.tool_extent));
      bool clear = true;
      for (const auto& o : centers) clear = clear && (p - o).norm() >= sp.tool_clearance;
      if (!clear) continue;
      tool.q[kX] = p.x();
      tool.q[kZ] = p.y();
      placed = true;
    }
    require(placed, ErrorKind::config, "tool placement failed after bounded retries");
    tool.q[kPsi] = uniform(rng, -kPi, kPi);
  }

  void spawn_spreading(Rng& rng) {
    auto& ps = world_.particles;
    ps = spawn_cluster(Vec2::Zero(), cluster_count(), task_.material, spacing(), rng(),
                       task_.effective_radius(), solver_.table_half_extent);
    attach_springs();
    auto& tool = world_.tool;
    tool.geometry = ScraperBlade{};
    const double ang = uniform(rng, -kPi, kPi);
    const double d = task_.spawn.spread_tool_distance;
    tool.q[kX] = d * std::sin(ang);
    tool.q[kZ] = d * std::cos(ang);
    tool.q[kPsi] = std::atan2(-tool.q[kX], -tool.q[kZ]);
  }

  void spawn_flipping() {
    auto& tool = world_.tool;
    tool.geometry = Pan{};
    tool.q[kY] = task_.spawn.pan_height;
    world_.particles = spawn_disk(Vec3(0.0, task_.spawn.pan_height, 0.0), cluster_count(), 2,
                                  task_.material, spacing(), task_.effective_radius());
    attach_springs();
  }

  TaskConfig task_;
  SolverConfig solver_;
  WorldState world_;
  int steps_ = 0;
  double tilt_target_ = 0.0;
  bool started_ = false;
};

}  // namespace amorph
