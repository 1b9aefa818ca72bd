#pragma once

#include <cmath>
#include <optional>

#include "amorph/error.hpp"
#include "amorph/observe/observation.hpp"
#include "amorph/sim/particles.hpp"
#include "amorph/tasks/task_kind.hpp"

namespace amorph {

// Reward constants default to the published parameter table.
struct GatheringParams {
  double c1 = 10.0, c2 = 0.03, c3 = 1.0, c4 = 4.0, c5 = 1.0;
  double w1 = 1.0, w2 = 5.0, w3 = 0.01, w4 = 1.0;
  double d_thr_cap = 1.3;
};

struct GatheringAblation {
  bool r_tool = true;
  bool movement = true;
  bool indicator = true;
  bool progress = true;
};

struct SpreadingParams {
  double w1 = 0.1, w2 = 0.1, w3 = 50.0, w4 = 0.001;
  double c_min = 0.2, c_rad = 3.2;
  double k = 1.0;  // penalty factor for movement at or below c_min
};

struct SpreadingAblation {
  bool r_m = true;
  bool r_hc = true;
  bool r_h = true;
  bool r_o = true;
};

struct FlippingParams {
  double w_h = 0.1, w_av = 1.0;
  double w1 = 10.0, w2 = 0.1, w3 = 4.0;
  double c1 = 0.1, c2 = 0.5;
  double c_wmin = -1.0, c_wmax = 1.0;
};

struct FlippingAblation {
  bool r_h = true;
  bool r_av = true;
};

struct CurriculumConfig {
  bool enabled = false;
  std::optional<double> threshold;  // fixed return threshold; dynamic when empty
  double factor = 0.7;              // dynamic threshold = factor * best recent return
  int window = 20;                  // iterations at a level before the dynamic rule engages
  int max_level = 4;
};

struct SpawnConfig {
  double cluster_extent = 3.0;     // cluster centers drawn in [-e, e]^2
  double min_goal_distance = 1.5;  // cluster center to goal
  double tool_extent = 3.0;        // gathering tool start drawn in [-e, e]^2
  double tool_clearance = 1.0;     // gathering tool start to any cluster center
  double spread_tool_distance = 1.5;
  double pan_height = 0.5;
  int retries = 1000;
};

inline int resolution_count_factor(int multiplier) {
  switch (multiplier) {
    case 1: return 1;
    case 2: return 8;
    case 4: return 27;
  }
  fail(ErrorKind::config, "resolution multiplier must be 1, 2 or 4");
}

struct TaskConfig {
  TaskKind kind = TaskKind::gathering;
  Material material = Material::visco_plastic;
  int particle_count = 50;  // per cluster, at resolution multiplier 1
  int horizon = 300;
  Frame frame = Frame::tool;
  int curriculum_level = 1;
  Vec2 goal{0.0, 0.0};  // (x, z) on the table
  double particle_radius = 0.1;
  double spacing_factor = 1.02;  // lattice spacing in particle diameters
  int resolution_multiplier = 1;
  double action_pos_bound = 0.5;
  double action_ang_bound = 0.5;
  double tilt_angle = 15.0 * kPi / 180.0;
  double tilt_speed_threshold = 0.05;
  double tool_y_min = 0.0;
  double tool_y_max = 2.0;
  int grid_n = 32;
  double grid_h = 0.25;

  GatheringParams gathering;
  GatheringAblation gathering_ablation;
  SpreadingParams spreading;
  SpreadingAblation spreading_ablation;
  FlippingParams flipping;
  FlippingAblation flipping_ablation;
  CurriculumConfig curriculum;
  SpawnConfig spawn;

  static TaskConfig defaults(TaskKind kind) {
    TaskConfig c;
    c.kind = kind;
    switch (kind) {
      case TaskKind::gathering:
        break;
      case TaskKind::spreading:
        c.particle_count = 180;
        break;
      case TaskKind::flipping:
        c.material = Material::elastic;
        c.particle_count = 42;
        c.horizon = 150;
        break;
    }
    return c;
  }

  double effective_radius() const { return particle_radius / resolution_multiplier; }

  int clusters() const { return kind == TaskKind::gathering ? curriculum_level : 1; }

  int total_particles() const {
    return clusters() * particle_count * resolution_count_factor(resolution_multiplier);
  }

  std::array<bool, kPoseDim> dof_mask() const {
    switch (kind) {
      case TaskKind::gathering: return {true, false, true, false, true, false};
      case TaskKind::spreading: return {true, true, true, true, true, false};
      case TaskKind::flipping: return {true, true, true, true, false, false};
    }
    return {};
  }

  ObservationLayout layout() const {
    ObservationLayout l;
    l.kind = kind;
    l.frame = frame;
    l.n = grid_n;
    l.h = grid_h;
    l.goal = Vec3(goal.x(), 0.0, goal.y());
    l.goal_radius = gathering.c3;
    return l;
  }

  int tool_dim() const { return tool_observation_size(dof_mask()); }

  void validate() const {
    require(horizon >= 1, ErrorKind::config, "task.horizon must be >= 1");
    require(particle_count >= 1, ErrorKind::config, "task.particle_count must be >= 1");
    if (kind == TaskKind::gathering)
      require(curriculum_level >= 1 && curriculum_level <= curriculum.max_level, ErrorKind::config,
              "task.curriculum_level must be in [1, 4]");
    require(curriculum.max_level >= 1 && curriculum.max_level <= 4, ErrorKind::config,
            "curriculum.max_level must be in [1, 4]");
    require(particle_radius > 0.0 && spacing_factor >= 0.9, ErrorKind::config,
            "particle radius/spacing invalid");
    resolution_count_factor(resolution_multiplier);
    require(action_pos_bound > 0.0 && action_ang_bound > 0.0, ErrorKind::config,
            "action bounds must be positive");
    require(grid_n >= 4 && grid_n % 4 == 0 && grid_h > 0.0, ErrorKind::config,
            "grid.n must be a positive multiple of 4 and grid.h positive");
    const double all[] = {gathering.c1, gathering.c2, gathering.c3, gathering.c4, gathering.c5,
                          gathering.w1, gathering.w2, gathering.w3, gathering.w4, gathering.d_thr_cap,
                          spreading.w1, spreading.w2, spreading.w3, spreading.w4, spreading.c_min,
                          spreading.c_rad, spreading.k, flipping.w_h, flipping.w_av, flipping.w1,
                          flipping.w2, flipping.w3, flipping.c1, flipping.c2, flipping.c_wmin,
                          flipping.c_wmax};
    for (double v : all) require(std::isfinite(v), ErrorKind::config, "reward constants must be finite");
    require(std::abs(goal.x()) <= 4.0 && std::abs(goal.y()) <= 4.0, ErrorKind::config,
            "goal must lie on the table");
  }
};

}  // namespace amorph
