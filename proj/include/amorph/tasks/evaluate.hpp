#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "amorph/error.hpp"
#include "amorph/rng.hpp"
#include "amorph/tasks/env.hpp"

namespace amorph {

using ActionFn = std::function<std::vector<double>(const Observation&, Rng&)>;

struct RolloutMetrics {
  std::uint64_t seed = 0;
  double episode_return = 0.0;
  int steps = 0;
  double far_distance = 0.0;  // gathering: final farthest particle to goal
  int occupied_cells = 0;     // spreading: final occupied cells
  double max_d_ymin = 0.0;    // flipping: highest airborne clearance
  double rotation = 0.0;      // flipping: accumulated |omega| dt
  double metric = 0.0;        // the task's headline value
};

struct EvalMetrics {
  TaskKind kind = TaskKind::gathering;
  std::vector<RolloutMetrics> rollouts;
  double mean_metric = 0.0;
  double mean_return = 0.0;
  double mean_far_distance = 0.0;
  double mean_occupied_cells = 0.0;
  double mean_max_d_ymin = 0.0;
  double mean_rotation = 0.0;
};

inline const char* metric_name(TaskKind k) {
  switch (k) {
    case TaskKind::gathering: return "far_distance";
    case TaskKind::spreading: return "occupied_cells";
    case TaskKind::flipping: return "max_d_ymin";
  }
  return "";
}

inline RolloutMetrics run_rollout(Env& env, const ActionFn& act, std::uint64_t seed) {
  RolloutMetrics m;
  m.seed = seed;
  Observation obs = env.reset(seed);
  Rng rng(derive_seed(seed, 0xac7));
  const double dt = env.solver().dt;
  StepInfo info = env.info();
  m.max_d_ymin = info.d_ymin;
  for (int t = 0; t < env.task().horizon; ++t) {
    const auto a = act(obs, rng);
    StepResult r = env.step(a);
    m.episode_return += r.reward;
    ++m.steps;
    info = r.info;
    m.max_d_ymin = std::max(m.max_d_ymin, info.d_ymin);
    m.rotation += info.omega.norm() * dt;
    obs = std::move(r.observation);
    if (r.done) break;
  }
  m.far_distance = info.far_distance;
  m.occupied_cells = info.occupied_cells;
  switch (env.task().kind) {
    case TaskKind::gathering: m.metric = m.far_distance; break;
    case TaskKind::spreading: m.metric = m.occupied_cells; break;
    case TaskKind::flipping: m.metric = m.max_d_ymin; break;
  }
  return m;
}

// Rollout i starts from reset seed derive_seed(seed, i).
inline EvalMetrics evaluate_policy(const ActionFn& act, const TaskConfig& task, const SolverConfig& solver,
                                   int n_rollouts, std::uint64_t seed) {
  require(n_rollouts >= 1, ErrorKind::config, "n_rollouts must be >= 1");
  EvalMetrics out;
  out.kind = task.kind;
  Env env(task, solver);
  for (int i = 0; i < n_rollouts; ++i) out.rollouts.push_back(run_rollout(env, act, derive_seed(seed, i)));
  const double n = n_rollouts;
  for (const auto& r : out.rollouts) {
    out.mean_metric += r.metric / n;
    out.mean_return += r.episode_return / n;
    out.mean_far_distance += r.far_distance / n;
    out.mean_occupied_cells += r.occupied_cells / n;
    out.mean_max_d_ymin += r.max_d_ymin / n;
    out.mean_rotation += r.rotation / n;
  }
  return out;
}

// Uniform actions within the task's action bounds.
inline ActionFn random_policy(const TaskConfig& task) {
  const int dim = action_dim(task.kind);
  const double pb = task.action_pos_bound, ab = task.action_ang_bound;
  return [dim, pb, ab](const Observation&, Rng& rng) {
    std::vector<double> a(dim);
    for (int k = 0; k < dim; ++k) {
      const double b = k + 1 == dim ? ab : pb;
      a[k] = uniform(rng, -b, b);
    }
    return a;
  };
}

inline nlohmann::json to_json(const RolloutMetrics& m) {
  return {{"seed", m.seed},
          {"return", m.episode_return},
          {"steps", m.steps},
          {"far_distance", m.far_distance},
          {"occupied_cells", m.occupied_cells},
          {"max_d_ymin", m.max_d_ymin},
          {"rotation", m.rotation},
          {"metric", m.metric}};
}

inline nlohmann::json to_json(const EvalMetrics& e) {
  nlohmann::json j = {{"task", to_string(e.kind)},
                      {"metric_name", metric_name(e.kind)},
                      {"n_rollouts", e.rollouts.size()},
                      {"mean_metric", e.mean_metric},
                      {"mean_return", e.mean_return},
                      {"mean_far_distance", e.mean_far_distance},
                      {"mean_occupied_cells", e.mean_occupied_cells},
                      {"mean_max_d_ymin", e.mean_max_d_ymin},
                      {"mean_rotation", e.mean_rotation}};
  j["rollouts"] = nlohmann::json::array();
  for (const auto& r : e.rollouts) j["rollouts"].push_back(to_json(r));
  return j;
}

}  // namespace amorph
