#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/ppo/trainer.hpp"
#include "amorph/sim/world.hpp"
#include "amorph/tasks/task_config.hpp"

namespace amorph {

struct RunConfig {
  TaskConfig task = TaskConfig::defaults(TaskKind::gathering);
  SolverConfig solver;
  TrainConfig train;
  std::string out_dir = "runs/default";
  int checkpoint_every = 10;
  int frame_every = 0;  // iterations between observation dumps, 0 disables
  int eval_rollouts = 49;

  void validate() const {
    task.validate();
    solver.validate();
    train.validate();
    require(checkpoint_every >= 1, ErrorKind::config, "run.checkpoint_every must be >= 1");
    require(frame_every >= 0, ErrorKind::config, "run.frame_every must be >= 0");
    require(eval_rollouts >= 1, ErrorKind::config, "run.eval_rollouts must be >= 1");
  }
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace config_detail {

inline double parse_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    fail(ErrorKind::config, key + ": expected a number, got '" + v + "'");
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    fail(ErrorKind::config, key + ": expected an integer, got '" + v + "'");
  return i;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long i = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || end != v.c_str() + v.size() || errno == ERANGE)
    fail(ErrorKind::config, key + ": expected a non-negative integer, got '" + v + "'");
  return i;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorKind::config, key + ": expected true or false, got '" + v + "'");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace config_detail

struct ConfigKey {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

namespace config_detail {

template <class F>
ConfigKey real(std::string key, F ref) {
  return {key, [ref](const RunConfig& c) { return format_double(ref(c)); },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = parse_double(key, v); }};
}

template <class F>
ConfigKey integer(std::string key, F ref) {
  return {key, [ref](const RunConfig& c) { return std::to_string(ref(c)); },
          [ref, key](RunConfig& c, const std::string& v) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(parse_int(key, v));
          }};
}

template <class F>
ConfigKey flag(std::string key, F ref) {
  return {key, [ref](const RunConfig& c) { return std::string(ref(c) ? "true" : "false"); },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); }};
}

template <class F>
ConfigKey gain(std::string key, F ref) {
  return {key, [ref](const RunConfig& c) { return format_double(ref(c)[0]); },
          [ref, key](RunConfig& c, const std::string& v) { ref(c).fill(parse_double(key, v)); }};
}

}  // namespace config_detail

#define AMORPH_REF(expr) [](auto& c) -> auto& { return c.expr; }

// Every accepted key. Anything else is rejected.
inline const std::vector<ConfigKey>& config_keys() {
  using namespace config_detail;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back({"task.kind", [](const RunConfig& c) { return std::string(to_string(c.task.kind)); },
                 [](RunConfig& c, const std::string& v) { c.task.kind = task_kind_from_string(v); }});
    k.push_back({"task.material", [](const RunConfig& c) { return std::string(to_string(c.task.material)); },
                 [](RunConfig& c, const std::string& v) { c.task.material = material_from_string(v); }});
    k.push_back({"task.obs_frame",
                 [](const RunConfig& c) { return std::string(c.task.frame == Frame::tool ? "tool" : "world"); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "tool")
                     c.task.frame = Frame::tool;
                   else if (v == "world")
                     c.task.frame = Frame::world;
                   else
                     fail(ErrorKind::config, "task.obs_frame: expected tool or world, got '" + v + "'");
                 }});
    k.push_back(integer("task.particle_count", AMORPH_REF(task.particle_count)));
    k.push_back(integer("task.horizon", AMORPH_REF(task.horizon)));
    k.push_back(integer("task.curriculum_level", AMORPH_REF(task.curriculum_level)));
    k.push_back(real("task.goal_x", AMORPH_REF(task.goal.x())));
    k.push_back(real("task.goal_z", AMORPH_REF(task.goal.y())));
    k.push_back(real("task.particle_radius", AMORPH_REF(task.particle_radius)));
    k.push_back(real("task.spacing_factor", AMORPH_REF(task.spacing_factor)));
    k.push_back(integer("task.resolution", AMORPH_REF(task.resolution_multiplier)));
    k.push_back(real("task.action_pos_bound", AMORPH_REF(task.action_pos_bound)));
    k.push_back(real("task.action_ang_bound", AMORPH_REF(task.action_ang_bound)));
    k.push_back(real("task.tilt_angle", AMORPH_REF(task.tilt_angle)));
    k.push_back(real("task.tilt_speed_threshold", AMORPH_REF(task.tilt_speed_threshold)));
    k.push_back(real("task.tool_y_min", AMORPH_REF(task.tool_y_min)));
    k.push_back(real("task.tool_y_max", AMORPH_REF(task.tool_y_max)));
    k.push_back(integer("grid.n", AMORPH_REF(task.grid_n)));
    k.push_back(real("grid.h", AMORPH_REF(task.grid_h)));

    k.push_back(real("reward.gathering.c1", AMORPH_REF(task.gathering.c1)));
    k.push_back(real("reward.gathering.c2", AMORPH_REF(task.gathering.c2)));
    k.push_back(real("reward.gathering.c3", AMORPH_REF(task.gathering.c3)));
    k.push_back(real("reward.gathering.c4", AMORPH_REF(task.gathering.c4)));
    k.push_back(real("reward.gathering.c5", AMORPH_REF(task.gathering.c5)));
    k.push_back(real("reward.gathering.w1", AMORPH_REF(task.gathering.w1)));
    k.push_back(real("reward.gathering.w2", AMORPH_REF(task.gathering.w2)));
    k.push_back(real("reward.gathering.w3", AMORPH_REF(task.gathering.w3)));
    k.push_back(real("reward.gathering.w4", AMORPH_REF(task.gathering.w4)));
    k.push_back(real("reward.gathering.d_thr_cap", AMORPH_REF(task.gathering.d_thr_cap)));
    k.push_back(real("reward.spreading.w1", AMORPH_REF(task.spreading.w1)));
    k.push_back(real("reward.spreading.w2", AMORPH_REF(task.spreading.w2)));
    k.push_back(real("reward.spreading.w3", AMORPH_REF(task.spreading.w3)));
    k.push_back(real("reward.spreading.w4", AMORPH_REF(task.spreading.w4)));
    k.push_back(real("reward.spreading.c_min", AMORPH_REF(task.spreading.c_min)));
    k.push_back(real("reward.spreading.c_rad", AMORPH_REF(task.spreading.c_rad)));
    k.push_back(real("reward.spreading.k", AMORPH_REF(task.spreading.k)));
    k.push_back(real("reward.flipping.w_h", AMORPH_REF(task.flipping.w_h)));
    k.push_back(real("reward.flipping.w_av", AMORPH_REF(task.flipping.w_av)));
    k.push_back(real("reward.flipping.w1", AMORPH_REF(task.flipping.w1)));
    k.push_back(real("reward.flipping.w2", AMORPH_REF(task.flipping.w2)));
    k.push_back(real("reward.flipping.w3", AMORPH_REF(task.flipping.w3)));
    k.push_back(real("reward.flipping.c1", AMORPH_REF(task.flipping.c1)));
    k.push_back(real("reward.flipping.c2", AMORPH_REF(task.flipping.c2)));
    k.push_back(real("reward.flipping.c_wmin", AMORPH_REF(task.flipping.c_wmin)));
    k.push_back(real("reward.flipping.c_wmax", AMORPH_REF(task.flipping.c_wmax)));

    k.push_back(flag("ablate.gathering.r_tool", AMORPH_REF(task.gathering_ablation.r_tool)));
    k.push_back(flag("ablate.gathering.movement", AMORPH_REF(task.gathering_ablation.movement)));
    k.push_back(flag("ablate.gathering.indicator", AMORPH_REF(task.gathering_ablation.indicator)));
    k.push_back(flag("ablate.gathering.progress", AMORPH_REF(task.gathering_ablation.progress)));
    k.push_back(flag("ablate.spreading.r_m", AMORPH_REF(task.spreading_ablation.r_m)));
    k.push_back(flag("ablate.spreading.r_hc", AMORPH_REF(task.spreading_ablation.r_hc)));
    k.push_back(flag("ablate.spreading.r_h", AMORPH_REF(task.spreading_ablation.r_h)));
    k.push_back(flag("ablate.spreading.r_o", AMORPH_REF(task.spreading_ablation.r_o)));
    k.push_back(flag("ablate.flipping.r_h", AMORPH_REF(task.flipping_ablation.r_h)));
    k.push_back(flag("ablate.flipping.r_av", AMORPH_REF(task.flipping_ablation.r_av)));

    k.push_back(flag("curriculum.enabled", AMORPH_REF(task.curriculum.enabled)));
    k.push_back({"curriculum.threshold",
                 [](const RunConfig& c) {
                   return c.task.curriculum.threshold ? format_double(*c.task.curriculum.threshold)
                                                      : std::string("dynamic");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "dynamic")
                     c.task.curriculum.threshold.reset();
                   else
                     c.task.curriculum.threshold = parse_double("curriculum.threshold", v);
                 }});
    k.push_back(real("curriculum.factor", AMORPH_REF(task.curriculum.factor)));
    k.push_back(integer("curriculum.window", AMORPH_REF(task.curriculum.window)));
    k.push_back(integer("curriculum.max_level", AMORPH_REF(task.curriculum.max_level)));

    k.push_back(real("spawn.cluster_extent", AMORPH_REF(task.spawn.cluster_extent)));
    k.push_back(real("spawn.min_goal_distance", AMORPH_REF(task.spawn.min_goal_distance)));
    k.push_back(real("spawn.tool_extent", AMORPH_REF(task.spawn.tool_extent)));
    k.push_back(real("spawn.tool_clearance", AMORPH_REF(task.spawn.tool_clearance)));
    k.push_back(real("spawn.spread_tool_distance", AMORPH_REF(task.spawn.spread_tool_distance)));
    k.push_back(real("spawn.pan_height", AMORPH_REF(task.spawn.pan_height)));
    k.push_back(integer("spawn.retries", AMORPH_REF(task.spawn.retries)));

    k.push_back(real("solver.dt", AMORPH_REF(solver.dt)));
    k.push_back(integer("solver.substeps", AMORPH_REF(solver.substeps)));
    k.push_back(integer("solver.iterations", AMORPH_REF(solver.constraint_iterations)));
    k.push_back(gain("solver.kp", AMORPH_REF(solver.gains.kp)));
    k.push_back(gain("solver.kd", AMORPH_REF(solver.gains.kd)));
    k.push_back(real("solver.friction", AMORPH_REF(solver.friction_coeff)));
    k.push_back(real("solver.gravity_x", AMORPH_REF(solver.gravity.x())));
    k.push_back(real("solver.gravity_y", AMORPH_REF(solver.gravity.y())));
    k.push_back(real("solver.gravity_z", AMORPH_REF(solver.gravity.z())));
    k.push_back(real("solver.penetration_tol", AMORPH_REF(solver.penetration_tol)));
    k.push_back(real("solver.table_half_extent", AMORPH_REF(solver.table_half_extent)));
    k.push_back(real("solver.cohesion_radius_factor", AMORPH_REF(solver.fluid.cohesion_radius_factor)));
    k.push_back(real("solver.cohesion_stiffness", AMORPH_REF(solver.fluid.cohesion_stiffness)));
    k.push_back(real("solver.xsph_viscosity", AMORPH_REF(solver.fluid.xsph_viscosity)));

    k.push_back(real("train.gamma", AMORPH_REF(train.gamma)));
    k.push_back(real("train.lambda", AMORPH_REF(train.lambda)));
    k.push_back(real("train.clip_eps", AMORPH_REF(train.clip_eps)));
    k.push_back(real("train.kl_target", AMORPH_REF(train.kl_target)));
    k.push_back(real("train.beta_init", AMORPH_REF(train.beta_init)));
    k.push_back(real("train.value_coef", AMORPH_REF(train.value_coef)));
    k.push_back(real("train.lr", AMORPH_REF(train.lr)));
    k.push_back(real("train.adam_eps", AMORPH_REF(train.adam_eps)));
    k.push_back(integer("train.samples_per_iter", AMORPH_REF(train.samples_per_iter)));
    k.push_back(integer("train.minibatch", AMORPH_REF(train.minibatch)));
    k.push_back(integer("train.epochs", AMORPH_REF(train.epochs)));
    k.push_back(integer("train.n_envs", AMORPH_REF(train.n_envs)));
    k.push_back(integer("train.iterations", AMORPH_REF(train.iterations)));
    k.push_back(flag("train.normalize_advantages", AMORPH_REF(train.normalize_advantages)));
    k.push_back(integer("train.threads", AMORPH_REF(train.threads)));

    k.push_back({"run.seed", [](const RunConfig& c) { return std::to_string(c.train.seed); },
                 [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64("run.seed", v); }});
    k.push_back({"run.out", [](const RunConfig& c) { return c.out_dir; },
                 [](RunConfig& c, const std::string& v) { c.out_dir = v; }});
    k.push_back(integer("run.checkpoint_every", AMORPH_REF(checkpoint_every)));
    k.push_back(integer("run.frame_every", AMORPH_REF(frame_every)));
    k.push_back(integer("run.eval_rollouts", AMORPH_REF(eval_rollouts)));
    return k;
  }();
  return keys;
}

#undef AMORPH_REF

inline const ConfigKey& find_config_key(const std::string& key) {
  for (const auto& k : config_keys())
    if (k.key == key) return k;
  fail(ErrorKind::config, "unknown config key '" + key + "'");
}

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

inline ConfigEntries parse_config_entries(const std::string& text) {
  ConfigEntries out;
  std::istringstream in(text);
  std::string line;
  std::map<std::string, int> seen;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::config, "line " + std::to_string(lineno) + ": expected 'key = value'");
    const auto key = config_detail::trim(line.substr(0, eq));
    const auto value = config_detail::trim(line.substr(eq + 1));
    if (auto it = seen.find(key); it != seen.end())
      fail(ErrorKind::config, "line " + std::to_string(lineno) + ": key '" + key + "' already set on line " +
                                  std::to_string(it->second));
    seen[key] = lineno;
    out.emplace_back(key, value);
  }
  return out;
}

inline std::pair<std::string, std::string> parse_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) fail(ErrorKind::config, "override '" + kv + "' is not key=value");
  return {config_detail::trim(kv.substr(0, eq)), config_detail::trim(kv.substr(eq + 1))};
}

// Defaults follow task.kind; all other entries then apply in order, with
// overrides last.
inline RunConfig resolve_run_config(const ConfigEntries& entries) {
  for (const auto& [k, v] : entries) find_config_key(k);
  RunConfig c;
  for (const auto& [k, v] : entries)
    if (k == "task.kind") c.task = TaskConfig::defaults(task_kind_from_string(v));
  for (const auto& [k, v] : entries) {
    try {
      find_config_key(k).set(c, v);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::config) throw;
      fail(ErrorKind::config, k + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

inline RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides = {}) {
  ConfigEntries entries = parse_config_entries(text);
  for (const auto& o : overrides) entries.push_back(parse_override(o));
  return resolve_run_config(entries);
}

inline RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorKind::io, "cannot read config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str(), overrides);
}

inline std::string serialize_run_config(const RunConfig& c) {
  std::string out;
  for (const auto& k : config_keys()) out += k.key + " = " + k.get(c) + "\n";
  return out;
}

}  // namespace amorph
