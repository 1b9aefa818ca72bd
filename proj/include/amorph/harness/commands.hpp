#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amorph/error.hpp"
#include "amorph/harness/metrics.hpp"
#include "amorph/harness/run_config.hpp"
#include "amorph/nn/checkpoint.hpp"
#include "amorph/nn/policy.hpp"
#include "amorph/observe/pgm.hpp"
#include "amorph/ppo/trainer.hpp"
#include "amorph/tasks/env.hpp"
#include "amorph/tasks/evaluate.hpp"

namespace amorph {

inline constexpr const char* kAmorphVersion = "0.1.0";

namespace cmd_detail {

namespace fs = std::filesystem;

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::io, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string numbered(const std::string& stem, int k, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d", k);
  return stem + buf + ext;
}

inline std::string resolved_config_text(const RunConfig& cfg) {
  return std::string("# amorph ") + kAmorphVersion + "\n" + serialize_run_config(cfg);
}

// Lower is better for the gathering distance; higher for the others.
inline bool improves(TaskKind kind, double candidate, const std::optional<double>& best) {
  if (!std::isfinite(candidate)) return false;
  if (!best) return true;
  return kind == TaskKind::gathering ? candidate < *best : candidate > *best;
}

inline void write_observation_frames(const Observation& obs, const std::string& stem) {
  for (int c = 0; c < obs.channels; ++c)
    write_file(stem + "_c" + std::to_string(c) + ".pgm", encode_pgm(obs.channel(c), obs.n, obs.n));
}

inline void write_scatter(const WorldState& w, double extent, const std::string& path) {
  constexpr int kSize = 256;
  const auto img = scatter_raster(w.particles.positions, w.particles.radius, extent, kSize);
  write_file(path, encode_pgm(img, kSize, kSize));
}

}  // namespace cmd_detail

// Trains until train.iterations. With `resume`, continues from the run
// directory's saved state when one exists.
inline int cmd_train(const RunConfig& cfg, bool resume = false, std::ostream& log = std::cout) {
  using namespace cmd_detail;
  cfg.validate();
  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "checkpoints");
  const std::string config_path = (out / "config.txt").string();
  const std::string state_path = (out / "state.json").string();
  const std::string metrics_path = (out / "metrics.jsonl").string();
  const std::string config_text = resolved_config_text(cfg);

  TrainState st = make_train_state(cfg.task, cfg.solver, cfg.train);
  std::optional<double> best;
  const bool resuming = resume && fs::exists(state_path);
  if (resuming) {
    // The iteration budget may grow on resume; everything else must match.
    auto budget_free = [](RunConfig c) {
      c.train.iterations = 1;
      return serialize_run_config(c);
    };
    const RunConfig saved = parse_run_config(read_text(config_path));
    require(budget_free(saved) == budget_free(cfg), ErrorKind::config, "resume config differs from " + config_path);
    write_file(config_path, config_text);
    const auto j = nlohmann::json::parse(read_text(state_path));
    load_train_state(st, j.at("train"));
    if (!j.at("best").is_null()) best = j.at("best").get<double>();
    // Drop records written after the saved state.
    std::vector<nlohmann::json> kept;
    if (fs::exists(metrics_path))
      for (auto& r : read_jsonl(metrics_path))
        if (r.at("iteration").get<int>() <= st.iteration) kept.push_back(std::move(r));
    MetricsWriter rewrite(metrics_path);
    for (const auto& r : kept) rewrite.write(r);
    log << "resumed at iteration " << st.iteration << "\n";
  } else {
    write_file(config_path, config_text);
    MetricsWriter truncate(metrics_path);
  }
  MetricsWriter metrics(metrics_path, true);

  auto save_state = [&] {
    nlohmann::json j = {{"train", save_train_state(st)}, {"best", best ? nlohmann::json(*best) : nlohmann::json()}};
    write_file(state_path, j.dump());
    save_checkpoint((out / "checkpoints" / "final.bin").string(), st.params);
  };

  while (st.iteration < cfg.train.iterations) {
    const IterationReport rep = train_iteration(st, cfg.train);
    nlohmann::json rec = to_json(rep);
    rec["task"] = std::string(to_string(cfg.task.kind));
    rec["obs_frame"] = cfg.task.frame == Frame::tool ? "tool" : "world";
    rec["seed"] = cfg.train.seed;
    metrics.write(rec);
    log << "iter " << rep.iteration << " return " << rep.mean_return << " metric " << rep.task_metric << " kl "
        << rep.kl << " beta " << rep.beta << (rep.aborted ? " (aborted: " + rep.abort_reason + ")" : "") << "\n";
    for (const auto& e : rep.events) log << "  " << e << "\n";
    log.flush();
    if (improves(cfg.task.kind, rep.task_metric, best)) {
      best = rep.task_metric;
      save_checkpoint((out / "checkpoints" / "best.bin").string(), st.params);
    }
    if (st.iteration % cfg.checkpoint_every == 0) {
      save_checkpoint((out / "checkpoints" / numbered("iter_", st.iteration, ".bin")).string(), st.params);
      save_state();
    }
    if (cfg.frame_every > 0 && st.iteration % cfg.frame_every == 0) {
      fs::create_directories(out / "frames");
      write_observation_frames(st.slots.front().obs, (out / "frames" / numbered("iter_", st.iteration, "")).string());
    }
  }
  save_state();
  return 0;
}

inline ActionFn mean_policy(const PolicyParams& params) {
  return [&params](const Observation& obs, Rng&) { return forward(params, obs).mean; };
}

// Evaluates a checkpoint, or uniform random actions when `checkpoint` is
// "random". Writes one record per rollout and a summary record.
inline EvalMetrics cmd_eval(const RunConfig& cfg, const std::string& checkpoint, int n_rollouts, std::uint64_t seed,
                            const std::string& out_path) {
  cfg.validate();
  EvalMetrics m;
  if (checkpoint == "random") {
    m = evaluate_policy(random_policy(cfg.task), cfg.task, cfg.solver, n_rollouts, seed);
  } else {
    const PolicyParams params = load_checkpoint(checkpoint, net_shape_for(cfg.task));
    m = evaluate_policy(mean_policy(params), cfg.task, cfg.solver, n_rollouts, seed);
  }
  const auto parent = std::filesystem::path(out_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  MetricsWriter w(out_path);
  const nlohmann::json summary = to_json(m);
  for (const auto& r : summary.at("rollouts")) {
    nlohmann::json rec = r;
    rec["type"] = "rollout";
    rec["task"] = summary.at("task");
    rec["resolution"] = cfg.task.resolution_multiplier;
    rec["particles"] = cfg.task.total_particles();
    w.write(rec);
  }
  nlohmann::json s = summary;
  s.erase("rollouts");
  s["type"] = "summary";
  s["resolution"] = cfg.task.resolution_multiplier;
  s["particles"] = cfg.task.total_particles();
  s["checkpoint"] = checkpoint;
  s["seed"] = seed;
  w.write(s);
  return m;
}

struct ReplaySummary {
  int steps = 0;
  int frames = 0;
  double total_reward = 0.0;
};

// Re-simulates from `source`: a checkpoint (mean actions for a full horizon)
// or an action log (.jsonl). Writes observation and scatter frames for the
// initial state and every step, plus a fresh action log. Logged rewards must
// reproduce bit-exactly.
inline ReplaySummary cmd_replay(const RunConfig& cfg, const std::string& source, std::uint64_t seed,
                                const std::string& out_dir) {
  using namespace cmd_detail;
  cfg.validate();
  const fs::path out(out_dir);
  fs::create_directories(out / "frames");

  std::vector<nlohmann::json> logged;
  std::optional<PolicyParams> params;
  const bool from_log = fs::path(source).extension() == ".jsonl";
  if (from_log) {
    for (auto& r : read_jsonl(source)) {
      if (r.value("type", "") == "header")
        seed = r.at("seed").get<std::uint64_t>();
      else
        logged.push_back(std::move(r));
    }
  } else {
    params = load_checkpoint(source, net_shape_for(cfg.task));
  }

  Env env(cfg.task, cfg.solver);
  Observation obs = env.reset(seed);
  MetricsWriter actions((out / "actions.jsonl").string());
  actions.write({{"type", "header"}, {"seed", seed}, {"task", std::string(to_string(cfg.task.kind))}});
  ReplaySummary sum;
  auto frame = [&](int t) {
    write_observation_frames(obs, (out / "frames" / numbered("step_", t, "")).string());
    write_scatter(env.world(), cfg.solver.table_half_extent, (out / "frames" / numbered("scatter_", t, ".pgm")).string());
    ++sum.frames;
  };
  frame(0);
  const int steps = from_log ? static_cast<int>(logged.size()) : cfg.task.horizon;
  for (int t = 0; t < steps; ++t) {
    std::vector<double> a;
    if (from_log) {
      require(logged[t].at("step").get<int>() == t, ErrorKind::replay_mismatch,
              "action log out of order at step " + std::to_string(t));
      a = logged[t].at("action").get<std::vector<double>>();
    } else {
      a = forward(*params, obs).mean;
    }
    StepResult r;
    try {
      r = env.step(a);
    } catch (const Error& e) {
      if (from_log) fail(ErrorKind::replay_mismatch, "step " + std::to_string(t) + ": " + e.what());
      throw;
    }
    if (from_log && logged[t].contains("reward")) {
      const double want = logged[t].at("reward").get<double>();
      if (!(want == r.reward))
        fail(ErrorKind::replay_mismatch, "step " + std::to_string(t) + ": logged reward " + format_double(want) +
                                             " but replay gives " + format_double(r.reward));
    }
    actions.write({{"type", "step"}, {"step", t}, {"action", a}, {"reward", r.reward}, {"done", r.done}});
    sum.total_reward += r.reward;
    ++sum.steps;
    obs = std::move(r.observation);
    frame(t + 1);
    if (r.done && !from_log) break;
  }
  return sum;
}

// Dumps the reset observation for inspection.
inline int cmd_render_obs(const RunConfig& cfg, std::uint64_t seed, const std::string& out_dir) {
  using namespace cmd_detail;
  cfg.validate();
  fs::create_directories(out_dir);
  Env env(cfg.task, cfg.solver);
  const Observation obs = env.reset(seed);
  write_observation_frames(obs, (fs::path(out_dir) / "obs").string());
  write_scatter(env.world(), cfg.solver.table_half_extent, (fs::path(out_dir) / "scatter.pgm").string());
  nlohmann::json j = {{"n", obs.n},          {"channels", obs.channels}, {"frame", cfg.task.frame == Frame::tool ? "tool" : "world"},
                      {"images", obs.images}, {"tool_vec", obs.tool_vec}, {"extra_vec", obs.extra_vec}};
  write_file((fs::path(out_dir) / "obs.json").string(), j.dump());
  return 0;
}

}  // namespace amorph
