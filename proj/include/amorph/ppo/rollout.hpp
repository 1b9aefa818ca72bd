#pragma once

#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "amorph/error.hpp"
#include "amorph/nn/gaussian.hpp"
#include "amorph/nn/policy.hpp"
#include "amorph/ppo/loss.hpp"
#include "amorph/rng.hpp"
#include "amorph/tasks/env.hpp"

namespace amorph {

// A persistent environment with its own noise stream. Episodes continue
// across collection calls and reset automatically when done.
struct EnvSlot {
  Env env;
  Observation obs;
  Rng rng;
  double episode_return = 0.0;
  double episode_peak = 0.0;  // running max of d_ymin (flipping metric)

  EnvSlot(const TaskConfig& task, const SolverConfig& solver, std::uint64_t seed) : env(task, solver), rng(seed) {}

  void restart() {
    obs = env.reset(rng());
    episode_return = 0.0;
    episode_peak = env.info().d_ymin;
  }

  nlohmann::json save_state() const {
    return {{"env", env.save_state()}, {"rng", rng_state(rng)}, {"episode_return", episode_return},
            {"episode_peak", episode_peak}};
  }

  void load_state(const nlohmann::json& j) {
    env.load_state(j.at("env"));
    set_rng_state(rng, j.at("rng").get<std::string>());
    episode_return = j.at("episode_return").get<double>();
    episode_peak = j.at("episode_peak").get<double>();
    obs = env.observe();
  }
};

inline std::vector<EnvSlot> make_env_slots(const TaskConfig& task, const SolverConfig& solver, int n_envs,
                                           std::uint64_t master_seed) {
  require(n_envs >= 1, ErrorKind::config, "n_envs must be >= 1");
  std::vector<EnvSlot> slots;
  slots.reserve(n_envs);
  for (int k = 0; k < n_envs; ++k) {
    slots.emplace_back(task, solver, derive_seed(master_seed, 1000 + static_cast<std::uint64_t>(k)));
    slots.back().restart();
  }
  return slots;
}

struct EnvSegment {
  std::vector<Sample> samples;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  double bootstrap = 0.0;
  std::vector<double> episode_returns;
  std::vector<double> episode_metrics;
  std::vector<std::string> events;
  int divergences = 0;
};

struct RolloutBatch {
  std::vector<EnvSegment> segments;  // one per env, in env order

  std::size_t samples() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.samples.size();
    return n;
  }
};

inline double episode_metric(const EnvSlot& slot, const StepInfo& info) {
  switch (slot.env.task().kind) {
    case TaskKind::gathering: return info.far_distance;
    case TaskKind::spreading: return info.occupied_cells;
    case TaskKind::flipping: return slot.episode_peak;
  }
  return 0.0;
}

inline constexpr int kMaxConsecutiveDivergences = 100;

inline void collect_segment(const PolicyParams& params, EnvSlot& slot, int steps, int env_index, EnvSegment& seg) {
  ForwardCache cache;
  int consecutive = 0;
  seg.samples.reserve(steps);
  while (static_cast<int>(seg.samples.size()) < steps) {
    const PolicyOutput out = forward(params, slot.obs, cache);
    SampledAction sa = sample_action(out.mean, out.log_std, slot.rng);
    StepResult r;
    try {
      r = slot.env.step(sa.action);
    } catch (const SimulationDiverged& e) {
      seg.events.push_back("env " + std::to_string(env_index) + " diverged at step " +
                           std::to_string(e.step_index()) + ": " + e.what());
      ++seg.divergences;
      if (++consecutive > kMaxConsecutiveDivergences)
        fail(ErrorKind::simulation_diverged, "environment " + std::to_string(env_index) + " keeps diverging");
      if (!seg.dones.empty()) seg.dones.back() = 1;
      slot.restart();
      continue;
    }
    consecutive = 0;
    Sample s;
    s.obs = std::move(slot.obs);
    s.action = std::move(sa.action);
    s.log_prob_old = sa.log_prob;
    s.mean_old = out.mean;
    s.log_std_old = out.log_std;
    s.value_old = out.value;
    seg.samples.push_back(std::move(s));
    seg.rewards.push_back(r.reward);
    seg.dones.push_back(r.done ? 1 : 0);
    slot.episode_return += r.reward;
    slot.episode_peak = std::max(slot.episode_peak, r.info.d_ymin);
    if (r.done) {
      seg.episode_returns.push_back(slot.episode_return);
      seg.episode_metrics.push_back(episode_metric(slot, r.info));
      slot.restart();
    } else {
      slot.obs = std::move(r.observation);
    }
  }
  seg.bootstrap = seg.dones.back() ? 0.0 : forward(params, slot.obs, cache).value;
}

// The policy is read-only here. Results are identical for any thread count.
inline RolloutBatch collect_rollouts(const PolicyParams& params, std::vector<EnvSlot>& slots, int steps_per_env,
                                     int threads = 1) {
  require(steps_per_env >= 1, ErrorKind::config, "steps_per_env must be >= 1");
  RolloutBatch batch;
  batch.segments.resize(slots.size());
  const int n = static_cast<int>(slots.size());
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int k = 0; k < n; ++k) collect_segment(params, slots[k], steps_per_env, k, batch.segments[k]);
    return batch;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int k = w; k < n; k += workers) collect_segment(params, slots[k], steps_per_env, k, batch.segments[k]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return batch;
}

}  // namespace amorph
