#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amorph/error.hpp"
#include "amorph/nn/policy.hpp"
#include "amorph/ppo/adam.hpp"
#include "amorph/ppo/gae.hpp"
#include "amorph/ppo/loss.hpp"
#include "amorph/ppo/rollout.hpp"
#include "amorph/rng.hpp"
#include "amorph/tasks/env.hpp"

namespace amorph {

struct TrainConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double kl_target = 0.01;
  double beta_init = 1.0;
  double value_coef = 0.5;
  double lr = 3e-4;
  double adam_eps = 1e-8;
  int samples_per_iter = 49000;
  int minibatch = 64;
  int epochs = 10;
  int n_envs = 49;
  int iterations = 100;
  bool normalize_advantages = true;
  int threads = 1;
  std::uint64_t seed = 0;

  int steps_per_env() const { return (samples_per_iter + n_envs - 1) / n_envs; }

  void validate() const {
    require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::config, "train.gamma must lie in [0, 1]");
    require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::config, "train.lambda must lie in [0, 1]");
    require(clip_eps > 0.0, ErrorKind::config, "train.clip_eps must be > 0");
    require(beta_init > 0.0, ErrorKind::config, "train.beta_init must be > 0");
    require(kl_target > 0.0, ErrorKind::config, "train.kl_target must be > 0");
    require(lr >= 0.0 && adam_eps > 0.0, ErrorKind::config, "train.lr must be >= 0 and train.adam_eps > 0");
    require(value_coef >= 0.0, ErrorKind::config, "train.value_coef must be >= 0");
    require(n_envs >= 1, ErrorKind::config, "train.n_envs must be >= 1");
    require(samples_per_iter >= 1 && minibatch >= 1 && epochs >= 1, ErrorKind::config,
            "train.samples_per_iter, train.minibatch and train.epochs must be >= 1");
    require(iterations >= 0 && threads >= 1, ErrorKind::config, "train.iterations >= 0, train.threads >= 1");
  }
};

inline NetShape net_shape_for(const TaskConfig& t) {
  return NetShape{t.grid_n, image_channels(t.kind), t.tool_dim(), extra_dim(t.kind), action_dim(t.kind)};
}

struct TrainState {
  TaskConfig task;
  SolverConfig solver;
  PolicyParams params;
  AdamState adam;
  double beta = 1.0;
  int iteration = 0;
  CurriculumTracker curriculum;
  Rng rng;  // minibatch shuffling
  std::vector<EnvSlot> slots;
};

inline TrainState make_train_state(const TaskConfig& task, const SolverConfig& solver, const TrainConfig& cfg) {
  task.validate();
  solver.validate();
  cfg.validate();
  TrainState s{task, solver, PolicyParams(), AdamState(), cfg.beta_init, 0, CurriculumTracker(task.curriculum, task.curriculum_level),
               Rng(derive_seed(cfg.seed, 2)), {}};
  Rng init(derive_seed(cfg.seed, 1));
  s.params = PolicyParams::initialized(net_shape_for(task), init);
  s.adam = AdamState(s.params.size());
  s.slots = make_env_slots(task, solver, cfg.n_envs, cfg.seed);
  return s;
}

struct IterationReport {
  int iteration = 0;
  std::size_t samples = 0;
  int episodes = 0;
  double mean_return = std::numeric_limits<double>::quiet_NaN();
  double mean_step_reward = 0.0;
  double task_metric = std::numeric_limits<double>::quiet_NaN();
  double kl = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double total_loss = 0.0;
  double clip_fraction = 0.0;
  double beta = 0.0;
  int curriculum_level = 1;
  int divergences = 0;
  bool aborted = false;
  std::string abort_reason;
  std::vector<std::string> events;
};

inline nlohmann::json to_json(const IterationReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"iteration", r.iteration},
          {"samples", r.samples},
          {"episodes", r.episodes},
          {"mean_return", num(r.mean_return)},
          {"mean_step_reward", num(r.mean_step_reward)},
          {"task_metric", num(r.task_metric)},
          {"kl", num(r.kl)},
          {"surrogate", num(r.surrogate)},
          {"value_loss", num(r.value_loss)},
          {"total_loss", num(r.total_loss)},
          {"clip_fraction", num(r.clip_fraction)},
          {"beta", r.beta},
          {"curriculum_level", r.curriculum_level},
          {"divergences", r.divergences},
          {"aborted", r.aborted},
          {"abort_reason", r.abort_reason},
          {"events", r.events}};
}

inline void normalize_advantages(std::vector<Sample*>& all) {
  if (all.size() < 2) return;
  double mean = 0.0;
  for (const auto* s : all) mean += s->advantage;
  mean /= static_cast<double>(all.size());
  double var = 0.0;
  for (const auto* s : all) var += (s->advantage - mean) * (s->advantage - mean);
  const double sd = std::sqrt(var / static_cast<double>(all.size()));
  for (auto* s : all) s->advantage = (s->advantage - mean) / (sd + 1e-8);
}

// One epoch: a fresh permutation of [0, n) cut into consecutive minibatches;
// the last one may be short.
inline std::vector<std::vector<std::size_t>> epoch_minibatches(std::size_t n, int minibatch, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(minibatch))
    out.emplace_back(order.begin() + start, order.begin() + std::min(n, start + static_cast<std::size_t>(minibatch)));
  return out;
}

// Collect, estimate advantages, run the minibatch epochs, adapt beta and
// advance the curriculum. On a non-finite loss the parameters and optimizer
// are restored to their state at the start of the iteration.
inline IterationReport train_iteration(TrainState& st, const TrainConfig& cfg) {
  IterationReport rep;
  rep.iteration = st.iteration + 1;
  RolloutBatch batch = collect_rollouts(st.params, st.slots, cfg.steps_per_env(), cfg.threads);

  std::vector<Sample*> all;
  std::vector<double> returns, metrics;
  double reward_sum = 0.0;
  for (auto& seg : batch.segments) {
    std::vector<double> values(seg.samples.size());
    for (std::size_t t = 0; t < values.size(); ++t) values[t] = seg.samples[t].value_old;
    const GaeResult g = gae(seg.rewards, values, seg.dones, seg.bootstrap, cfg.gamma, cfg.lambda);
    for (std::size_t t = 0; t < values.size(); ++t) {
      seg.samples[t].advantage = g.advantages[t];
      seg.samples[t].ret = g.returns[t];
      all.push_back(&seg.samples[t]);
    }
    for (double r : seg.rewards) reward_sum += r;
    returns.insert(returns.end(), seg.episode_returns.begin(), seg.episode_returns.end());
    metrics.insert(metrics.end(), seg.episode_metrics.begin(), seg.episode_metrics.end());
    rep.events.insert(rep.events.end(), seg.events.begin(), seg.events.end());
    rep.divergences += seg.divergences;
  }
  rep.samples = all.size();
  rep.mean_step_reward = reward_sum / static_cast<double>(all.size());
  rep.episodes = static_cast<int>(returns.size());
  if (!returns.empty()) {
    rep.mean_return = std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
    rep.task_metric = std::accumulate(metrics.begin(), metrics.end(), 0.0) / static_cast<double>(metrics.size());
  }
  if (cfg.normalize_advantages) normalize_advantages(all);

  const std::vector<double> last_good = st.params.data();
  const AdamState adam_good = st.adam;
  const AdamConfig adam_cfg{cfg.lr, 0.9, 0.999, cfg.adam_eps};
  const LossCoefs coefs{cfg.clip_eps, st.beta, cfg.value_coef};

  std::vector<const Sample*> mb;
  for (int epoch = 0; epoch < cfg.epochs && !rep.aborted; ++epoch) {
    const bool last_epoch = epoch + 1 == cfg.epochs;
    int count = 0;
    LossTerms acc;
    for (const auto& idx : epoch_minibatches(all.size(), cfg.minibatch, st.rng)) {
      mb.clear();
      for (std::size_t k : idx) mb.push_back(all[k]);
      LossResult lr;
      try {
        lr = ppo_loss(st.params, mb, coefs, true);
        require(all_finite(lr.grad), ErrorKind::domain, "non-finite gradient");
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::domain) throw;
        st.params.data() = last_good;
        st.adam = adam_good;
        rep.aborted = true;
        rep.abort_reason = e.what();
        break;
      }
      adam_step(adam_cfg, st.adam, st.params.data(), lr.grad);
      st.params.clamp_log_std();
      if (last_epoch) {
        acc.total += lr.terms.total;
        acc.surrogate += lr.terms.surrogate;
        acc.kl += lr.terms.kl;
        acc.value_loss += lr.terms.value_loss;
        acc.clip_fraction += lr.terms.clip_fraction;
        ++count;
      }
    }
    if (last_epoch && count > 0) {
      rep.total_loss = acc.total / count;
      rep.surrogate = acc.surrogate / count;
      rep.kl = acc.kl / count;
      rep.value_loss = acc.value_loss / count;
      rep.clip_fraction = acc.clip_fraction / count;
    }
  }

  if (!rep.aborted) st.beta = adapt_beta(rep.kl, cfg.kl_target, st.beta);
  if (st.task.kind == TaskKind::gathering && st.curriculum.observe_iteration(returns)) {
    st.task.curriculum_level = st.curriculum.level();
    for (auto& s : st.slots) s.env.task().curriculum_level = st.task.curriculum_level;
  }
  rep.beta = st.beta;
  rep.curriculum_level = st.task.curriculum_level;
  ++st.iteration;
  return rep;
}

// Everything needed to continue a run bit-exactly, apart from the configs.
inline nlohmann::json save_train_state(const TrainState& st) {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& s : st.slots) slots.push_back(s.save_state());
  return {{"iteration", st.iteration},
          {"beta", st.beta},
          {"params", st.params.data()},
          {"adam", to_json(st.adam)},
          {"curriculum", st.curriculum.to_json()},
          {"curriculum_level", st.task.curriculum_level},
          {"rng", rng_state(st.rng)},
          {"slots", slots}};
}

inline void load_train_state(TrainState& st, const nlohmann::json& j) {
  auto params = j.at("params").get<std::vector<double>>();
  require(params.size() == st.params.size(), ErrorKind::shape,
          "resume state has " + std::to_string(params.size()) + " parameters, expected " +
              std::to_string(st.params.size()));
  require(j.at("slots").size() == st.slots.size(), ErrorKind::config, "resume state env count mismatch");
  st.iteration = j.at("iteration").get<int>();
  st.beta = j.at("beta").get<double>();
  st.params.data() = std::move(params);
  st.adam = adam_from_json(j.at("adam"));
  st.curriculum.from_json(j.at("curriculum"));
  st.task.curriculum_level = j.at("curriculum_level").get<int>();
  set_rng_state(st.rng, j.at("rng").get<std::string>());
  for (std::size_t k = 0; k < st.slots.size(); ++k) {
    st.slots[k].env.task().curriculum_level = st.task.curriculum_level;
    st.slots[k].load_state(j.at("slots")[k]);
  }
}

}  // namespace amorph
