#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "amorph/amorph.hpp"

using namespace amorph;

namespace {

TaskConfig tiny_task(TaskKind kind = TaskKind::gathering) {
  auto t = TaskConfig::defaults(kind);
  t.horizon = 6;
  t.grid_n = 16;
  t.particle_count = 8;
  return t;
}

TrainConfig tiny_train() {
  TrainConfig c;
  c.n_envs = 3;
  c.samples_per_iter = 30;
  c.minibatch = 8;
  c.epochs = 2;
  c.seed = 11;
  return c;
}

std::vector<Sample> make_samples(Rng& rng, const PolicyParams& old_params, int count) {
  const auto& s = old_params.shape();
  std::vector<Sample> out;
  for (int k = 0; k < count; ++k) {
    Sample x;
    x.obs.n = s.n;
    x.obs.channels = s.channels;
    x.obs.images.resize(static_cast<std::size_t>(s.n) * s.n * s.channels);
    for (auto& v : x.obs.images) v = uniform(rng, 0.0, 1.5);
    x.obs.tool_vec.resize(s.tool_dim);
    for (auto& v : x.obs.tool_vec) v = uniform(rng, -1.0, 1.0);
    x.action.resize(s.action_dim);
    for (auto& v : x.action) v = uniform(rng, -1.0, 1.0);
    record_old_policy(old_params, x);
    x.advantage = uniform(rng, -2.0, 2.0);
    x.ret = uniform(rng, -1.0, 1.0);
    out.push_back(std::move(x));
  }
  return out;
}

// A(t) = sum_l (gamma lambda)^l delta(t + l) within the episode of t.
std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<std::uint8_t>& done, double boot, double g, double l) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = done[t] ? 0.0 : (t + 1 < n ? v[t + 1] : boot);
    delta[t] = r[t] + g * next - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (std::size_t u = t; u < n; ++u) {
      adv[t] += w * delta[u];
      if (done[u]) break;
      w *= g * l;
    }
  }
  return adv;
}

}  // namespace

TEST(Gae, SingleStep) {
  const std::vector<double> r{1.0}, v{0.5};
  const auto g = gae(r, v, 2.0, 0.9, 0.95);
  EXPECT_DOUBLE_EQ(g.advantages[0], 1.0 + 0.9 * 2.0 - 0.5);
  EXPECT_DOUBLE_EQ(g.returns[0], 1.0 + 0.9 * 2.0);
}

TEST(Gae, LambdaZeroIsOneStepTd) {
  const std::vector<double> r{1, -2, 0.5}, v{0.1, 0.2, 0.3};
  const auto g = gae(r, v, 0.7, 0.99, 0.0);
  EXPECT_DOUBLE_EQ(g.advantages[0], 1 + 0.99 * 0.2 - 0.1);
  EXPECT_DOUBLE_EQ(g.advantages[1], -2 + 0.99 * 0.3 - 0.2);
  EXPECT_DOUBLE_EQ(g.advantages[2], 0.5 + 0.99 * 0.7 - 0.3);
}

TEST(Gae, MatchesDoubleSumOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> r(n), v(n);
    std::vector<std::uint8_t> d(n);
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = uniform(rng, -3, 3);
      v[t] = uniform(rng, -3, 3);
      d[t] = uniform(rng, 0, 1) < 0.1;
    }
    const double boot = uniform(rng, -3, 3), g = uniform(rng, 0, 1), l = uniform(rng, 0, 1);
    const auto got = gae(r, v, d, boot, g, l);
    const auto want = gae_oracle(r, v, d, boot, g, l);
    for (std::size_t t = 0; t < n; ++t) {
      ASSERT_NEAR(got.advantages[t], want[t], 1e-10);
      ASSERT_EQ(got.returns[t], got.advantages[t] + v[t]);
    }
  }
}

TEST(Gae, RejectsMismatchedLengths) {
  const std::vector<double> r{1, 2}, v{1};
  EXPECT_THROW(gae(r, v, 0.0, 0.9, 0.9), Error);
}

TEST(Loss, ClippedObjectiveExamples) {
  EXPECT_DOUBLE_EQ(clipped_objective(1.5, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clipped_objective(0.5, -1.0, 0.2), -0.8);
  EXPECT_DOUBLE_EQ(clipped_objective(1.0, 3.0, 0.2), 3.0);
  EXPECT_DOUBLE_EQ(clipped_objective(0.5, 1.0, 0.2), 0.5);
}

TEST(Loss, AdaptBeta) {
  EXPECT_DOUBLE_EQ(adapt_beta(0.02, 0.01, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(adapt_beta(0.005, 0.01, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(adapt_beta(0.01, 0.01, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(adapt_beta(1.0, 0.01, 8.0), 10.0);
  EXPECT_DOUBLE_EQ(adapt_beta(0.0, 0.01, 1.5e-4), 1e-4);
}

TEST(Loss, IdentitiesAtOldPolicy) {
  Rng rng(2);
  const NetShape s{8, 2, 6, 0, 3};
  const auto p = PolicyParams::initialized(s, rng);
  const auto batch = make_samples(rng, p, 16);
  const auto res = ppo_loss(p, std::span<const Sample>(batch), LossCoefs{}, true);
  double mean_a = 0.0, vl = 0.0;
  for (const auto& x : batch) {
    mean_a += x.advantage / batch.size();
    const double d = forward(p, x.obs).value - x.ret;
    vl += 0.5 * d * d / batch.size();
  }
  EXPECT_NEAR(res.terms.surrogate, -mean_a, 1e-12);
  EXPECT_NEAR(res.terms.kl, 0.0, 1e-12);
  EXPECT_EQ(res.terms.clip_fraction, 0.0);
  EXPECT_NEAR(res.terms.value_loss, vl, 1e-12);
  EXPECT_NEAR(res.terms.total, -mean_a + 0.5 * vl, 1e-12);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  const NetShape s{8, 2, 6, 0, 3};
  const auto old_p = PolicyParams::initialized(s, rng);
  auto p = old_p;
  for (auto& v : p.data()) v += uniform(rng, -0.02, 0.02);
  const auto batch = make_samples(rng, old_p, 6);
  for (const LossCoefs c : {LossCoefs{0.2, 1.0, 0.5}, LossCoefs{10.0, 0.3, 1.0}}) {
    const auto res = ppo_loss(p, std::span<const Sample>(batch), c, true);
    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < p.size(); k += 7) {
      auto& v = p.data()[k];
      const double keep = v;
      v = keep + eps;
      const double up = ppo_loss(p, std::span<const Sample>(batch), c, false).terms.total;
      v = keep - eps;
      const double dn = ppo_loss(p, std::span<const Sample>(batch), c, false).terms.total;
      v = keep;
      const double num = (up - dn) / (2 * eps), ana = res.grad[k];
      worst = std::max(worst, std::abs(ana - num) / std::max({1e-6, std::abs(ana), std::abs(num)}));
    }
    EXPECT_LT(worst, 1e-4);
  }
}

TEST(Loss, NonFiniteRatioNamesTheSample) {
  Rng rng(4);
  const NetShape s{8, 2, 6, 0, 3};
  const auto p = PolicyParams::initialized(s, rng);
  auto batch = make_samples(rng, p, 3);
  batch[2].log_prob_old = -1e6;
  try {
    ppo_loss(p, std::span<const Sample>(batch), LossCoefs{}, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
    EXPECT_NE(std::string(e.what()).find("sample 2"), std::string::npos);
  }
}

TEST(Adam, ZeroLearningRateIsANullUpdate) {
  std::vector<double> p{1.0, -2.0, 3.0}, g{0.5, 0.5, -9.0};
  AdamState st(3);
  const auto keep = p;
  adam_step(AdamConfig{0.0}, st, p, g);
  EXPECT_EQ(p, keep);
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{1.0, -2.0}, g{0.5, -3.0};
  AdamState st(2);
  adam_step(AdamConfig{0.1, 0.9, 0.999, 1e-12}, st, p, g);
  EXPECT_NEAR(p[0], 0.9, 1e-9);
  EXPECT_NEAR(p[1], -1.9, 1e-9);
  const auto back = adam_from_json(nlohmann::json::parse(to_json(st).dump()));
  EXPECT_EQ(back.m, st.m);
  EXPECT_EQ(back.v, st.v);
  EXPECT_EQ(back.t, st.t);
}

TEST(Trainer, EveryEpochUsesEachSampleOnce) {
  Rng rng(5);
  for (std::size_t n : {1u, 7u, 64u, 100u}) {
    std::map<std::size_t, int> uses;
    const int epochs = 4;
    for (int e = 0; e < epochs; ++e)
      for (const auto& mb : epoch_minibatches(n, 8, rng)) {
        EXPECT_LE(mb.size(), 8u);
        for (auto k : mb) ++uses[k];
      }
    ASSERT_EQ(uses.size(), n);
    for (const auto& [k, c] : uses) EXPECT_EQ(c, epochs) << k;
  }
}

TEST(Trainer, ZeroLearningRateLeavesParameters) {
  auto cfg = tiny_train();
  cfg.lr = 0.0;
  auto st = make_train_state(tiny_task(), SolverConfig{}, cfg);
  const auto before = st.params;
  const auto rep = train_iteration(st, cfg);
  EXPECT_FALSE(rep.aborted);
  EXPECT_EQ(st.params, before);
  EXPECT_EQ(rep.samples, 30u);
}

TEST(Rollout, SingleEnvMatchesSerialLoop) {
  const auto task = tiny_task(TaskKind::spreading);
  Rng rng(6);
  const auto p = PolicyParams::initialized(net_shape_for(task), rng);
  auto slots = make_env_slots(task, SolverConfig{}, 1, 21);
  const auto batch = collect_rollouts(p, slots, 10);

  Rng slot_rng(derive_seed(21, 1000));
  Env env(task, SolverConfig{});
  Observation obs = env.reset(slot_rng());
  std::vector<double> rewards;
  for (int t = 0; t < 10; ++t) {
    const auto out = forward(p, obs);
    const auto a = sample_action(out.mean, out.log_std, slot_rng);
    const auto r = env.step(a.action);
    rewards.push_back(r.reward);
    obs = r.done ? env.reset(slot_rng()) : r.observation;
  }
  EXPECT_EQ(batch.segments[0].rewards, rewards);
  EXPECT_EQ(batch.segments[0].dones[5], 1);
}

TEST(Rollout, ThreadCountDoesNotChangeResults) {
  const auto task = tiny_task();
  Rng rng(7);
  const auto p = PolicyParams::initialized(net_shape_for(task), rng);
  auto a = make_env_slots(task, SolverConfig{}, 5, 3);
  auto b = make_env_slots(task, SolverConfig{}, 5, 3);
  const auto ra = collect_rollouts(p, a, 8, 1);
  const auto rb = collect_rollouts(p, b, 8, 3);
  for (int k = 0; k < 5; ++k) {
    EXPECT_EQ(ra.segments[k].rewards, rb.segments[k].rewards);
    EXPECT_EQ(ra.segments[k].bootstrap, rb.segments[k].bootstrap);
  }
}

TEST(Trainer, SameSeedSameParameters) {
  const auto cfg = tiny_train();
  auto a = make_train_state(tiny_task(), SolverConfig{}, cfg);
  auto b = make_train_state(tiny_task(), SolverConfig{}, cfg);
  for (int k = 0; k < 2; ++k) {
    const auto ra = train_iteration(a, cfg);
    const auto rb = train_iteration(b, cfg);
    EXPECT_EQ(to_json(ra).dump(), to_json(rb).dump());
  }
  EXPECT_EQ(a.params, b.params);
}

TEST(Trainer, ResumeMatchesStraightRun) {
  const auto cfg = tiny_train();
  auto straight = make_train_state(tiny_task(), SolverConfig{}, cfg);
  for (int k = 0; k < 3; ++k) train_iteration(straight, cfg);

  auto first = make_train_state(tiny_task(), SolverConfig{}, cfg);
  for (int k = 0; k < 2; ++k) train_iteration(first, cfg);
  const std::string saved = save_train_state(first).dump();
  auto resumed = make_train_state(tiny_task(), SolverConfig{}, cfg);
  load_train_state(resumed, nlohmann::json::parse(saved));
  train_iteration(resumed, cfg);

  EXPECT_EQ(resumed.iteration, 3);
  EXPECT_EQ(resumed.params, straight.params);
  EXPECT_EQ(resumed.beta, straight.beta);
  EXPECT_EQ(save_train_state(resumed).dump(), save_train_state(straight).dump());
}

TEST(Trainer, NormalizedAdvantagesHaveZeroMeanUnitScale) {
  std::vector<Sample> xs(5);
  const double a[] = {1, 2, 3, 4, 10};
  std::vector<Sample*> ptrs;
  for (int k = 0; k < 5; ++k) {
    xs[k].advantage = a[k];
    ptrs.push_back(&xs[k]);
  }
  normalize_advantages(ptrs);
  double m = 0, q = 0;
  for (const auto& x : xs) m += x.advantage / 5;
  for (const auto& x : xs) q += (x.advantage - m) * (x.advantage - m) / 5;
  EXPECT_NEAR(m, 0.0, 1e-12);
  EXPECT_NEAR(q, 1.0, 1e-6);
}

TEST(Trainer, ConfigValidation) {
  auto cfg = tiny_train();
  cfg.minibatch = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = tiny_train();
  cfg.gamma = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
}
