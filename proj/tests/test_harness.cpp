#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "amorph/amorph.hpp"

using namespace amorph;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("amorph_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunConfig tiny_run(const fs::path& out, const std::string& kind = "gathering") {
  return parse_run_config("task.kind = " + kind + "\n"
                          "task.horizon = 5\n"
                          "task.particle_count = 8\n"
                          "grid.n = 16\n"
                          "train.n_envs = 2\n"
                          "train.samples_per_iter = 12\n"
                          "train.minibatch = 4\n"
                          "train.epochs = 2\n"
                          "train.iterations = 3\n"
                          "run.checkpoint_every = 1\n"
                          "run.out = " + out.string() + "\n");
}

}  // namespace

TEST(Config, SerializeParseIsAFixedPoint) {
  for (const std::string kind : {"gathering", "spreading", "flipping"}) {
    auto c = parse_run_config("task.kind = " + kind + "\nreward.spreading.w3 = 0.1\nsolver.dt = 0.0123\n");
    const std::string once = serialize_run_config(c);
    const std::string twice = serialize_run_config(parse_run_config(once));
    EXPECT_EQ(once, twice);
  }
}

TEST(Config, KindSelectsDefaults) {
  const auto c = parse_run_config("task.kind = flipping\n");
  EXPECT_EQ(c.task.kind, TaskKind::flipping);
  EXPECT_EQ(c.task.material, Material::elastic);
  EXPECT_EQ(c.task.horizon, 150);
}

TEST(Config, UnknownKeyIsRejected) {
  try {
    parse_run_config("task.kind = gathering\ntask.colour = red\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("task.colour"), std::string::npos);
  }
}

TEST(Config, DuplicateKeyNamesBothLines) {
  try {
    parse_run_config("task.horizon = 5\n# note\ntask.horizon = 6\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
  }
}

TEST(Config, OverridesApplyLast) {
  const auto c = parse_run_config("task.horizon = 5\n", {"task.horizon=9", "ablate.gathering.r_tool=false"});
  EXPECT_EQ(c.task.horizon, 9);
  EXPECT_FALSE(c.task.gathering_ablation.r_tool);
  EXPECT_TRUE(c.task.gathering_ablation.movement);
}

TEST(Config, InvalidValuesAreConfigErrors) {
  EXPECT_THROW(parse_run_config("task.horizon = 0\n"), Error);
  EXPECT_THROW(parse_run_config("task.horizon = many\n"), Error);
  EXPECT_THROW(parse_run_config("task.resolution = 3\n"), Error);
  EXPECT_THROW(parse_run_config("not a pair\n"), Error);
  EXPECT_THROW(load_run_config("/nonexistent/config.txt"), Error);
}

TEST(Commands, TrainWritesOneMetricsLinePerIteration) {
  const auto dir = scratch("train");
  cmd_train(tiny_run(dir), false, std::cerr);
  const auto recs = read_jsonl((dir / "metrics.jsonl").string());
  ASSERT_EQ(recs.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(recs[k].at("iteration"), k + 1);
    EXPECT_EQ(recs[k].at("task"), "gathering");
  }
  EXPECT_TRUE(fs::exists(dir / "checkpoints" / "final.bin"));
  EXPECT_TRUE(fs::exists(dir / "checkpoints" / "iter_000003.bin"));
  EXPECT_EQ(parse_run_config(slurp(dir / "config.txt")).task.horizon, 5);
}

TEST(Commands, ResumeContinuesTheMetricsLog) {
  const auto a = scratch("resume_a"), b = scratch("resume_b");
  cmd_train(tiny_run(a), false, std::cerr);
  auto first = tiny_run(b);
  first.train.iterations = 2;
  cmd_train(first, false, std::cerr);
  auto rest = tiny_run(b);
  cmd_train(rest, true, std::cerr);
  EXPECT_EQ(slurp(b / "checkpoints" / "final.bin"), slurp(a / "checkpoints" / "final.bin"));
  EXPECT_EQ(read_jsonl((b / "metrics.jsonl").string()).size(), 3u);
}

TEST(Commands, ResumeRejectsAChangedConfig) {
  const auto dir = scratch("resume_changed");
  auto c = tiny_run(dir);
  c.train.iterations = 1;
  cmd_train(c, false, std::cerr);
  c.train.minibatch = 2;
  EXPECT_THROW(cmd_train(c, true, std::cerr), Error);
}

TEST(Commands, EvalIsDeterministic) {
  const auto dir = scratch("eval");
  const auto cfg = tiny_run(dir, "spreading");
  cmd_eval(cfg, "random", 3, 5, (dir / "a.jsonl").string());
  cmd_eval(cfg, "random", 3, 5, (dir / "b.jsonl").string());
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  const auto recs = read_jsonl((dir / "a.jsonl").string());
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_EQ(recs.back().at("type"), "summary");
  EXPECT_EQ(recs.back().at("particles"), 8);
}

TEST(Commands, EvalRejectsMismatchedCheckpoint) {
  const auto dir = scratch("eval_mismatch");
  cmd_train([&] {
    auto c = tiny_run(dir);
    c.train.iterations = 1;
    return c;
  }(), false, std::cerr);
  const auto flip = tiny_run(dir, "flipping");
  EXPECT_THROW(cmd_eval(flip, (dir / "checkpoints" / "final.bin").string(), 1, 0, (dir / "e.jsonl").string()), Error);
}

TEST(Commands, ReplayFromCheckpointWritesHorizonPlusOneFrames) {
  const auto dir = scratch("replay_ckpt");
  auto c = tiny_run(dir, "flipping");
  c.train.iterations = 1;
  cmd_train(c, false, std::cerr);
  const auto s = cmd_replay(c, (dir / "checkpoints" / "final.bin").string(), 3, (dir / "replay").string());
  EXPECT_EQ(s.steps, 5);
  EXPECT_EQ(s.frames, 6);
  int scatters = 0;
  for (const auto& e : fs::directory_iterator(dir / "replay" / "frames"))
    scatters += e.path().filename().string().rfind("scatter_", 0) == 0;
  EXPECT_EQ(scatters, 6);
}

TEST(Commands, ReplayOfActionLogIsBitExact) {
  const auto dir = scratch("replay_log");
  const auto c = tiny_run(dir, "spreading");
  // Record a log with random actions through the same writer the replay uses.
  {
    Env env(c.task, c.solver);
    env.reset(17);
    Rng rng(2);
    const auto act = random_policy(c.task);
    MetricsWriter w((dir / "log.jsonl").string());
    w.write({{"type", "header"}, {"seed", 17}});
    Observation obs = env.observe();
    for (int t = 0; t < 5; ++t) {
      const auto a = act(obs, rng);
      const auto r = env.step(a);
      w.write({{"type", "step"}, {"step", t}, {"action", a}, {"reward", r.reward}});
      obs = r.observation;
    }
  }
  const auto s = cmd_replay(c, (dir / "log.jsonl").string(), 0, (dir / "out").string());
  EXPECT_EQ(s.steps, 5);
  // The replay's own log replays again to the same bytes.
  cmd_replay(c, (dir / "out" / "actions.jsonl").string(), 0, (dir / "out2").string());
  EXPECT_EQ(slurp(dir / "out" / "actions.jsonl"), slurp(dir / "out2" / "actions.jsonl"));
}

TEST(Commands, EmptyActionLogWritesOnlyInitialFrames) {
  const auto dir = scratch("replay_empty");
  const auto c = tiny_run(dir);
  {
    MetricsWriter w((dir / "log.jsonl").string());
    w.write({{"type", "header"}, {"seed", 4}});
  }
  const auto s = cmd_replay(c, (dir / "log.jsonl").string(), 0, (dir / "out").string());
  EXPECT_EQ(s.steps, 0);
  EXPECT_EQ(s.frames, 1);
}

TEST(Commands, TamperedRewardIsAReplayMismatch) {
  const auto dir = scratch("replay_tamper");
  const auto c = tiny_run(dir);
  {
    MetricsWriter w((dir / "log.jsonl").string());
    w.write({{"type", "header"}, {"seed", 4}});
    w.write({{"type", "step"}, {"step", 0}, {"action", {0.1, 0.0, 0.0}}, {"reward", 123.0}});
  }
  try {
    cmd_replay(c, (dir / "log.jsonl").string(), 0, (dir / "out").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::replay_mismatch);
  }
}

TEST(Commands, RenderObsWritesChannelImages) {
  const auto dir = scratch("render");
  const auto c = tiny_run(dir, "spreading");
  cmd_render_obs(c, 1, dir.string());
  const auto j = nlohmann::json::parse(slurp(dir / "obs.json"));
  EXPECT_EQ(j.at("channels"), 2);
  EXPECT_EQ(j.at("images").size(), 2u * 16 * 16);
  EXPECT_EQ(slurp(dir / "scatter.pgm").substr(0, 3), "P5\n");
}
