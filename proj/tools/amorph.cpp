#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amorph/amorph.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string task;
  std::string obs_frame;
  std::vector<std::string> ablate;
  int resolution = 0;
  std::int64_t seed = -1;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Config file (key = value lines)");
  app->add_option("--override", c.overrides, "key=value, repeatable");
  app->add_option("--task", c.task, "gathering | spreading | flipping");
  app->add_option("--obs-frame", c.obs_frame, "tool | world")->check(CLI::IsMember({"tool", "world"}));
  app->add_option("--ablate", c.ablate, "Disable a reward term of the selected task, repeatable");
  app->add_option("--resolution", c.resolution, "Material resolution multiplier (1, 2, 4)");
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--out", c.out, "Output directory or file");
}

amorph::RunConfig resolve(const Common& c, std::vector<std::string> extra) {
  std::vector<std::string> ov;
  if (!c.task.empty()) ov.push_back("task.kind=" + c.task);
  if (!c.obs_frame.empty()) ov.push_back("task.obs_frame=" + c.obs_frame);
  if (c.resolution > 0) ov.push_back("task.resolution=" + std::to_string(c.resolution));
  if (c.seed >= 0) ov.push_back("run.seed=" + std::to_string(c.seed));
  if (!c.out.empty()) ov.push_back("run.out=" + c.out);
  ov.insert(ov.end(), extra.begin(), extra.end());
  ov.insert(ov.end(), c.overrides.begin(), c.overrides.end());
  std::string kind = "gathering";
  amorph::RunConfig base = c.config.empty() ? amorph::parse_run_config("", ov) : amorph::load_run_config(c.config, ov);
  kind = std::string(amorph::to_string(base.task.kind));
  if (c.ablate.empty()) return base;
  for (const auto& term : c.ablate) ov.push_back("ablate." + kind + "." + term + "=false");
  return c.config.empty() ? amorph::parse_run_config("", ov) : amorph::load_run_config(c.config, ov);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Amorphous material manipulation: environments and PPO training"};
  app.require_subcommand(1);

  Common train_c, eval_c, replay_c, render_c;
  int iters = -1;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Train a policy");
  add_common(train, train_c);
  train->add_option("--iters", iters, "Training iterations");
  train->add_flag("--resume", resume, "Continue from the run directory's saved state");

  std::string eval_ckpt;
  int rollouts = -1;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (or 'random')");
  add_common(eval, eval_c);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path or 'random'")->required();
  eval->add_option("--rollouts", rollouts, "Number of rollouts");

  std::string replay_src;
  auto* replay = app.add_subcommand("replay", "Re-simulate a checkpoint or action log and export frames");
  add_common(replay, replay_c);
  auto* src = replay->add_option("--checkpoint", replay_src, "Checkpoint to roll out");
  replay->add_option("--actions", replay_src, "Action log (.jsonl) to replay")->excludes(src);

  auto* render = app.add_subcommand("render-obs", "Dump one observation stack");
  add_common(render, render_c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      std::vector<std::string> extra;
      if (iters >= 0) extra.push_back("train.iterations=" + std::to_string(iters));
      return amorph::cmd_train(resolve(train_c, extra), resume);
    }
    if (eval->parsed()) {
      const auto cfg = resolve(eval_c, {});
      const int n = rollouts > 0 ? rollouts : cfg.eval_rollouts;
      const std::string out = eval_c.out.empty() ? "eval.jsonl" : eval_c.out;
      const auto m = amorph::cmd_eval(cfg, eval_ckpt, n, cfg.train.seed, out);
      std::cout << amorph::metric_name(m.kind) << " mean " << m.mean_metric << " over " << n << " rollouts\n";
      return 0;
    }
    if (replay->parsed()) {
      amorph::require(!replay_src.empty(), amorph::ErrorKind::config, "replay needs --checkpoint or --actions");
      const auto cfg = resolve(replay_c, {});
      const auto s = amorph::cmd_replay(cfg, replay_src, cfg.train.seed, cfg.out_dir);
      std::cout << s.steps << " steps, " << s.frames << " frames, total reward " << s.total_reward << "\n";
      return 0;
    }
    if (render->parsed()) {
      const auto cfg = resolve(render_c, {});
      return amorph::cmd_render_obs(cfg, cfg.train.seed, cfg.out_dir);
    }
  } catch (const amorph::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
