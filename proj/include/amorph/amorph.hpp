#pragma once

#include "amorph/error.hpp"
#include "amorph/harness/commands.hpp"
#include "amorph/harness/metrics.hpp"
#include "amorph/harness/run_config.hpp"
#include "amorph/materials/springs.hpp"
#include "amorph/math.hpp"
#include "amorph/nn/checkpoint.hpp"
#include "amorph/nn/gaussian.hpp"
#include "amorph/nn/policy.hpp"
#include "amorph/observe/grid.hpp"
#include "amorph/observe/observation.hpp"
#include "amorph/observe/pgm.hpp"
#include "amorph/ppo/adam.hpp"
#include "amorph/ppo/gae.hpp"
#include "amorph/ppo/loss.hpp"
#include "amorph/ppo/rollout.hpp"
#include "amorph/ppo/trainer.hpp"
#include "amorph/rng.hpp"
#include "amorph/sim/particles.hpp"
#include "amorph/sim/snapshot.hpp"
#include "amorph/sim/spatial_hash.hpp"
#include "amorph/sim/tool.hpp"
#include "amorph/sim/world.hpp"
#include "amorph/tasks/env.hpp"
#include "amorph/tasks/evaluate.hpp"
#include "amorph/tasks/material_motion.hpp"
#include "amorph/tasks/rewards.hpp"
#include "amorph/tasks/task_config.hpp"
#include "amorph/tasks/task_kind.hpp"
