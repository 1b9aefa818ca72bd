#pragma once

#include <string>
#include <string_view>

#include "amorph/error.hpp"

namespace amorph {

enum class TaskKind { gathering, spreading, flipping };

inline std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::gathering: return "gathering";
    case TaskKind::spreading: return "spreading";
    case TaskKind::flipping: return "flipping";
  }
  return "gathering";
}

inline TaskKind task_kind_from_string(std::string_view s) {
  if (s == "gathering") return TaskKind::gathering;
  if (s == "spreading") return TaskKind::spreading;
  if (s == "flipping") return TaskKind::flipping;
  fail(ErrorKind::config, "unknown task kind '" + std::string(s) + "'");
}

// Image channels per task: gathering (density, goal), spreading (density,
// height), flipping (height).
inline int image_channels(TaskKind k) { return k == TaskKind::flipping ? 1 : 2; }

// Action arity: gathering (dx, dz, dyaw); spreading (dx, dy, dz, dyaw);
// flipping (dx, dy, dz, dpitch).
inline int action_dim(TaskKind k) { return k == TaskKind::gathering ? 3 : 4; }

inline int extra_dim(TaskKind k) { return k == TaskKind::flipping ? 3 : 0; }

}  // namespace amorph
