#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/observe/grid.hpp"
#include "amorph/sim/world.hpp"
#include "amorph/tasks/material_motion.hpp"
#include "amorph/tasks/task_kind.hpp"

namespace amorph {

struct Observation {
  int n = 0;
  int channels = 0;
  std::vector<double> images;  // channel-major: c * n * n + i * n + j
  std::vector<double> tool_vec;
  std::vector<double> extra_vec;

  std::span<const double> channel(int c) const {
    return {images.data() + static_cast<std::size_t>(c) * n * n, static_cast<std::size_t>(n) * n};
  }
};

// [x, cos r, sin r, xdot, cos rdot, sin rdot] over the active DOFs; the
// translational block follows x, y, z order and the angular block phi, psi,
// theta order.
inline std::vector<double> tool_observation(const ToolState& tool) {
  std::vector<int> lin, ang;
  for (int k = 0; k < kPoseDim; ++k) {
    if (!tool.dof_mask[k]) continue;
    (is_angular(k) ? ang : lin).push_back(k);
  }
  std::vector<double> out;
  out.reserve(2 * lin.size() + 4 * ang.size());
  for (int k : lin) out.push_back(tool.q[k]);
  for (int k : ang) out.push_back(std::cos(tool.q[k]));
  for (int k : ang) out.push_back(std::sin(tool.q[k]));
  for (int k : lin) out.push_back(tool.qdot[k]);
  for (int k : ang) out.push_back(std::cos(tool.qdot[k]));
  for (int k : ang) out.push_back(std::sin(tool.qdot[k]));
  return out;
}

inline int tool_observation_size(const std::array<bool, kPoseDim>& mask) {
  int lin = 0, ang = 0;
  for (int k = 0; k < kPoseDim; ++k)
    if (mask[k]) (is_angular(k) ? ang : lin)++;
  return 2 * lin + 4 * ang;
}

struct ObservationLayout {
  TaskKind kind = TaskKind::gathering;
  Frame frame = Frame::tool;
  int n = 32;
  double h = 0.25;
  Vec3 goal = Vec3::Zero();  // world position on the table (gathering)
  double goal_radius = 1.0;

  GridSpec grid() const { return frame == Frame::tool ? GridSpec::tool(n, h) : GridSpec::world(n, h); }
};

inline Observation assemble_observation(const WorldState& world, const ObservationLayout& layout) {
  const GridSpec spec = layout.grid();
  const auto& ps = world.particles;
  std::vector<Vec3> pts = layout.frame == Frame::tool ? to_tool_frame(ps.positions, world.tool)
                                                      : ps.positions;
  std::vector<Vec2> xz;
  std::vector<double> y;
  xz.reserve(pts.size());
  y.reserve(pts.size());
  for (const auto& p : pts) {
    xz.emplace_back(p.x(), p.z());
    y.push_back(p.y());
  }
  const bool need_height = layout.kind != TaskKind::gathering;
  const auto maps = density_height_maps(xz, need_height ? std::span<const double>(y) : std::span<const double>{}, spec);

  Observation obs;
  obs.n = spec.n;
  obs.channels = image_channels(layout.kind);
  const std::size_t plane = static_cast<std::size_t>(spec.n) * spec.n;
  obs.images.reserve(plane * obs.channels);
  auto append = [&](const GridMap& m) { obs.images.insert(obs.images.end(), m.values.begin(), m.values.end()); };

  switch (layout.kind) {
    case TaskKind::gathering: {
      append(maps.density);
      Vec3 g = layout.goal;
      if (layout.frame == Frame::tool) g = world.tool.to_local(g);
      append(goal_map(Vec2(g.x(), g.z()), layout.goal_radius, spec));
      break;
    }
    case TaskKind::spreading:
      append(maps.density);
      append(maps.height);
      break;
    case TaskKind::flipping:
      append(maps.height);
      break;
  }
  obs.tool_vec = tool_observation(world.tool);
  if (layout.kind == TaskKind::flipping) {
    const Vec3 w = ps.empty() ? Vec3::Zero() : material_angular_velocity(ps);
    obs.extra_vec = {w.x(), w.y(), w.z()};
  }

  for (int c = 0; c < obs.channels; ++c)
    for (double v : obs.channel(c))
      if (!std::isfinite(v)) fail(ErrorKind::internal, "non-finite value in channel " + std::to_string(c));
  require(all_finite(obs.tool_vec) && all_finite(obs.extra_vec), ErrorKind::internal,
          "non-finite tool observation");
  return obs;
}

}  // namespace amorph
