#pragma once

#include <algorithm>
#include <cmath>

#include "amorph/error.hpp"
#include "amorph/observe/grid.hpp"
#include "amorph/sim/world.hpp"
#include "amorph/tasks/material_motion.hpp"
#include "amorph/tasks/task_config.hpp"

namespace amorph {

inline double planar_distance(const Vec3& p, const Vec2& q) { return std::hypot(p.x() - q.x(), p.z() - q.y()); }

struct FarthestParticle {
  int index = 0;
  double distance = 0.0;  // raw planar distance to the goal
};

inline FarthestParticle farthest_from_goal(const ParticleSystem& ps, const Vec2& goal) {
  require(!ps.empty(), ErrorKind::domain, "task undefined without particles");
  FarthestParticle f{0, planar_distance(ps.positions[0], goal)};
  for (int i = 1; i < static_cast<int>(ps.size()); ++i) {
    const double d = planar_distance(ps.positions[i], goal);
    if (d > f.distance) f = {i, d};
  }
  return f;
}

struct GatheringTerms {
  double progress = 0.0;   // w1 * (d_part(x_far)_t - d_part(x_far)_{t+1})
  double movement = 0.0;   // w2 * sum |x_{t+1} - x_t|
  double indicator = 0.0;  // w4 * 1(raw far distance < c3)
  double r_p = 0.0;
  double r_tool = 0.0;
  double d_tool = 0.0;
  double d_thr = 0.0;
  double far_distance = 0.0;
  bool particle_phase = false;
  double reward = 0.0;
};

inline GatheringTerms gathering_terms(const WorldState& prev, const WorldState& cur, const TaskConfig& cfg) {
  const auto& p = cfg.gathering;
  const auto& on = cfg.gathering_ablation;
  require(prev.particles.size() == cur.particles.size(), ErrorKind::domain, "particle count changed");
  auto d_part = [&](double raw) { return (p.c1 + raw) * (p.c1 + raw); };

  const auto far_prev = farthest_from_goal(prev.particles, cfg.goal);
  const auto far_cur = farthest_from_goal(cur.particles, cfg.goal);
  const double dpart_cur = d_part(far_cur.distance);

  GatheringTerms t;
  t.far_distance = far_cur.distance;
  if (on.progress) t.progress = p.w1 * (d_part(far_prev.distance) - dpart_cur);
  if (on.movement) {
    double moved = 0.0;
    for (std::size_t i = 0; i < cur.particles.size(); ++i)
      moved += (cur.particles.positions[i] - prev.particles.positions[i]).norm();
    t.movement = p.w2 * moved;
  }
  if (on.indicator) t.indicator = far_cur.distance < p.c3 ? p.w4 : 0.0;
  t.r_p = p.c2 + t.progress + t.movement + t.indicator;

  const Vec3& far = cur.particles.positions[far_cur.index];
  t.d_tool = std::hypot(cur.tool.q[kX] - far.x(), cur.tool.q[kZ] - far.z());
  if (on.r_tool) t.r_tool = -p.w3 * t.d_tool;
  t.d_thr = std::min(std::max(p.c4 / dpart_cur, p.c5), p.d_thr_cap);
  t.particle_phase = t.d_tool < t.d_thr;
  t.reward = t.particle_phase ? t.r_p : t.r_tool;
  return t;
}

inline double gathering_reward(const WorldState& prev, const WorldState& cur, const TaskConfig& cfg) {
  return gathering_terms(prev, cur, cfg).reward;
}

// Occupied cells of the table-covering world-frame height map.
inline int occupied_cells(const ParticleSystem& ps, const TaskConfig& cfg) {
  return height_map(ps.positions, GridSpec::world(cfg.grid_n, cfg.grid_h)).count_positive();
}

struct SpreadingTerms {
  double r_m = 0.0;
  double r_hc = 0.0;
  double r_h = 0.0;
  double r_o = 0.0;
  double reward = 0.0;
};

inline double spreading_outlier_term(const ParticleSystem& ps, double c_rad) {
  double s = 0.0;
  for (const auto& x : ps.positions) s += std::max(std::hypot(x.x(), x.z()) - c_rad, 0.0);
  return -s;
}

inline double combine_spreading(const SpreadingTerms& t, const SpreadingParams& p) {
  return p.w1 * t.r_m + p.w2 * t.r_hc + p.w3 * t.r_h + p.w4 * t.r_o;
}

inline SpreadingTerms spreading_terms(const WorldState& prev, const WorldState& cur, const TaskConfig& cfg) {
  const auto& p = cfg.spreading;
  const auto& on = cfg.spreading_ablation;
  const auto& a = prev.particles;
  const auto& b = cur.particles;
  require(!b.empty() && a.size() == b.size(), ErrorKind::domain, "task undefined without particles");
  SpreadingTerms t;
  if (on.r_m) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double d = (b.positions[i] - a.positions[i]).norm();
      s += b.positions[i].y() > p.c_min ? d : -p.k * d;
    }
    t.r_m = s / static_cast<double>(b.size());
  }
  if (on.r_hc) t.r_hc = occupied_cells(b, cfg) - occupied_cells(a, cfg);
  if (on.r_h) t.r_h = a.mean_height() - b.mean_height();
  if (on.r_o) t.r_o = spreading_outlier_term(b, p.c_rad);
  t.reward = combine_spreading(t, p);
  return t;
}

inline double spreading_reward(const WorldState& prev, const WorldState& cur, const TaskConfig& cfg) {
  return spreading_terms(prev, cur, cfg).reward;
}

struct FlippingTerms {
  double d_ymin = 0.0;
  double r_h = 0.0;
  double r_av = 0.0;
  Vec3 omega = Vec3::Zero();
  double reward = 0.0;
};

inline double min_height_above_tool(const WorldState& w) {
  require(!w.particles.empty(), ErrorKind::domain, "task undefined without particles");
  double m = INFINITY;
  for (const auto& x : w.particles.positions) m = std::min(m, x.y() - w.tool.q[kY]);
  return m;
}

// Height and spin terms for a given lowest clearance and material spin.
inline FlippingTerms flipping_terms_from(double d_ymin, const Vec3& omega, const TaskConfig& cfg) {
  const auto& p = cfg.flipping;
  FlippingTerms t;
  t.d_ymin = d_ymin;
  t.omega = omega;
  if (cfg.flipping_ablation.r_h) t.r_h = d_ymin > 0.0 ? p.c1 + p.w1 * d_ymin : p.w2 * d_ymin;
  if (cfg.flipping_ablation.r_av && d_ymin > p.c2)
    t.r_av = p.w3 * std::clamp(omega.x(), p.c_wmin, p.c_wmax);
  t.reward = p.w_h * t.r_h + p.w_av * t.r_av;
  return t;
}

inline FlippingTerms flipping_terms(const WorldState& /*prev*/, const WorldState& cur, const TaskConfig& cfg) {
  return flipping_terms_from(min_height_above_tool(cur), material_angular_velocity(cur.particles), cfg);
}

inline double flipping_reward(const WorldState& prev, const WorldState& cur, const TaskConfig& cfg) {
  return flipping_terms(prev, cur, cfg).reward;
}

inline double task_reward(const WorldState& prev, const WorldState& cur, const TaskConfig& cfg) {
  switch (cfg.kind) {
    case TaskKind::gathering: return gathering_reward(prev, cur, cfg);
    case TaskKind::spreading: return spreading_reward(prev, cur, cfg);
    case TaskKind::flipping: return flipping_reward(prev, cur, cfg);
  }
  return 0.0;
}

}  // namespace amorph
