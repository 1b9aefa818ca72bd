#pragma once

#include <cmath>
#include <vector>

#include "amorph/amorph.hpp"

namespace amorph::testing {

inline Vec3 random_vec(Rng& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

// P particles scattered over [-e, e]^2 in xz and [r, r + height] in y.
inline ParticleSystem random_particles(Rng& rng, int count, double extent, double height = 1.0,
                                       Material m = Material::granular, double radius = 0.1) {
  ParticleSystem ps;
  ps.radius = radius;
  for (int k = 0; k < count; ++k)
    ps.add({uniform(rng, -extent, extent), uniform(rng, radius, radius + height), uniform(rng, -extent, extent)}, m);
  return ps;
}

inline ToolState random_tool(Rng& rng, double extent, bool pan = false) {
  ToolState t;
  if (pan) t.geometry = Pan{};
  t.q = {uniform(rng, -extent, extent), uniform(rng, 0.0, 1.0), uniform(rng, -extent, extent),
         uniform(rng, -0.6, 0.6), uniform(rng, -kPi, kPi), uniform(rng, -0.6, 0.6)};
  return t;
}

inline double ulp_distance_free_max(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// Per-cell, per-particle evaluation of the density/height definitions with
// no window pruning; particles visited in ascending index.
inline DensityHeight brute_force_maps(std::span<const Vec2> xz, std::span<const double> y, const GridSpec& spec) {
  DensityHeight out{GridMap(spec), GridMap(spec)};
  std::vector<double> num(static_cast<std::size_t>(spec.n) * spec.n, 0.0);
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.n; ++j) {
      const Vec2 c = spec.cell_center(i, j);
      double d = 0.0, s = 0.0;
      for (std::size_t k = 0; k < xz.size(); ++k) {
        const double vx = xz[k].x() - c.x(), vz = xz[k].y() - c.y();
        if (!(std::abs(vx) < 2.5 * spec.h && std::abs(vz) < 2.5 * spec.h)) continue;
        const double w = std::sqrt((2.5 * spec.h - std::abs(vx)) * (2.5 * spec.h - std::abs(vx)) +
                                   (2.5 * spec.h - std::abs(vz)) * (2.5 * spec.h - std::abs(vz)));
        d += w;
        if (!y.empty()) s += y[k] * w;
      }
      out.density.at(i, j) = d;
      if (!y.empty()) out.height.at(i, j) = d > 0.0 ? s / d : 0.0;
    }
  return out;
}

inline Vec3 rotate_y(const Vec3& p, double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitY()) * p;
}

// Line-by-line form of the yield rule.
inline double rest_length_reference(double d, double d_rest, double r_c, double r_s) {
  double r_t = d / d_rest;
  if (r_t <= r_c) {
    return d;
  } else if (r_t >= r_s) {
    return d;
  } else {
    return d_rest;
  }
}

// Quadratic pair loop over the same rules.
inline SpringSet update_reference(const ParticleSystem& ps, const SpringSet& in, const ToolState* tool) {
  SpringSet out;
  out.params = in.params;
  const auto& p = in.params;
  auto cut = [&](int i, int j) { return tool && is_cut_by_tool(ps.positions[i], ps.positions[j], *tool); };
  const int n = static_cast<int>(ps.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = (ps.positions[i] - ps.positions[j]).norm();
      const Spring* existing = nullptr;
      for (const auto& s : in.edges)
        if (s.i == i && s.j == j) existing = &s;
      if (existing) {
        if (d < p.break_distance && !cut(i, j))
          out.edges.push_back({i, j, rest_length_reference(d, existing->rest, p.compress_ratio, p.stretch_ratio)});
      } else if (d < p.merge_distance && !cut(i, j) && d > 0.0) {
        out.edges.push_back({i, j, d});
      }
    }
  return out;
}

// Rigidly moves particles, tool and goal by (rot, shift).
inline WorldState co_transform(const WorldState& w, const Mat3& rot, const Vec3& shift) {
  WorldState out = w;
  for (auto& p : out.particles.positions) p = rot * p + shift;
  const Mat3 r = rot * w.tool.rotation();
  const Vec3 t = rot * w.tool.position() + shift;
  const auto e = euler_from_rotation(r);
  out.tool.q = {t.x(), t.y(), t.z(), e[0], e[1], e[2]};
  return out;
}

}  // namespace amorph::testing
