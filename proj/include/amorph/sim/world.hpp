#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/materials/springs.hpp"
#include "amorph/math.hpp"
#include "amorph/rng.hpp"
#include "amorph/sim/particles.hpp"
#include "amorph/sim/spatial_hash.hpp"
#include "amorph/sim/tool.hpp"

namespace amorph {

struct FluidParams {
  double cohesion_radius_factor = 2.6;  // times particle radius
  double cohesion_stiffness = 0.05;
  double xsph_viscosity = 0.05;
};

struct SolverConfig {
  double dt = 1.0 / 60.0;
  int substeps = 2;
  int constraint_iterations = 4;
  PdGains gains;
  double friction_coeff = 0.4;
  Vec3 gravity{0.0, -9.81, 0.0};
  double penetration_tol = 1e-3;
  double table_half_extent = 4.0;
  FluidParams fluid;

  void validate() const {
    require(dt > 0.0 && std::isfinite(dt), ErrorKind::config, "solver.dt must be positive");
    require(substeps >= 1, ErrorKind::config, "solver.substeps must be >= 1");
    require(constraint_iterations >= 1, ErrorKind::config,
            "solver.constraint_iterations must be >= 1");
    for (int k = 0; k < kPoseDim; ++k) {
      require(gains.kp[k] > 0.0, ErrorKind::config, "solver.kp must be positive");
      require(gains.kd[k] >= 0.0, ErrorKind::config, "solver.kd must be non-negative");
    }
    require(friction_coeff >= 0.0, ErrorKind::config, "solver.friction must be non-negative");
    require(penetration_tol >= 0.0, ErrorKind::config, "solver.penetration_tol must be >= 0");
    require(table_half_extent > 0.0, ErrorKind::config, "table extent must be positive");
  }
};

inline ToolState tool_pd_step(const ToolState& tool, std::span<const double> target,
                              const SolverConfig& cfg) {
  return tool_pd_step(tool, target, cfg.gains, cfg.dt);
}

struct WorldState {
  ParticleSystem particles;
  SpringSet springs;
  ToolState tool;
  double sim_time = 0.0;
  std::int64_t step_index = 0;
  Rng rng;
  // Particles clamped back onto the table during the last step.
  int clamped_last_step = 0;
};

struct ToolCorrection {
  int index = 0;
  Vec3 delta = Vec3::Zero();
};

// Pushes every particle overlapping the collider to the nearest surface
// point plus one radius. Returns the applied corrections, in index order.
inline std::vector<ToolCorrection> collide_tool(std::span<const Vec3> positions, double radius,
                                                const ToolState& tool) {
  std::vector<ToolCorrection> out;
  for (int i = 0; i < static_cast<int>(positions.size()); ++i) {
    const auto s = tool_sdf(tool, positions[i]);
    if (s.distance < radius) out.push_back({i, (radius - s.distance) * s.normal});
  }
  return out;
}

inline std::vector<ToolCorrection> collide_tool(const ParticleSystem& particles,
                                                const ToolState& tool) {
  return collide_tool(particles.positions, particles.radius, tool);
}

namespace detail {

inline Vec3 tangential(const Vec3& v, const Vec3& n) { return v - v.dot(n) * n; }

// Coulomb-limited removal of tangential slip accumulated over the substep.
inline Vec3 friction_correction(const Vec3& slip, const Vec3& n, double depth, double mu) {
  const Vec3 t = tangential(slip, n);
  const double len = t.norm();
  if (len <= 0.0) return Vec3::Zero();
  const double limit = mu * depth;
  if (len <= limit) return -t;
  return -t * (limit / len);
}

inline bool is_fluid(Material m) { return m == Material::viscous_fluid; }

}  // namespace detail

// Advances the world one control step in place. The tool follows its PD
// law; the material is one-way coupled and never feeds back on the tool.
inline void advance_world(WorldState& world, std::span<const double> tool_target,
                          const SolverConfig& cfg) {
  const ToolState tool_start = world.tool;
  const ToolState tool_end = tool_pd_step(world.tool, tool_target, cfg);

  auto& ps = world.particles;
  const int n = static_cast<int>(ps.size());
  const double r = ps.radius;
  const double h = cfg.dt / cfg.substeps;
  const double mu = cfg.friction_coeff;

  bool any_plastic = false;
  for (auto m : ps.material) any_plastic = any_plastic || m == Material::visco_plastic;
  const bool dynamic_springs = any_plastic && std::isfinite(world.springs.params.break_distance);
  if (dynamic_springs) world.springs = update_springs(ps, world.springs, &tool_start);

  bool any_fluid = false;
  for (auto m : ps.material) any_fluid = any_fluid || detail::is_fluid(m);
  const double cohesion_radius = cfg.fluid.cohesion_radius_factor * r;
  const double pair_radius = any_fluid ? std::max(3.0 * r, cohesion_radius) : 3.0 * r;

  std::vector<Vec3> x(n);
  std::vector<Vec3> start(n);
  SpatialHash hash(2.0 * r);
  int clamped = 0;

  ToolState tool_prev = tool_start;
  for (int sub = 0; sub < cfg.substeps; ++sub) {
    const double f = static_cast<double>(sub + 1) / cfg.substeps;
    ToolState tool_sub = tool_end;
    for (int k = 0; k < kPoseDim; ++k)
      tool_sub.q[k] = tool_start.q[k] + f * (tool_end.q[k] - tool_start.q[k]);

    for (int i = 0; i < n; ++i) {
      start[i] = ps.positions[i];
      if (ps.inv_mass[i] > 0.0) ps.velocities[i] += h * cfg.gravity;
      x[i] = ps.positions[i] + h * ps.velocities[i];
    }

    hash.build(x);
    const auto pairs = n > 1 ? hash.pairs_within(pair_radius) : std::vector<IndexPair>{};

    for (int it = 0; it < cfg.constraint_iterations; ++it) {
      // Particle contacts with friction.
      for (const auto& pr : pairs) {
        const double wi = ps.inv_mass[pr.i], wj = ps.inv_mass[pr.j];
        const double wsum = wi + wj;
        if (wsum <= 0.0) continue;
        Vec3 d = x[pr.i] - x[pr.j];
        const double len = d.norm();
        if (len <= 0.0) continue;
        const Vec3 nrm = d / len;
        const double pen = 2.0 * r - len;
        if (pen > 0.0) {
          x[pr.i] += (wi / wsum) * pen * nrm;
          x[pr.j] -= (wj / wsum) * pen * nrm;
          const Vec3 slip = (x[pr.i] - start[pr.i]) - (x[pr.j] - start[pr.j]);
          const Vec3 fc = detail::friction_correction(slip, nrm, pen, mu);
          x[pr.i] += (wi / wsum) * fc;
          x[pr.j] -= (wj / wsum) * fc;
        } else if (len < cohesion_radius && detail::is_fluid(ps.material[pr.i]) &&
                   detail::is_fluid(ps.material[pr.j])) {
          const double c = cfg.fluid.cohesion_stiffness * (len - 2.0 * r);
          x[pr.i] -= (wi / wsum) * c * nrm;
          x[pr.j] += (wj / wsum) * c * nrm;
        }
      }

      // Springs as unit-stiffness distance constraints.
      for (const auto& s : world.springs.edges) {
        const double wi = ps.inv_mass[s.i], wj = ps.inv_mass[s.j];
        const double wsum = wi + wj;
        if (wsum <= 0.0) continue;
        const Vec3 d = x[s.i] - x[s.j];
        const double len = d.norm();
        if (len <= 0.0) continue;
        const Vec3 corr = ((len - s.rest) / (len * wsum)) * d;
        x[s.i] -= wi * corr;
        x[s.j] += wj * corr;
      }

      // Tool collider, with friction against the collider's own motion.
      for (int i = 0; i < n; ++i) {
        if (ps.inv_mass[i] <= 0.0) continue;
        const auto sq = tool_sdf(tool_sub, x[i]);
        if (sq.distance >= r) continue;
        const double depth = r - sq.distance;
        x[i] += depth * sq.normal;
        const Vec3 carried = tool_sub.to_world(tool_prev.to_local(start[i])) - start[i];
        const Vec3 slip = (x[i] - start[i]) - carried;
        x[i] += detail::friction_correction(slip, sq.normal, depth, mu);
      }

      // Table plane.
      for (int i = 0; i < n; ++i) {
        const double pen = r - x[i].y();
        if (pen <= 0.0) continue;
        x[i].y() = r;
        const Vec3 slip = x[i] - start[i];
        x[i] += detail::friction_correction(slip, Vec3::UnitY(), pen, mu);
      }
    }

    for (int i = 0; i < n; ++i) {
      if (x[i].y() < r) x[i].y() = r;
      const double e = cfg.table_half_extent;
      if (std::abs(x[i].x()) > e || std::abs(x[i].z()) > e) {
        x[i].x() = std::clamp(x[i].x(), -e, e);
        x[i].z() = std::clamp(x[i].z(), -e, e);
        ++clamped;
      }
      ps.velocities[i] = ps.inv_mass[i] > 0.0 ? Vec3((x[i] - start[i]) / h) : Vec3::Zero();
    }

    if (any_fluid && cfg.fluid.xsph_viscosity > 0.0) {
      std::vector<Vec3> dv(n, Vec3::Zero());
      for (const auto& pr : pairs) {
        if (!detail::is_fluid(ps.material[pr.i]) || !detail::is_fluid(ps.material[pr.j])) continue;
        const double len = (x[pr.i] - x[pr.j]).norm();
        if (len >= cohesion_radius) continue;
        const double w = 1.0 - len / cohesion_radius;
        const Vec3 rel = ps.velocities[pr.j] - ps.velocities[pr.i];
        dv[pr.i] += w * rel;
        dv[pr.j] -= w * rel;
      }
      for (int i = 0; i < n; ++i) ps.velocities[i] += cfg.fluid.xsph_viscosity * dv[i];
    }

    for (int i = 0; i < n; ++i) {
      ps.prev_positions[i] = start[i];
      ps.positions[i] = x[i];
    }
    tool_prev = tool_sub;
  }

  for (int i = 0; i < n; ++i)
    if (!all_finite(ps.positions[i]) || !all_finite(ps.velocities[i]))
      throw SimulationDiverged(world.step_index, "particle " + std::to_string(i) + " non-finite");

  world.tool = tool_end;
  world.sim_time += cfg.dt;
  world.step_index += 1;
  world.clamped_last_step = clamped;
}

inline WorldState step_world(WorldState world, std::span<const double> tool_target,
                             const SolverConfig& cfg) {
  advance_world(world, tool_target, cfg);
  return world;
}

// Jittered lattice pile resting on the table around center (x, z). Layers
// fill bottom-up on a near-square base.
inline ParticleSystem spawn_cluster(const Vec2& center, int count, Material material,
                                    double spacing, std::uint64_t seed, double radius,
                                    double table_half_extent = 4.0) {
  require(count >= 1, ErrorKind::config, "cluster needs at least one particle");
  require(spacing >= 0.9 * 2.0 * radius, ErrorKind::config,
          "cluster spacing must be at least 0.9 particle diameters");
  const int side = std::max(1, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(count)))));
  const double half = 0.5 * (side - 1) * spacing + radius;
  require(std::abs(center.x()) + half <= table_half_extent &&
              std::abs(center.y()) + half <= table_half_extent,
          ErrorKind::config, "cluster overlaps the table boundary");

  Rng rng(seed);
  const double jitter = 0.05 * spacing;
  ParticleSystem ps;
  ps.radius = radius;
  for (int k = 0; k < count; ++k) {
    const int layer = k / (side * side);
    const int a = (k / side) % side, b = k % side;
    const double jx = uniform(rng, -jitter, jitter);
    const double jz = uniform(rng, -jitter, jitter);
    const double px = center.x() + (a - 0.5 * (side - 1)) * spacing + jx;
    const double pz = center.y() + (b - 0.5 * (side - 1)) * spacing + jz;
    const double py = radius + layer * spacing;
    ps.add({px, py, pz}, material);
  }
  return ps;
}

// Multi-layer disk of particles: lattice points nearest the center, taken in
// distance order until `count` particles fill `layers` layers.
inline ParticleSystem spawn_disk(const Vec3& base_center, int count, int layers,
                                 Material material, double spacing, double radius) {
  require(count >= 1 && layers >= 1, ErrorKind::config, "disk needs particles and layers");
  const int per_layer = (count + layers - 1) / layers;
  std::vector<std::pair<double, std::pair<int, int>>> sites;
  const int reach = static_cast<int>(std::ceil(std::sqrt(per_layer))) + 2;
  for (int a = -reach; a <= reach; ++a)
    for (int b = -reach; b <= reach; ++b)
      sites.push_back({std::hypot(a + 0.5, b + 0.5), {a, b}});
  std::sort(sites.begin(), sites.end());
  ParticleSystem ps;
  ps.radius = radius;
  for (int k = 0; k < count; ++k) {
    const int layer = k / per_layer;
    const auto [a, b] = sites[k % per_layer].second;
    ps.add({base_center.x() + (a + 0.5) * spacing, base_center.y() + radius + layer * spacing,
            base_center.z() + (b + 0.5) * spacing},
           material);
  }
  return ps;
}

}  // namespace amorph
