#pragma once

#include "amorph/error.hpp"
#include "amorph/sim/particles.hpp"

namespace amorph {

inline constexpr double kComEpsilon = 1e-4;

// Mean of (x_i - c) x v_i / |x_i - c|^2 over particles at least eps from the
// center of mass c. Zero when no particle qualifies.
inline Vec3 material_angular_velocity(const ParticleSystem& ps, double eps = kComEpsilon) {
  require(!ps.empty(), ErrorKind::domain, "angular velocity needs at least one particle");
  const Vec3 c = ps.center_of_mass();
  Vec3 sum = Vec3::Zero();
  int used = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Vec3 r = ps.positions[i] - c;
    const double r2 = r.squaredNorm();
    if (r2 < eps * eps) continue;
    sum += r.cross(ps.velocities[i]) / r2;
    ++used;
  }
  return used == 0 ? Vec3::Zero() : Vec3(sum / static_cast<double>(used));
}

}  // namespace amorph
