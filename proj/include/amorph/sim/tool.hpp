#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <variant>

#include "amorph/error.hpp"
#include "amorph/math.hpp"

namespace amorph {

// Thin oriented box. The local origin sits at the midpoint of the bottom
// edge: width runs along local x, height along +y, thickness along z (the
// blade normal, which is also the tool's forward axis).
struct ScraperBlade {
  double width = 0.8;
  double height = 0.4;
  double thickness = 0.02;
};

// Flat disk with a cylindrical rim. The local origin is the center of the
// base's top surface; the base occupies y in [-base_thickness, 0] and the rim
// rises to rim_height at the outer radius.
struct Pan {
  double radius = 0.6;
  double rim_height = 0.1;
  double base_thickness = 0.02;
  double rim_thickness = 0.02;
};

using ToolGeometry = std::variant<ScraperBlade, Pan>;

struct ToolState {
  Pose q{};
  Pose qdot{};
  std::array<bool, kPoseDim> dof_mask{true, true, true, true, true, true};
  ToolGeometry geometry = ScraperBlade{};

  Vec3 position() const { return {q[kX], q[kY], q[kZ]}; }
  Mat3 rotation() const { return rotation_from_euler(q[kPhi], q[kPsi], q[kTheta]); }

  Vec3 to_local(const Vec3& p) const { return rotation().transpose() * (p - position()); }
  Vec3 to_world(const Vec3& p) const { return rotation() * p + position(); }
};

inline ToolState with_pose(ToolState tool, const Pose& q) {
  tool.q = q;
  return tool;
}

struct SurfaceQuery {
  double distance = 0.0;  // signed; negative inside the collider
  Vec3 normal = Vec3::UnitY();  // outward, unit length
};

namespace detail {

inline double sign_nonneg(double x) { return x >= 0.0 ? 1.0 : -1.0; }

// Signed distance to an axis-aligned box centered at the origin.
inline SurfaceQuery box_sdf(const Vec3& p, const Vec3& half) {
  const Vec3 q = p.cwiseAbs() - half;
  const Vec3 outside = q.cwiseMax(0.0);
  const double out_len = outside.norm();
  SurfaceQuery r;
  if (out_len > 0.0) {
    r.distance = out_len;
    r.normal = Vec3(sign_nonneg(p.x()) * outside.x(), sign_nonneg(p.y()) * outside.y(),
                    sign_nonneg(p.z()) * outside.z()) /
               out_len;
    return r;
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (q[a] > q[axis]) axis = a;
  r.distance = q[axis];
  r.normal = Vec3::Zero();
  r.normal[axis] = sign_nonneg(p[axis]);
  return r;
}

// Signed distance in the (rho, y) half plane to a rectangle
// [rho0, rho1] x [y0, y1]; returns distance and the 2D outward normal.
inline std::array<double, 3> rect_sdf_2d(double rho, double y, double rho0, double rho1,
                                         double y0, double y1) {
  const double cr = 0.5 * (rho0 + rho1), cy = 0.5 * (y0 + y1);
  const double hr = 0.5 * (rho1 - rho0), hy = 0.5 * (y1 - y0);
  const double pr = rho - cr, py = y - cy;
  const double qr = std::abs(pr) - hr, qy = std::abs(py) - hy;
  const double orr = std::max(qr, 0.0), oy = std::max(qy, 0.0);
  const double len = std::hypot(orr, oy);
  if (len > 0.0) return {len, sign_nonneg(pr) * orr / len, sign_nonneg(py) * oy / len};
  if (qr >= qy) return {qr, sign_nonneg(pr), 0.0};
  return {qy, 0.0, sign_nonneg(py)};
}

inline SurfaceQuery pan_sdf_local(const Vec3& p, const Pan& pan) {
  const double rho = std::hypot(p.x(), p.z());
  const Vec3 radial = rho > 0.0 ? Vec3(p.x() / rho, 0.0, p.z() / rho) : Vec3::UnitX();
  // Base is a disk: mirror rho so the rectangle spans [-R, R].
  const auto base = rect_sdf_2d(rho, p.y(), -pan.radius, pan.radius, -pan.base_thickness, 0.0);
  const auto rim = rect_sdf_2d(rho, p.y(), pan.radius - pan.rim_thickness, pan.radius,
                               -pan.base_thickness, pan.rim_height);
  const auto& best = rim[0] < base[0] ? rim : base;
  SurfaceQuery r;
  r.distance = best[0];
  r.normal = (radial * best[1] + Vec3::UnitY() * best[2]).normalized();
  return r;
}

}  // namespace detail

// Signed distance and outward normal of the tool collider at world point p.
inline SurfaceQuery tool_sdf(const ToolState& tool, const Vec3& p) {
  const Mat3 rot = tool.rotation();
  const Vec3 local = rot.transpose() * (p - tool.position());
  SurfaceQuery r = std::visit(
      [&](const auto& g) -> SurfaceQuery {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, ScraperBlade>) {
          const Vec3 center(0.0, 0.5 * g.height, 0.0);
          const Vec3 half(0.5 * g.width, 0.5 * g.height, 0.5 * g.thickness);
          return detail::box_sdf(local - center, half);
        } else {
          return detail::pan_sdf_local(local, g);
        }
      },
      tool.geometry);
  r.normal = rot * r.normal;
  return r;
}

// True iff the closed segment a-b meets the collider volume.
inline bool segment_hits_tool(const ToolState& tool, const Vec3& a, const Vec3& b) {
  if (const auto* blade = std::get_if<ScraperBlade>(&tool.geometry)) {
    // Slab test in the box frame.
    const Vec3 center(0.0, 0.5 * blade->height, 0.0);
    const Vec3 half(0.5 * blade->width, 0.5 * blade->height, 0.5 * blade->thickness);
    const Vec3 la = tool.to_local(a) - center;
    const Vec3 lb = tool.to_local(b) - center;
    const Vec3 d = lb - la;
    double t0 = 0.0, t1 = 1.0;
    for (int k = 0; k < 3; ++k) {
      if (d[k] == 0.0) {
        if (std::abs(la[k]) > half[k]) return false;
        continue;
      }
      double ta = (-half[k] - la[k]) / d[k];
      double tb = (half[k] - la[k]) / d[k];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }
  // Sphere tracing against the signed distance; exact up to the step floor.
  const Vec3 d = b - a;
  const double len = d.norm();
  double t = 0.0;
  for (int it = 0; it < 256; ++it) {
    const Vec3 p = len > 0.0 ? Vec3(a + d * (t / len)) : a;
    const double s = tool_sdf(tool, p).distance;
    if (s <= 0.0) return true;
    if (len == 0.0) return false;
    t += std::max(s, 1e-6);
    if (t > len) return tool_sdf(tool, b).distance <= 0.0;
  }
  return false;
}

struct PdGains {
  Pose kp{400, 400, 400, 400, 400, 400};
  Pose kd{40, 40, 40, 40, 40, 40};
};

// Clamps into (-pi, pi].
inline double saturate_angular_rate(double w) {
  static const double lo = std::nextafter(-kPi, 0.0);
  return std::clamp(w, lo, kPi);
}

// One explicit PD integration step: qdd = kp (target - q) - kd qdot, then
// q += dt qdot, qdot += dt qdd on the active DOFs.
inline ToolState tool_pd_step(const ToolState& tool, std::span<const double> target,
                              const PdGains& gains, double dt) {
  require(target.size() == kPoseDim, ErrorKind::invalid_action, "tool target must have 6 entries");
  require(all_finite(target), ErrorKind::invalid_action, "non-finite tool target");
  ToolState next = tool;
  for (int k = 0; k < kPoseDim; ++k) {
    if (!tool.dof_mask[k]) continue;
    const double qdd = gains.kp[k] * (target[k] - tool.q[k]) - gains.kd[k] * tool.qdot[k];
    next.q[k] = tool.q[k] + dt * tool.qdot[k];
    next.qdot[k] = tool.qdot[k] + dt * qdd;
    if (is_angular(k)) next.qdot[k] = saturate_angular_rate(next.qdot[k]);
  }
  return next;
}

}  // namespace amorph
