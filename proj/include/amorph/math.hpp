#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>

namespace amorph {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

// Tool pose layout: [x, y, z, phi, psi, theta]. phi rotates about x (tilt /
// pitch), psi about the vertical y axis (yaw), theta about z.
inline constexpr int kPoseDim = 6;
using Pose = std::array<double, kPoseDim>;

enum Dof : int { kX = 0, kY = 1, kZ = 2, kPhi = 3, kPsi = 4, kTheta = 5 };

inline bool is_angular(int dof) { return dof >= kPhi; }

// R = Ry(psi) * Rx(phi) * Rz(theta)
inline Mat3 rotation_from_euler(double phi, double psi, double theta) {
  return (Eigen::AngleAxisd(psi, Vec3::UnitY()) *
          Eigen::AngleAxisd(phi, Vec3::UnitX()) *
          Eigen::AngleAxisd(theta, Vec3::UnitZ()))
      .toRotationMatrix();
}

// Inverse of rotation_from_euler; phi is returned in [-pi/2, pi/2].
inline std::array<double, 3> euler_from_rotation(const Mat3& r) {
  const double phi = std::asin(std::clamp(-r(1, 2), -1.0, 1.0));
  const double psi = std::atan2(r(0, 2), r(2, 2));
  const double theta = std::atan2(r(1, 0), r(1, 1));
  return {phi, psi, theta};
}

// Maps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace amorph
