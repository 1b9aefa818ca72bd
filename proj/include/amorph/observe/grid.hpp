#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/math.hpp"
#include "amorph/sim/tool.hpp"

namespace amorph {

enum class Frame { world, tool };

struct GridSpec {
  int n = 32;
  double h = 0.25;
  Vec2 origin{-4.0, -4.0};  // min corner; cell (i, j) spans origin + [i, i+1) h x [j, j+1) h
  Frame frame = Frame::world;

  Vec2 cell_center(int i, int j) const {
    return {origin.x() + (i + 0.5) * h, origin.y() + (j + 0.5) * h};
  }

  void validate() const {
    require(n >= 1, ErrorKind::config, "grid needs n >= 1");
    require(h > 0.0, ErrorKind::config, "grid needs h > 0");
  }

  static GridSpec world(int n = 32, double h = 0.25) {
    return {n, h, Vec2(-0.5 * n * h, -0.5 * n * h), Frame::world};
  }

  // Same resolution, centered on the tool origin in its local frame.
  static GridSpec tool(int n = 32, double h = 0.25) {
    return {n, h, Vec2(-0.5 * n * h, -0.5 * n * h), Frame::tool};
  }
};

// Row-major N x N scalar field; index i runs along the first plane axis
// (x), j along the second (z).
struct GridMap {
  GridSpec spec;
  std::vector<double> values;

  explicit GridMap(const GridSpec& s = {}) : spec(s), values(static_cast<std::size_t>(s.n) * s.n, 0.0) {}

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * spec.n + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * spec.n + j]; }

  int count_positive() const {
    return static_cast<int>(std::count_if(values.begin(), values.end(), [](double v) { return v > 0.0; }));
  }
};

// Window half-width of the density kernel, in cells.
inline constexpr double kKernelReach = 2.5;

// Density kernel for an in-window offset (|vx|, |vz| < 2.5h).
inline double density_weight(double vx, double vz, double h) {
  const double a = kKernelReach * h - std::abs(vx);
  const double b = kKernelReach * h - std::abs(vz);
  return std::sqrt(a * a + b * b);
}

inline bool in_window(double vx, double vz, double h) {
  return std::abs(vx) < kKernelReach * h && std::abs(vz) < kKernelReach * h;
}

namespace detail {

// Candidate cell range along one axis whose centers may lie within the
// kernel window of coordinate p; the exact window test is done per cell.
inline std::pair<int, int> window_range(double p, double origin, double h, int n) {
  const double u = (p - origin) / h;
  if (!std::isfinite(u)) return {0, -1};
  const double lo = std::floor(u - 0.5 - kKernelReach) - 1.0;
  const double hi = std::ceil(u - 0.5 + kKernelReach) + 1.0;
  if (hi < 0.0 || lo > n - 1) return {0, -1};
  return {static_cast<int>(std::max(lo, 0.0)), static_cast<int>(std::min(hi, n - 1.0))};
}

}  // namespace detail

struct DensityHeight {
  GridMap density;
  GridMap height;
};

// Density and weighted-mean-height maps from plane coordinates (x, z) and
// heights y. Particles are scattered in ascending index order, which fixes
// the per-cell summation order.
inline DensityHeight density_height_maps(std::span<const Vec2> xz, std::span<const double> heights,
                                         const GridSpec& spec) {
  spec.validate();
  DensityHeight out{GridMap(spec), GridMap(spec)};
  std::vector<double> weighted(out.density.values.size(), 0.0);
  const bool with_height = !heights.empty();
  for (std::size_t k = 0; k < xz.size(); ++k) {
    const auto [i0, i1] = detail::window_range(xz[k].x(), spec.origin.x(), spec.h, spec.n);
    const auto [j0, j1] = detail::window_range(xz[k].y(), spec.origin.y(), spec.h, spec.n);
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) {
        const Vec2 v = xz[k] - spec.cell_center(i, j);
        if (!in_window(v.x(), v.y(), spec.h)) continue;
        const double w = density_weight(v.x(), v.y(), spec.h);
        out.density.at(i, j) += w;
        if (with_height) weighted[static_cast<std::size_t>(i) * spec.n + j] += heights[k] * w;
      }
  }
  if (with_height)
    for (std::size_t c = 0; c < weighted.size(); ++c)
      out.height.values[c] = out.density.values[c] > 0.0 ? weighted[c] / out.density.values[c] : 0.0;
  return out;
}

inline GridMap density_map(std::span<const Vec2> xz, const GridSpec& spec) {
  return density_height_maps(xz, {}, spec).density;
}

// Weighted mean height per cell; 0 where the density is 0.
inline GridMap height_map(std::span<const Vec3> points, const GridSpec& spec) {
  std::vector<Vec2> xz;
  std::vector<double> y;
  xz.reserve(points.size());
  y.reserve(points.size());
  for (const auto& p : points) {
    xz.emplace_back(p.x(), p.z());
    y.push_back(p.y());
  }
  return density_height_maps(xz, y, spec).height;
}

// A^{-1} x for every point, A the tool's rigid transform.
inline std::vector<Vec3> to_tool_frame(std::span<const Vec3> points, const ToolState& tool) {
  require(all_finite(tool.q), ErrorKind::domain, "non-finite tool pose");
  const Mat3 rt = tool.rotation().transpose();
  const Vec3 t = tool.position();
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(rt * (p - t));
  return out;
}

// Binary disk of the given radius around `center` (plane coordinates of the
// requested frame): 1 where the cell center lies within the radius.
inline GridMap goal_map(const Vec2& center, double radius, const GridSpec& spec) {
  spec.validate();
  GridMap m(spec);
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.n; ++j)
      m.at(i, j) = (spec.cell_center(i, j) - center).norm() <= radius ? 1.0 : 0.0;
  return m;
}

}  // namespace amorph
