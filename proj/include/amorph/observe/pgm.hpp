#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/observe/grid.hpp"

namespace amorph {

// Binary 8-bit PGM (P5). Values are min-max normalized per image; the
// header comment records the original range so the scalars can be
// recovered as min + pixel / 255 * (max - min).
inline std::string encode_pgm(std::span<const double> values, int rows, int cols) {
  require(values.size() == static_cast<std::size_t>(rows) * cols, ErrorKind::shape, "pgm size mismatch");
  double lo = 0.0, hi = 0.0;
  if (!values.empty()) {
    lo = *std::min_element(values.begin(), values.end());
    hi = *std::max_element(values.begin(), values.end());
  }
  char comment[128];
  std::snprintf(comment, sizeof comment, "# min-max normalized: min=%.17g max=%.17g\n", lo, hi);
  std::string out = "P5\n";
  out += comment;
  out += std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  const double span = hi - lo;
  for (double v : values) {
    const double t = span > 0.0 ? (v - lo) / span : 0.0;
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0))));
  }
  return out;
}

inline std::string encode_pgm(const GridMap& m) { return encode_pgm(m.values, m.spec.n, m.spec.n); }

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::io, "cannot open " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Top-down particle raster over the square [-extent, extent]^2 in (x, z):
// every particle disk is painted with brightness rising with height.
inline std::vector<double> scatter_raster(std::span<const Vec3> points, double radius, double extent,
                                          int size = 256) {
  std::vector<double> img(static_cast<std::size_t>(size) * size, 0.0);
  const double px = 2.0 * extent / size;
  for (const auto& p : points) {
    const int ci = static_cast<int>(std::floor((p.x() + extent) / px));
    const int cj = static_cast<int>(std::floor((p.z() + extent) / px));
    const int rr = std::max(1, static_cast<int>(std::ceil(radius / px)));
    for (int i = ci - rr; i <= ci + rr; ++i)
      for (int j = cj - rr; j <= cj + rr; ++j) {
        if (i < 0 || j < 0 || i >= size || j >= size) continue;
        const double cx = -extent + (i + 0.5) * px, cz = -extent + (j + 0.5) * px;
        if (std::hypot(cx - p.x(), cz - p.z()) > radius) continue;
        auto& v = img[static_cast<std::size_t>(i) * size + j];
        v = std::max(v, 1.0 + p.y());
      }
  }
  return img;
}

}  // namespace amorph
