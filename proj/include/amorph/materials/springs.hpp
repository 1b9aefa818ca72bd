#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/sim/particles.hpp"
#include "amorph/sim/spatial_hash.hpp"
#include "amorph/sim/tool.hpp"

namespace amorph {

struct SpringParams {
  double merge_distance = 0.22;   // d_m
  double break_distance = 0.30;   // d_b
  double compress_ratio = 0.85;   // r_c
  double stretch_ratio = 1.15;    // r_s

  // Thresholds scaled to a particle radius.
  static SpringParams for_radius(double radius) {
    return {2.2 * radius, 3.0 * radius, 0.85, 1.15};
  }

  // Limit in which update_springs never creates, breaks or re-rests a spring.
  static SpringParams elastic() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {std::numeric_limits<double>::min(), inf, 0.0, inf};
  }

  void validate() const {
    require(merge_distance > 0.0 && merge_distance <= break_distance, ErrorKind::config,
            "spring thresholds need 0 < d_m <= d_b");
    require(compress_ratio >= 0.0 && compress_ratio < 1.0 && stretch_ratio > 1.0,
            ErrorKind::config, "spring ratios need 0 <= r_c < 1 < r_s");
  }
};

struct Spring {
  int i = 0;  // i < j
  int j = 0;
  double rest = 0.0;
  friend bool operator==(const Spring&, const Spring&) = default;
};

struct SpringSet {
  std::vector<Spring> edges;  // sorted by (i, j), unique
  SpringParams params;

  bool empty() const { return edges.empty(); }
  std::size_t size() const { return edges.size(); }

  bool contains(int i, int j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(edges.begin(), edges.end(), Spring{i, j, 0.0},
                              [](const Spring& a, const Spring& b) {
                                return a.i != b.i ? a.i < b.i : a.j < b.j;
                              });
  }

  friend bool operator==(const SpringSet& a, const SpringSet& b) { return a.edges == b.edges; }
};

// Plastic yield rule: adopt the current length once the strain ratio leaves
// (r_c, r_s); otherwise keep the rest length.
inline double rest_length_update(double d, double d_rest, double r_c, double r_s) {
  require(d_rest > 0.0, ErrorKind::domain, "rest length must be positive");
  const double ratio = d / d_rest;
  if (ratio <= r_c || ratio >= r_s) return d;
  return d_rest;
}

inline bool is_cut_by_tool(const Vec3& a, const Vec3& b, const ToolState& tool) {
  return segment_hits_tool(tool, a, b);
}

// One pass of the dynamic spring model: existing springs are re-rested or
// deleted, then every uncut pair closer than d_m without a spring gets one.
inline SpringSet update_springs(const ParticleSystem& particles, const SpringSet& springs,
                                const ToolState* tool) {
  SpringSet out;
  out.params = springs.params;
  const auto& x = particles.positions;
  const auto& p = springs.params;
  auto cut = [&](int i, int j) { return tool != nullptr && is_cut_by_tool(x[i], x[j], *tool); };

  out.edges.reserve(springs.edges.size());
  for (const auto& s : springs.edges) {
    const double d = (x[s.i] - x[s.j]).norm();
    if (d < p.break_distance && !cut(s.i, s.j)) {
      out.edges.push_back({s.i, s.j, rest_length_update(d, s.rest, p.compress_ratio, p.stretch_ratio)});
    }
  }

  if (particles.size() < 2 || !(p.merge_distance > 0.0)) return out;
  SpatialHash hash(2.0 * particles.radius);
  hash.build(x);
  const std::size_t kept = out.edges.size();
  for (const auto& pr : hash.pairs_within(p.merge_distance)) {
    if (springs.contains(pr.i, pr.j)) continue;
    if (cut(pr.i, pr.j)) continue;
    const double d = (x[pr.i] - x[pr.j]).norm();
    if (d > 0.0) out.edges.push_back({pr.i, pr.j, d});
  }
  if (out.edges.size() != kept) {
    std::sort(out.edges.begin(), out.edges.end(), [](const Spring& a, const Spring& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
  }
  return out;
}

// Static network over all pairs within connect_radius; its parameters are
// the elastic limit, so update_springs leaves it untouched.
inline SpringSet elastic_spring_network(const ParticleSystem& particles, double connect_radius) {
  require(connect_radius > 0.0, ErrorKind::domain, "connect radius must be positive");
  SpringSet out;
  out.params = SpringParams::elastic();
  if (particles.size() < 2) return out;
  SpatialHash hash(2.0 * particles.radius);
  hash.build(particles.positions);
  for (const auto& pr : hash.pairs_within(connect_radius)) {
    const double d = (particles.positions[pr.i] - particles.positions[pr.j]).norm();
    if (d > 0.0) out.edges.push_back({pr.i, pr.j, d});
  }
  return out;
}

}  // namespace amorph
