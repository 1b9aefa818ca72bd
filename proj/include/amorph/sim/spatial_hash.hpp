#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "amorph/math.hpp"

namespace amorph {

struct IndexPair {
  int i = 0;
  int j = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
  friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

// Uniform grid hash over 3D points. Points are bucketed by integer cell and
// stored in cell-sorted order, so queries visit candidates deterministically.
class SpatialHash {
 public:
  explicit SpatialHash(double cell_size) : cell_(cell_size) {}

  double cell_size() const { return cell_; }

  void build(std::span<const Vec3> points) {
    points_.assign(points.begin(), points.end());
    const int n = static_cast<int>(points.size());
    order_.resize(n);
    keys_.resize(n);
    for (int i = 0; i < n; ++i) {
      keys_[i] = key(cell_of(points[i]));
      order_[i] = i;
    }
    std::sort(order_.begin(), order_.end(), [&](int a, int b) {
      return keys_[a] != keys_[b] ? keys_[a] < keys_[b] : a < b;
    });
    ranges_.clear();
    ranges_.reserve(n);
    for (int s = 0; s < n;) {
      int e = s;
      while (e < n && keys_[order_[e]] == keys_[order_[s]]) ++e;
      ranges_.emplace(keys_[order_[s]], std::pair<int, int>{s, e});
      s = e;
    }
  }

  // All pairs (i < j) with |p_i - p_j| < radius, sorted ascending.
  std::vector<IndexPair> pairs_within(double radius) const {
    std::vector<IndexPair> out;
    const int reach = std::max(1, static_cast<int>(std::ceil(radius / cell_)));
    const double r2 = radius * radius;
    for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
      const auto c = cell_of(points_[i]);
      for (int dx = -reach; dx <= reach; ++dx)
        for (int dy = -reach; dy <= reach; ++dy)
          for (int dz = -reach; dz <= reach; ++dz) {
            const auto it = ranges_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
            if (it == ranges_.end()) continue;
            for (int s = it->second.first; s < it->second.second; ++s) {
              const int j = order_[s];
              if (j <= i) continue;
              if ((points_[j] - points_[i]).squaredNorm() < r2) out.push_back({i, j});
            }
          }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Cell = std::array<std::int64_t, 3>;

  Cell cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  // 21 bits per axis, offset so small negative cells pack cleanly.
  static std::uint64_t key(const Cell& c) {
    constexpr std::int64_t off = 1 << 20;
    constexpr std::uint64_t mask = (1u << 21) - 1;
    return (static_cast<std::uint64_t>(c[0] + off) & mask) |
           ((static_cast<std::uint64_t>(c[1] + off) & mask) << 21) |
           ((static_cast<std::uint64_t>(c[2] + off) & mask) << 42);
  }

  double cell_;
  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<std::uint64_t> keys_;
  std::unordered_map<std::uint64_t, std::pair<int, int>> ranges_;
};

}  // namespace amorph
