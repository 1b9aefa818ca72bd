#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/math.hpp"

namespace amorph {

enum class Material { granular, viscous_fluid, visco_plastic, elastic };

inline std::string_view to_string(Material m) {
  switch (m) {
    case Material::granular: return "granular";
    case Material::viscous_fluid: return "viscous_fluid";
    case Material::visco_plastic: return "visco_plastic";
    case Material::elastic: return "elastic";
  }
  return "granular";
}

inline Material material_from_string(std::string_view s) {
  if (s == "granular") return Material::granular;
  if (s == "viscous_fluid") return Material::viscous_fluid;
  if (s == "visco_plastic") return Material::visco_plastic;
  if (s == "elastic") return Material::elastic;
  fail(ErrorKind::config, "unknown material '" + std::string(s) + "'");
}

struct ParticleSystem {
  std::vector<Vec3> positions;
  std::vector<Vec3> prev_positions;
  std::vector<Vec3> velocities;
  std::vector<double> inv_mass;
  std::vector<Material> material;
  double radius = 0.1;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  void add(const Vec3& p, Material m, double w = 1.0) {
    positions.push_back(p);
    prev_positions.push_back(p);
    velocities.push_back(Vec3::Zero());
    inv_mass.push_back(w);
    material.push_back(m);
  }

  void validate() const {
    const auto n = positions.size();
    require(prev_positions.size() == n && velocities.size() == n &&
                inv_mass.size() == n && material.size() == n,
            ErrorKind::internal, "particle arrays differ in length");
    require(radius > 0.0, ErrorKind::config, "particle radius must be positive");
    for (double w : inv_mass)
      require(w >= 0.0, ErrorKind::config, "inverse mass must be non-negative");
  }

  Vec3 center_of_mass() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : positions) c += p;
    return empty() ? c : Vec3(c / static_cast<double>(size()));
  }

  double mean_height() const {
    double s = 0.0;
    for (const auto& p : positions) s += p.y();
    return empty() ? 0.0 : s / static_cast<double>(size());
  }
};

}  // namespace amorph
