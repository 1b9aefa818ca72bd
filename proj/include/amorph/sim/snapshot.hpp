#pragma once

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "amorph/error.hpp"
#include "amorph/sim/world.hpp"

namespace amorph {

// Scene snapshot: a versioned JSON record of every particle, spring and tool
// field. Doubles are written in shortest round-trip form, so import(export(w))
// reproduces all finite values exactly; infinities are spelled as strings.
inline constexpr int kSnapshotVersion = 1;

namespace detail {

inline nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double num(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
    fail(ErrorKind::io, "bad number '" + s + "'");
  }
  return j.get<double>();
}

inline nlohmann::json vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline Vec3 vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace detail

inline nlohmann::json tool_to_json(const ToolState& t) {
  nlohmann::json j;
  j["q"] = t.q;
  j["qdot"] = t.qdot;
  j["dof_mask"] = t.dof_mask;
  if (const auto* b = std::get_if<ScraperBlade>(&t.geometry)) {
    j["geometry"] = {{"kind", "scraper_blade"}, {"width", b->width}, {"height", b->height},
                     {"thickness", b->thickness}};
  } else {
    const auto& p = std::get<Pan>(t.geometry);
    j["geometry"] = {{"kind", "pan"}, {"radius", p.radius}, {"rim_height", p.rim_height},
                     {"base_thickness", p.base_thickness}, {"rim_thickness", p.rim_thickness}};
  }
  return j;
}

inline ToolState tool_from_json(const nlohmann::json& j) {
  ToolState t;
  t.q = j.at("q").get<Pose>();
  t.qdot = j.at("qdot").get<Pose>();
  t.dof_mask = j.at("dof_mask").get<std::array<bool, kPoseDim>>();
  const auto& g = j.at("geometry");
  const auto kind = g.at("kind").get<std::string>();
  if (kind == "scraper_blade") {
    t.geometry = ScraperBlade{g.at("width").get<double>(), g.at("height").get<double>(),
                              g.at("thickness").get<double>()};
  } else if (kind == "pan") {
    t.geometry = Pan{g.at("radius").get<double>(), g.at("rim_height").get<double>(),
                     g.at("base_thickness").get<double>(), g.at("rim_thickness").get<double>()};
  } else {
    fail(ErrorKind::io, "unknown tool geometry '" + kind + "'");
  }
  return t;
}

inline nlohmann::json world_to_json(const WorldState& w) {
  using nlohmann::json;
  const auto& ps = w.particles;
  json particles;
  particles["radius"] = ps.radius;
  json pos = json::array(), prev = json::array(), vel = json::array(), mat = json::array();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    pos.push_back(detail::vec(ps.positions[i]));
    prev.push_back(detail::vec(ps.prev_positions[i]));
    vel.push_back(detail::vec(ps.velocities[i]));
    mat.push_back(std::string(to_string(ps.material[i])));
  }
  particles["positions"] = pos;
  particles["prev_positions"] = prev;
  particles["velocities"] = vel;
  particles["inv_mass"] = ps.inv_mass;
  particles["material"] = mat;

  json springs;
  const auto& sp = w.springs.params;
  springs["params"] = {{"d_m", detail::num(sp.merge_distance)},
                       {"d_b", detail::num(sp.break_distance)},
                       {"r_c", detail::num(sp.compress_ratio)},
                       {"r_s", detail::num(sp.stretch_ratio)}};
  json edges = json::array();
  for (const auto& e : w.springs.edges) edges.push_back({e.i, e.j, e.rest});
  springs["edges"] = edges;

  return {{"format", "amorph-scene"},
          {"version", kSnapshotVersion},
          {"particles", particles},
          {"springs", springs},
          {"tool", tool_to_json(w.tool)},
          {"sim_time", w.sim_time},
          {"step_index", w.step_index},
          {"clamped_last_step", w.clamped_last_step},
          {"rng", rng_state(w.rng)}};
}

inline WorldState world_from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "amorph-scene", ErrorKind::io, "not a scene snapshot");
  require(j.value("version", 0) == kSnapshotVersion, ErrorKind::io,
          "unsupported snapshot version");
  WorldState w;
  const auto& p = j.at("particles");
  auto& ps = w.particles;
  ps.radius = p.at("radius").get<double>();
  for (const auto& v : p.at("positions")) ps.positions.push_back(detail::vec(v));
  for (const auto& v : p.at("prev_positions")) ps.prev_positions.push_back(detail::vec(v));
  for (const auto& v : p.at("velocities")) ps.velocities.push_back(detail::vec(v));
  ps.inv_mass = p.at("inv_mass").get<std::vector<double>>();
  for (const auto& m : p.at("material")) ps.material.push_back(material_from_string(m.get<std::string>()));
  ps.validate();

  const auto& s = j.at("springs");
  const auto& sp = s.at("params");
  w.springs.params = {detail::num(sp.at("d_m")), detail::num(sp.at("d_b")),
                      detail::num(sp.at("r_c")), detail::num(sp.at("r_s"))};
  for (const auto& e : s.at("edges"))
    w.springs.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});

  w.tool = tool_from_json(j.at("tool"));
  w.sim_time = j.at("sim_time").get<double>();
  w.step_index = j.at("step_index").get<std::int64_t>();
  w.clamped_last_step = j.value("clamped_last_step", 0);
  set_rng_state(w.rng, j.at("rng").get<std::string>());
  return w;
}

inline std::string export_scene(const WorldState& w) { return world_to_json(w).dump(1); }

inline WorldState import_scene(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, std::string("scene parse error: ") + e.what());
  }
  return world_from_json(j);
}

}  // namespace amorph
