#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "amorph/amorph.hpp"
#include "support.hpp"

using namespace amorph;
using namespace amorph::testing;

namespace {

ToolState far_tool() {
  ToolState t;
  t.q = {3.5, 2.5, 3.5, 0, 0, 0};
  return t;
}

SolverConfig zero_gravity() {
  SolverConfig c;
  c.gravity = Vec3::Zero();
  return c;
}

double min_clearance(const ParticleSystem& ps) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : ps.positions) m = std::min(m, p.y() - ps.radius);
  return m;
}

// Distance from p to the blade surface by hierarchical sampling of its six
// faces: a coarse grid per face, then repeated refinement around the best.
double sampled_blade_distance(const ToolState& tool, const ScraperBlade& b, const Vec3& p) {
  const Vec3 lp = tool.to_local(p);
  const double hx = 0.5 * b.width, hz = 0.5 * b.thickness;
  struct Face {
    int fixed;
    double value;
  };
  const Face faces[6] = {{0, -hx}, {0, hx}, {1, 0.0}, {1, b.height}, {2, -hz}, {2, hz}};
  const double lo[3] = {-hx, 0.0, -hz}, hi[3] = {hx, b.height, hz};
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : faces) {
    int u = (f.fixed + 1) % 3, v = (f.fixed + 2) % 3;
    double ulo = lo[u], uhi = hi[u], vlo = lo[v], vhi = hi[v];
    double face_best = std::numeric_limits<double>::infinity();
    double bu = 0, bv = 0;
    for (int level = 0; level < 12; ++level) {
      const int n = 60;
      for (int a = 0; a <= n; ++a)
        for (int c = 0; c <= n; ++c) {
          Vec3 s;
          s[f.fixed] = f.value;
          s[u] = ulo + (uhi - ulo) * a / n;
          s[v] = vlo + (vhi - vlo) * c / n;
          const double d = (s - lp).norm();
          if (d < face_best) {
            face_best = d;
            bu = s[u];
            bv = s[v];
          }
        }
      const double wu = (uhi - ulo) / n * 2, wv = (vhi - vlo) / n * 2;
      ulo = std::max(lo[u], bu - wu);
      uhi = std::min(hi[u], bu + wu);
      vlo = std::max(lo[v], bv - wv);
      vhi = std::min(hi[v], bv + wv);
    }
    best = std::min(best, face_best);
  }
  return best;
}

}  // namespace

TEST(ToolPd, AtTargetAtRestIsUnchanged) {
  ToolState t;
  t.q = {0.3, 0.2, -0.1, 0.1, 0.4, 0.0};
  const auto n = tool_pd_step(t, t.q, PdGains{}, 1.0 / 60.0);
  EXPECT_EQ(n.q, t.q);
  EXPECT_EQ(n.qdot, t.qdot);
}

TEST(ToolPd, UnitGainStep) {
  ToolState t;
  PdGains g;
  g.kp.fill(1.0);
  g.kd.fill(0.0);
  Pose target{1, 1, 1, 1, 1, 1};
  const auto n = tool_pd_step(t, target, g, 0.1);
  for (int k = 0; k < kPoseDim; ++k) {
    EXPECT_DOUBLE_EQ(n.q[k], 0.0);
    EXPECT_DOUBLE_EQ(n.qdot[k], 0.1);
  }
}

TEST(ToolPd, PureDampingStep) {
  ToolState t;
  t.qdot = {1, 1, 1, 1, 1, 1};
  PdGains g;
  g.kp.fill(0.0);
  g.kd.fill(2.0);
  const auto n = tool_pd_step(t, t.q, g, 0.1);
  for (int k = 0; k < kPoseDim; ++k) {
    EXPECT_DOUBLE_EQ(n.q[k], 0.1);
    EXPECT_DOUBLE_EQ(n.qdot[k], 0.8);
  }
}

TEST(ToolPd, RejectsNonFiniteOrShortTargets) {
  ToolState t;
  Pose bad{0, std::nan(""), 0, 0, 0, 0};
  try {
    tool_pd_step(t, bad, PdGains{}, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_action);
  }
  std::vector<double> shortv(5, 0.0);
  EXPECT_THROW(tool_pd_step(t, shortv, PdGains{}, 0.1), Error);
}

TEST(ToolPd, MaskedDofsNeverChange) {
  Rng rng(11);
  ToolState t;
  t.dof_mask = {true, false, true, false, true, false};
  t.q = {0.1, 0.7, 0.2, 0.3, 0.4, 0.5};
  const Pose frozen = t.q;
  for (int s = 0; s < 500; ++s) {
    Pose target = t.q;
    for (int k = 0; k < kPoseDim; ++k)
      if (t.dof_mask[k]) target[k] += uniform(rng, -0.5, 0.5);
    t = tool_pd_step(t, target, SolverConfig{});
    for (int k : {1, 3, 5}) {
      EXPECT_EQ(t.q[k], frozen[k]);
      EXPECT_EQ(t.qdot[k], 0.0);
    }
  }
}

TEST(ToolPd, AngularRateSaturationExamples) {
  EXPECT_EQ(saturate_angular_rate(kPi), kPi);
  EXPECT_GT(saturate_angular_rate(-kPi), -kPi);
  EXPECT_EQ(saturate_angular_rate(0.5), 0.5);
  EXPECT_EQ(saturate_angular_rate(10.0), kPi);
}

TEST(ToolPd, AngularRatesStayInHalfOpenRange) {
  Rng rng(5);
  ToolState t;
  for (int s = 0; s < 2000; ++s) {
    Pose target = t.q;
    for (int k = 0; k < kPoseDim; ++k) target[k] += uniform(rng, -3.0, 3.0);
    t = tool_pd_step(t, target, SolverConfig{});
    for (int k : {3, 4, 5}) {
      EXPECT_GT(t.qdot[k], -kPi);
      EXPECT_LE(t.qdot[k], kPi);
    }
  }
}

TEST(ToolPd, ConvergesToFixedTarget) {
  ToolState t;
  t.q = {1.0, 0.5, -1.0, 0.2, 1.0, -0.3};
  const Pose target{0.0, 0.2, 0.5, 0.0, 0.4, 0.1};
  double initial = 0.0;
  for (int k = 0; k < kPoseDim; ++k) initial += (t.q[k] - target[k]) * (t.q[k] - target[k]);
  SolverConfig cfg;
  for (int s = 0; s < 2000; ++s) t = tool_pd_step(t, target, cfg);
  double fin = 0.0;
  for (int k = 0; k < kPoseDim; ++k) fin += (t.q[k] - target[k]) * (t.q[k] - target[k]);
  EXPECT_LE(std::sqrt(fin), 0.01 * std::sqrt(initial));
}

TEST(StepWorld, EmptySystemMovesOnlyTheTool) {
  WorldState w;
  const Pose target{0.5, 0.0, 0.0, 0.0, 0.0, 0.0};
  const auto next = step_world(w, target, SolverConfig{});
  EXPECT_TRUE(next.particles.empty());
  EXPECT_TRUE(next.springs.edges.empty());
  EXPECT_NE(next.tool.qdot[kX], 0.0);
  EXPECT_EQ(next.step_index, 1);
}

TEST(StepWorld, SingleRestingParticleStaysPut) {
  WorldState w;
  w.tool = far_tool();
  w.particles.add({0.0, 0.1, 0.0}, Material::granular);
  SolverConfig cfg;
  for (int s = 0; s < 1000; ++s) {
    advance_world(w, w.tool.q, cfg);
    ASSERT_NEAR(w.particles.positions[0].y(), 0.1, cfg.penetration_tol);
  }
  EXPECT_NEAR(w.particles.positions[0].x(), 0.0, 1e-12);
}

TEST(StepWorld, HeadOnCollisionConservesMomentum) {
  WorldState w;
  w.tool = far_tool();
  w.particles.add({-0.5, 1.0, 0.0}, Material::granular);
  w.particles.add({0.5, 1.0, 0.0}, Material::granular);
  w.particles.velocities[0] = {2.0, 0.0, 0.0};
  w.particles.velocities[1] = {-2.0, 0.0, 0.0};
  auto momentum = [&] {
    Vec3 m = Vec3::Zero();
    for (std::size_t i = 0; i < w.particles.size(); ++i) m += w.particles.velocities[i] / w.particles.inv_mass[i];
    return m;
  };
  const Vec3 before = momentum();
  const auto cfg = zero_gravity();
  for (int s = 0; s < 60; ++s) advance_world(w, w.tool.q, cfg);
  const Vec3 after = momentum();
  // Both zero here: compare against the per-particle momentum scale.
  EXPECT_LT((after - before).norm(), 1e-6 * 2.0);
  EXPECT_GE((w.particles.positions[1] - w.particles.positions[0]).norm(), 0.2 - 1e-6);
}

TEST(StepWorld, AsymmetricCollisionMomentum) {
  WorldState w;
  w.tool = far_tool();
  w.particles.add({-0.5, 1.0, 0.05}, Material::granular);
  w.particles.add({0.5, 1.0, 0.0}, Material::granular);
  w.particles.velocities[0] = {3.0, 0.0, 0.0};
  w.particles.velocities[1] = {-1.0, 0.0, 0.0};
  const Vec3 before = w.particles.velocities[0] + w.particles.velocities[1];
  const auto cfg = zero_gravity();
  for (int s = 0; s < 60; ++s) advance_world(w, w.tool.q, cfg);
  const Vec3 after = w.particles.velocities[0] + w.particles.velocities[1];
  EXPECT_LT((after - before).norm(), 1e-6 * before.norm());
}

TEST(StepWorld, DeterministicAcrossRuns) {
  auto run = [] {
    WorldState w;
    w.particles = spawn_cluster({0.0, 0.0}, 50, Material::visco_plastic, 0.204, 3, 0.1);
    w.springs.params = SpringParams::for_radius(0.1);
    w.tool.q = {-1.0, 0.0, 0.0, 0.0, kPi / 2, 0.0};
    Rng rng(9);
    for (int s = 0; s < 50; ++s) {
      Pose t = w.tool.q;
      t[kX] += uniform(rng, -0.5, 0.5);
      t[kZ] += uniform(rng, -0.5, 0.5);
      advance_world(w, t, SolverConfig{});
    }
    return w;
  };
  const auto a = run(), b = run();
  EXPECT_EQ(export_scene(a), export_scene(b));
}

TEST(StepWorld, NonFiniteStateRaisesDivergence) {
  WorldState w;
  w.particles.add({0.0, 0.5, 0.0}, Material::granular);
  w.particles.velocities[0] = {std::nan(""), 0.0, 0.0};
  w.step_index = 17;
  try {
    advance_world(w, w.tool.q, SolverConfig{});
    FAIL();
  } catch (const SimulationDiverged& e) {
    EXPECT_EQ(e.step_index(), 17);
    EXPECT_EQ(e.kind(), ErrorKind::simulation_diverged);
  }
}

TEST(StepWorld, NonPenetrationUnderRandomToolMotion) {
  for (auto m : {Material::granular, Material::viscous_fluid, Material::visco_plastic}) {
    WorldState w;
    w.particles = spawn_cluster({0.0, 0.0}, 64, m, 0.204, 4, 0.1);
    w.springs.params = SpringParams::for_radius(0.1);
    w.tool.q = {-0.8, 0.0, 0.0, 0.0, kPi / 2, 0.0};
    w.tool.dof_mask = {true, false, true, false, true, false};
    Rng rng(21);
    SolverConfig cfg;
    for (int s = 0; s < 200; ++s) {
      Pose t = w.tool.q;
      t[kX] += uniform(rng, -0.3, 0.5);
      t[kZ] += uniform(rng, -0.3, 0.3);
      t[kPsi] += uniform(rng, -0.2, 0.2);
      advance_world(w, t, cfg);
      ASSERT_GE(min_clearance(w.particles), -cfg.penetration_tol) << to_string(m) << " step " << s;
    }
  }
}

TEST(StepWorld, ParticlesLeavingTheTableAreClamped) {
  WorldState w;
  w.tool = far_tool();
  w.particles.add({3.95, 0.1, 0.0}, Material::granular);
  w.particles.velocities[0] = {5.0, 0.0, 0.0};
  advance_world(w, w.tool.q, SolverConfig{});
  EXPECT_LE(w.particles.positions[0].x(), 4.0);
  EXPECT_EQ(w.clamped_last_step, 1);
}

TEST(CollideTool, NoOverlapNoCorrections) {
  ToolState t;
  std::vector<Vec3> pts{{2.0, 0.1, 2.0}, {-1.0, 0.5, 1.0}};
  EXPECT_TRUE(collide_tool(pts, 0.1, t).empty());
}

TEST(CollideTool, MidPlanePushedAlongNormal) {
  ToolState t;
  t.q = {0.3, 0.0, -0.2, 0.0, 0.7, 0.0};
  const double r = 0.1, d = 0.04;
  const Vec3 normal = t.rotation() * Vec3::UnitZ();
  // Particle center at distance r - d from the front face: penetration d.
  const Vec3 p = t.to_world(Vec3(0.1, 0.2, 0.01 + r - d));
  const auto c = collide_tool(std::vector<Vec3>{p}, r, t);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].delta.norm(), d, 1e-12);
  EXPECT_NEAR(c[0].delta.normalized().dot(normal), 1.0, 1e-12);
}

TEST(CollideTool, GrazingEdgeMatchesSurfaceSampling) {
  Rng rng(4);
  const ScraperBlade blade;
  for (int trial = 0; trial < 20; ++trial) {
    ToolState t = random_tool(rng, 1.0);
    // Just outside the top edge or a vertical side edge, slightly off-axis.
    const bool top = trial % 2 == 0;
    const double r = 0.1;
    Vec3 local = top ? Vec3(uniform(rng, -0.3, 0.3), 0.4 + uniform(rng, 0.02, 0.09), uniform(rng, -0.06, 0.06))
                     : Vec3(0.4 + uniform(rng, 0.02, 0.09), uniform(rng, 0.05, 0.35), uniform(rng, -0.06, 0.06));
    const Vec3 p = t.to_world(local);
    const double oracle = sampled_blade_distance(t, blade, p);
    const auto c = collide_tool(std::vector<Vec3>{p}, r, t);
    const double expected_overlap = std::max(0.0, r - oracle);
    const double got = c.empty() ? 0.0 : c[0].delta.norm();
    EXPECT_NEAR(got, expected_overlap, 1e-4) << "trial " << trial;
  }
}

TEST(ToolSdf, PanInteriorAndRim) {
  ToolState t;
  t.geometry = Pan{};
  EXPECT_NEAR(tool_sdf(t, {0.0, 0.05, 0.0}).distance, 0.05, 1e-12);
  EXPECT_NEAR(tool_sdf(t, {0.0, -0.01, 0.0}).distance, -0.01, 1e-12);
  EXPECT_NEAR(tool_sdf(t, {0.0, 0.15, 0.59}).distance, 0.05, 1e-12);  // above the rim
  EXPECT_LT(tool_sdf(t, {0.59, 0.05, 0.0}).distance, 0.0);            // inside the rim wall
}

TEST(SpawnCluster, SingleParticleNearCenter) {
  const auto ps = spawn_cluster({1.0, -1.0}, 1, Material::granular, 0.204, 1, 0.1);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_NEAR(ps.positions[0].x(), 1.0, 0.05 * 0.204);
  EXPECT_NEAR(ps.positions[0].z(), -1.0, 0.05 * 0.204);
  EXPECT_DOUBLE_EQ(ps.positions[0].y(), 0.1);
}

TEST(SpawnCluster, FiftyGranularAboveTable) {
  const auto ps = spawn_cluster({0.0, 0.0}, 50, Material::granular, 0.204, 2, 0.1);
  ASSERT_EQ(ps.size(), 50u);
  ps.validate();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_GE(ps.positions[i].y(), 0.1);
    EXPECT_EQ(ps.material[i], Material::granular);
  }
}

TEST(SpawnCluster, SameSeedIsBitIdentical) {
  const auto a = spawn_cluster({0.5, 0.5}, 40, Material::visco_plastic, 0.204, 99, 0.1);
  const auto b = spawn_cluster({0.5, 0.5}, 40, Material::visco_plastic, 0.204, 99, 0.1);
  EXPECT_EQ(a.positions, b.positions);
}

TEST(SpawnCluster, RejectsBoundaryOverlapAndTightSpacing) {
  try {
    spawn_cluster({3.9, 0.0}, 50, Material::granular, 0.204, 1, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
  EXPECT_THROW(spawn_cluster({0.0, 0.0}, 10, Material::granular, 0.1, 1, 0.1), Error);
}

TEST(SpatialHash, PairsMatchBruteForce) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ps = random_particles(rng, 150, 1.0, 0.5);
    const double radius = uniform(rng, 0.05, 0.5);
    SpatialHash hash(0.2);
    hash.build(ps.positions);
    const auto got = hash.pairs_within(radius);
    std::vector<IndexPair> want;
    for (int i = 0; i < static_cast<int>(ps.size()); ++i)
      for (int j = i + 1; j < static_cast<int>(ps.size()); ++j)
        if ((ps.positions[i] - ps.positions[j]).norm() < radius) want.push_back({i, j});
    EXPECT_EQ(got, want);
  }
}

TEST(Snapshot, RoundTripIsExact) {
  WorldState w;
  w.particles = spawn_cluster({0.0, 0.0}, 30, Material::visco_plastic, 0.204, 5, 0.1);
  w.springs = update_springs(w.particles, SpringSet{{}, SpringParams::for_radius(0.1)}, nullptr);
  w.tool.q = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  w.tool.qdot = {1.0 / 3.0, 0, 0, 0, 0, 0};
  w.tool.geometry = Pan{};
  w.rng.discard(17);
  w.sim_time = 1.0 / 7.0;
  w.step_index = 12;
  const auto text = export_scene(w);
  const auto back = import_scene(text);
  EXPECT_EQ(back.particles.positions, w.particles.positions);
  EXPECT_EQ(back.springs, w.springs);
  EXPECT_EQ(back.tool.q, w.tool.q);
  EXPECT_EQ(back.tool.qdot, w.tool.qdot);
  EXPECT_EQ(back.rng, w.rng);
  EXPECT_TRUE(std::holds_alternative<Pan>(back.tool.geometry));
  EXPECT_EQ(export_scene(back), text);

  WorldState e;
  e.springs = elastic_spring_network(w.particles, 0.3);
  const auto eb = import_scene(export_scene(e));
  EXPECT_TRUE(std::isinf(eb.springs.params.break_distance));
  EXPECT_EQ(eb.springs, e.springs);
}

TEST(Euler, RoundTrip) {
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const double phi = uniform(rng, -1.5, 1.5), psi = uniform(rng, -3.1, 3.1), theta = uniform(rng, -3.1, 3.1);
    const auto e = euler_from_rotation(rotation_from_euler(phi, psi, theta));
    EXPECT_NEAR(e[0], phi, 1e-9);
    EXPECT_NEAR(e[1], psi, 1e-9);
    EXPECT_NEAR(e[2], theta, 1e-9);
  }
}
