#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "homoshear/particle_sim.hpp"
#include "homoshear/spectral.hpp"

using namespace homoshear;

namespace {

MomentEstimate record(double t, double scale) {
  MomentEstimate e;
  e.time = t;
  e.n = 1000;
  e.M = MomentMatrix::identity(scale);
  e.M_se = MomentMatrix::identity(0.01 * scale);
  e.Ms[2] = 3 * scale;
  e.Ms_se[2] = 0.03 * scale;
  return e;
}

}  // namespace

TEST_CASE("shear drift") {
  static_assert(shear_drift({1, 2, 3}, 0.5, 2.0) == Vec3{-1, 2, 3});
  CHECK(shear_drift({0, 0, 0}, 10, 5) == Vec3{0, 0, 0});
  CHECK(shear_drift({1, -1, 0}, 1, 0) == Vec3{1, -1, 0});
  // composition of drifts is a drift
  const Vec3 v{0.3, 1.1, -2};
  const auto a = shear_drift(shear_drift(v, 0.2, 3), 0.5, 3), b = shear_drift(v, 0.7, 3);
  CHECK(a.x == doctest::Approx(b.x));
}

TEST_CASE("moment estimates") {
  Ensemble one;
  one.velocities = {{1, 2, 0}};
  const auto e = estimate_moments(one, {2.0, 2.5});
  CHECK(e.M.entries() == std::array<double, 6>{1, 2, 0, 4, 0, 0});
  CHECK(e.Ms.at(2.0) == doctest::Approx(5.0));
  CHECK(e.Ms.at(2.5) == doctest::Approx(std::pow(5.0, 1.25)));
  Ensemble same;
  same.velocities.assign(10, {0.5, -1, 2});
  const auto s = estimate_moments(same, {2.0});
  for (int k = 0; k < 6; ++k) CHECK(s.M_se[k] == 0.0);
  CHECK(s.M.m13() == doctest::Approx(1.0));
  Ensemble two;
  two.velocities = {{1, 0, 0}, {-1, 0, 0}, {3, 0, 0}, {-3, 0, 0}};
  const auto t = estimate_moments(two, {2.0});
  CHECK(t.M.m11() == doctest::Approx(5.0));
  CHECK(t.M_se.m11() == doctest::Approx(std::sqrt(64.0 / 3 / 4)));
}

TEST_CASE("configuration validation") {
  SimConfig c;
  c.record_times = {0.5, 0.2};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.record_times = {2.0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.record_times = {0.5};
  c.n_particles = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.n_particles = 10;
  c.K = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.K = 9;
  CHECK(c.effective_substep() == doctest::Approx(0.05));
  c.K = 19;
  CHECK(c.effective_substep() == doctest::Approx(0.025));
}

TEST_CASE("initial conditions") {
  CHECK(InitialCondition::point_mass({1, 2, 3}).moments().m23() == 6.0);
  CHECK(InitialCondition::anisotropic_gaussian({2, 3, 4}).moments().trace() == 9.0);
  CHECK(InitialCondition::parse_kind(InitialCondition::point_mass({}).name()) == InitialCondition::Kind::point_mass);
  SimConfig c;
  c.n_particles = 50000;
  c.t_end = 1.0;
  c.initial = InitialCondition::anisotropic_gaussian({2, 0.5, 1});
  Simulation sim(c);
  const auto e = sim.estimate();
  for (int k = 0; k < 6; ++k) CHECK(std::abs(e.M[k] - c.initial.moments()[k]) < 5 * e.M_se[k] + 1e-12);
}

TEST_CASE("runs are identical across thread counts") {
  SimConfig c;
  c.K = 2.0;
  c.n_particles = 5000;
  c.t_end = 0.5;
  c.record_times = {0.25, 0.5};
  c.kernel = CollisionKernel::quadratic(0.5);
  c.seed = 42;
  const auto a = run(c);
  c.threads = 3;
  const auto b = run(c);
  REQUIRE(a.final.size() == b.final.size());
  for (std::size_t i = 0; i < a.final.size(); ++i) CHECK(a.final.velocities[i] == b.final.velocities[i]);
  CHECK(a.final.accepted_collisions == b.final.accepted_collisions);
  c.seed = 43;
  CHECK(run(c).final.velocities[0] != a.final.velocities[0]);
}

TEST_CASE("particle count is conserved and moments stay physical") {
  SimConfig c;
  c.K = 5.0;
  c.n_particles = 4000;
  c.t_end = 2.0;
  c.record_times = {0.5, 1.0, 1.5, 2.0};
  c.initial = InitialCondition::point_mass({2, 0, 0});
  const auto r = run(c);
  CHECK(r.trajectory.size() == 4);
  for (const auto& e : r.trajectory) {
    CHECK(e.n == 4000);
    CHECK(e.M.is_physical());
  }
  for (const auto& v : r.final.velocities) CHECK(is_finite(v));
  CHECK(r.final.time == 2.0);
  CHECK(r.acceptance_ratio() == doctest::Approx(1.0));
}

TEST_CASE("hard potentials use thinning with acceptance below one") {
  SimConfig c;
  c.K = 1.0;
  c.n_particles = 2000;
  c.t_end = 1.0;
  c.kernel = CollisionKernel::constant(0.5);
  const auto r = run(c);
  CHECK(r.acceptance_ratio() < 1.0);
  CHECK(r.acceptance_ratio() > 0.3);
}

TEST_CASE("Maxwellian stays put without shear") {
  SimConfig c;
  c.n_particles = 40000;
  c.t_end = 1.0;
  c.record_times = {1.0};
  const auto e = run(c).trajectory.back();
  for (int k = 0; k < 6; ++k) CHECK(std::abs(e.M[k] - MomentMatrix::identity()[k]) < 5 * e.M_se[k]);
}

TEST_CASE("short-time moments follow the exact ODE") {
  const auto km = kernel_moments(CollisionKernel::constant());
  SimConfig c;
  c.K = 3.0;
  c.n_particles = 40000;
  c.t_end = 0.5;
  c.record_times = {0.25, 0.5};
  c.initial = InitialCondition::point_mass({1, 1, 0});
  const auto op = build_operator(km, c.K, km.beta);
  for (const auto& e : run(c).trajectory) {
    const auto m = evolve(op, c.initial.moments(), e.time);
    for (int k = 0; k < 6; ++k) CHECK(std::abs(e.M[k] - m[k]) < 5 * e.M_se[k] + 1e-12);
  }
}

TEST_CASE("stationarity test on synthetic trajectories") {
  std::vector<MomentEstimate> flat, doubling;
  for (int i = 0; i < 10; ++i) {
    flat.push_back(record(i, 1.0));
    doubling.push_back(record(i, std::pow(2.0, i)));
  }
  const auto f = stationarity_test(flat, 5);
  CHECK(f.verdict == Verdict::stationary);
  CHECK(f.max_ratio == 0.0);
  CHECK(stationarity_test(doubling, 5).verdict == Verdict::drifting);
  CHECK_THROWS(stationarity_test(flat, 6));
  CHECK(to_string(Verdict::inconclusive) == "inconclusive");
}

TEST_CASE("self-similar diagnostic") {
  SimConfig c;
  c.n_particles = 100000;
  c.t_end = 1.0;
  Simulation a(c);
  CHECK(selfsim_diagnostic(a.ensemble(), a.ensemble(), 1.0) == 0.0);
  c.seed = 2;
  Simulation b(c);
  CHECK(selfsim_diagnostic(a.ensemble(), b.ensemble(), 1.0) < 0.01);
  CHECK_THROWS(selfsim_diagnostic(a.ensemble(), b.ensemble(), 0.0));
}

TEST_CASE("traced inter-collision times") {
  SimConfig c;
  c.n_particles = 100;
  c.trace_particles = 10;
  c.trace_gaps_per_particle = 3;
  c.t_end = 5.0;
  const auto r = run(c);
  CHECK(r.interarrivals.size() <= 30);
  CHECK(r.interarrivals.size() >= 20);
  for (double g : r.interarrivals) CHECK(g > 0);
}
