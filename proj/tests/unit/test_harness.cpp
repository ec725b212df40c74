#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "homoshear/harness.hpp"
#include "homoshear/statistics.hpp"

using namespace homoshear;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("homoshear_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Scenario small(const std::string& name) {
  auto s = preset(name);
  s.sim.n_particles = 3000;
  return s;
}

}  // namespace

TEST_CASE("every preset round-trips through an INI file") {
  const auto dir = scratch("ini");
  fs::create_directories(dir);
  for (const auto& name : scenario_names()) {
    const auto s = preset(name);
    write_ini(s.to_config(), dir / (name + ".ini"));
    const auto back = Scenario::from_config(read_ini(dir / (name + ".ini")));
    CHECK(back.to_config() == s.to_config());
    CHECK(back.sim.record_times == s.sim.record_times);
    CHECK(back.sim.K == s.sim.K);
  }
  fs::remove_all(dir);
}

TEST_CASE("config conveniences and rejection of unknown keys") {
  ConfigMap cfg;
  cfg["scenario"]["name"] = "subcritical";
  cfg["sim"]["t_end"] = "2";
  cfg["sim"]["record_every"] = "0.5";
  const auto s = Scenario::from_config(cfg);
  CHECK(s.sim.record_times == std::vector<double>{0.5, 1.0, 1.5, 2.0});
  cfg["sim"]["K_over_K0"] = "0.5";
  const auto k = Scenario::from_config(cfg);
  const auto op = build_operator(kernel_moments(CollisionKernel::constant()), 0, 0);
  CHECK(k.sim.K == doctest::Approx(0.5 * find_K0(op.C1, op.C2)));
  cfg["sim"]["bogus"] = "1";
  CHECK_THROWS_AS(Scenario::from_config(cfg), std::invalid_argument);
  ConfigMap bad;
  bad["nonsense"]["x"] = "1";
  CHECK_THROWS_AS(Scenario::from_config(bad), std::invalid_argument);
  CHECK_THROWS(preset("nope"));
}

TEST_CASE("scenario run writes a manifest that reproduces it byte for byte") {
  auto s = small("relax_k0");
  s.sim.initial = InitialCondition::point_mass({2, 0, 0});
  s.out_dir = scratch("run");
  const auto m = run_scenario(s);
  CHECK(fs::exists(s.out_dir / "manifest.json"));
  CHECK(m.seed == s.sim.seed);
  CHECK_FALSE(m.files.empty());
  const auto loaded = load_manifest(s.out_dir / "manifest.json");
  CHECK(loaded.config == m.config);
  CHECK(loaded.code_version == kCodeVersion);
  const auto re = scenario_from_manifest(s.out_dir / "manifest.json", s.out_dir / "rerun");
  run_scenario(re);
  for (const auto& f : m.files) CHECK(slurp(s.out_dir / f) == slurp(s.out_dir / "rerun" / f));
  const auto csv = slurp(s.out_dir / (s.name + ".csv"));
  CHECK(csv.rfind(kTrajectorySchema, 0) == 0);
  fs::remove_all(s.out_dir);
}

TEST_CASE("supercritical scenario refuses a subcritical shear") {
  auto s = small("supercritical");
  s.sim.K = 1.0;
  s.out_dir = scratch("super");
  CHECK_THROWS_AS(run_scenario(s), std::invalid_argument);
  fs::remove_all(s.out_dir);
}

TEST_CASE("empirical threshold picks the smallest drifting K") {
  std::vector<KSweepRow> rows = {{1, -1, 0, Verdict::stationary},
                                 {3, 1, 1, Verdict::drifting},
                                 {2, 0.5, 0.5, Verdict::drifting},
                                 {5, 2, 2, Verdict::inconclusive}};
  CHECK(*empirical_threshold(rows) == 2.0);
  rows.resize(1);
  CHECK_FALSE(empirical_threshold(rows).has_value());
}

TEST_CASE("test functions") {
  CHECK(parse_test_function("v1v2") == TestFunction::v1v2);
  CHECK_THROWS(parse_test_function("v1v2v3"));
  const Vec3 v{1, 2, 3};
  CHECK(test_function_value(TestFunction::v1v2, v) == 2.0);
  // the cutoff leaves the energy untouched inside the radius and kills it beyond twice the radius
  for (double r : {0.0, 1.0, 10.0, 49.9})
    CHECK(std::abs(test_function_value(TestFunction::energy_cutoff, {r, 0, 0}) - r * r) < 1e-6);
  CHECK(test_function_value(TestFunction::energy_cutoff, {100.5, 0, 0}) == 0.0);
  const double mid = test_function_value(TestFunction::energy_cutoff, {75, 0, 0});
  CHECK(mid > 0.0);
  CHECK(mid < 75.0 * 75.0);
}

TEST_CASE("closed-form adjoint collision operator agrees with its sampler") {
  const auto kern = CollisionKernel::constant();
  const auto km = kernel_moments(kern);
  CHECK(adjoint_collision_exact(TestFunction::one, km, {1, 2, 3}) == 0.0);
  for (auto phi : {TestFunction::v1v2, TestFunction::v1_squared})
    for (Vec3 v : {Vec3{0, 0, 0}, Vec3{1, -0.5, 2}, Vec3{3, 3, 0}}) {
      CounterRng rng(5, static_cast<std::uint64_t>(phi));
      RunningStats s;
      for (int i = 0; i < 400000; ++i) s.add(adjoint_collision_sample(phi, kern, km.b_l1, v, rng));
      CHECK(std::abs(s.mean() - adjoint_collision_exact(phi, km, v)) < 5 * s.standard_error());
    }
  // v1v2 is an eigenfunction of the mean part: the vv^T coefficient is -C1
  const auto op = build_operator(km, 0, 0);
  CHECK(adjoint_collision_exact(TestFunction::v1v2, km, {1, 1, 0}) == doctest::Approx(-op.C1));
}

TEST_CASE("weak form of the kinetic equation") {
  SimConfig c;
  c.K = 2.0;
  c.n_particles = 20000;
  c.t_end = 1.0;
  c.record_times = {0.2, 0.6, 1.0};
  c.initial = InitialCondition::point_mass({1.5, 0.5, 0});
  for (const auto& p : weak_form_residual(c, TestFunction::one)) {
    CHECK(p.lhs == 0.0);
    CHECK(p.rhs == 0.0);
  }
  for (auto phi : {TestFunction::v1v2, TestFunction::v1_squared, TestFunction::energy_cutoff})
    for (const auto& p : weak_form_residual(c, phi)) {
      INFO("t = " << p.t << " lhs " << p.lhs << " rhs " << p.rhs << " se " << p.se);
      CHECK(std::abs(p.residual) < 5 * p.se);
    }
  c.record_times = {0.005};
  CHECK_THROWS(weak_form_residual(c, TestFunction::v1v2));
}

TEST_CASE("kinetic-equation weak form with a hard potential") {
  SimConfig c;
  c.K = 1.0;
  c.kernel = CollisionKernel::quadratic(0.5);
  c.n_particles = 20000;
  c.t_end = 0.5;
  c.record_times = {0.25, 0.5};
  for (const auto& p : weak_form_residual(c, TestFunction::energy_cutoff)) CHECK(std::abs(p.residual) < 5 * p.se);
}
