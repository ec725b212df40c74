#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "homoshear/particle_sim.hpp"
#include "homoshear/spectral.hpp"

namespace homoshear {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr const char* kTrajectorySchema = "# homoshear trajectory v1";

/// Flat section -> key -> value view of a configuration, shared by INI files
/// and the config echo in manifests.
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

ConfigMap read_ini(const std::filesystem::path& path);
void write_ini(const ConfigMap& cfg, const std::filesystem::path& path);

/// One experiment: simulation setup plus the analysis applied to it.
struct Scenario {
  std::string name = "relax_k0";  // relax_k0, subcritical, supercritical, hard_potential, k_sweep, selfsim
  std::string kernel_preset = "constant";
  std::string kernel_table;  // CSV path; overrides kernel_preset when set
  SimConfig sim;
  bool paper_source = false;     // source constant beta/3 instead of beta
  std::size_t window = 5;        // records per stationarity block
  double tol_sigma = 2.0;
  std::vector<double> k_grid;    // k_sweep: K / K0 multiples
  std::filesystem::path out_dir = "out";

  CollisionKernel make_kernel() const;
  SourceConvention source() const {
    return paper_source ? SourceConvention::paper_constant : SourceConvention::unit_covariance;
  }

  /// Complete, round-trippable description (doubles printed with 17 digits).
  ConfigMap to_config() const;
  /// Missing keys keep the preset defaults of `scenario.name`. Accepts
  /// `sim.K_over_K0` and `sim.record_every` as conveniences.
  static Scenario from_config(const ConfigMap& cfg);
};

std::vector<std::string> scenario_names();
/// Default setup of a named scenario, sized for the acceptance runs.
Scenario preset(const std::string& name);

struct VerdictRecord {
  std::string name;
  bool asserted = true;  // report-only verdicts never fail a run
  bool passed = false;
  std::string detail;
};

struct RunManifest {
  ConfigMap config;
  std::string code_version = kCodeVersion;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  double acceptance_ratio = 1.0;
  std::vector<VerdictRecord> verdicts;
  std::vector<std::string> files;  // relative to the output directory

  bool ok() const;
  const VerdictRecord* find(const std::string& name) const;
};

/// Runs the scenario, writes its CSV files and manifest.json (atomically,
/// after everything else) to scenario.out_dir.
RunManifest run_scenario(const Scenario& scenario);

RunManifest load_manifest(const std::filesystem::path& path);
/// Scenario recorded in a manifest, redirected to out_dir.
Scenario scenario_from_manifest(const std::filesystem::path& path, const std::filesystem::path& out_dir);

struct KSweepRow {
  double K = 0.0;
  double max_re = 0.0;
  double mc_rate = 0.0;
  Verdict verdict = Verdict::inconclusive;
};

/// Monte Carlo stationarity and growth at K = k_grid[i] * K0; budget from scenario.sim.
std::vector<KSweepRow> k_sweep(const Scenario& scenario);

/// Smallest grid K with a drifting verdict, if any.
std::optional<double> empirical_threshold(const std::vector<KSweepRow>& rows);

enum class TestFunction { one, v1v2, v1_squared, energy_cutoff };
TestFunction parse_test_function(const std::string& id);

struct WeakFormPoint {
  double t = 0.0;
  double lhs = 0.0;       // central difference of E[phi]
  double rhs = 0.0;       // E[-K v2 d1 phi + L* phi]
  double residual = 0.0;  // lhs - rhs, averaged per particle
  double se = 0.0;
};

/// Checks d/dt E[phi] = E[-K v2 d1 phi + L* phi] at each record time of the
/// config, using per-particle central differences with half-width h.
std::vector<WeakFormPoint> weak_form_residual(const SimConfig& config, TestFunction phi, double h = 0.01,
                                              double cutoff_radius = 50.0);

/// phi and its generator pieces; exposed for tests.
double test_function_value(TestFunction phi, const Vec3& v, double cutoff_radius = 50.0);
/// L* phi(v) in closed form; only for quadratic phi and gamma = 0.
double adjoint_collision_exact(TestFunction phi, const KernelMoments& km, const Vec3& v);
/// One unbiased draw of L* phi(v).
double adjoint_collision_sample(TestFunction phi, const CollisionKernel& kernel, double b_l1, const Vec3& v,
                                CounterRng& rng, double cutoff_radius = 50.0);

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
};

struct AcceptanceOptions {
  std::filesystem::path work_dir = "acceptance_runs";
  unsigned threads = 1;
  bool verbose = true;
};

/// Runs all twelve acceptance criteria, printing one line per criterion.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

}  // namespace homoshear
