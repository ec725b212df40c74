#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "homoshear/kernels.hpp"
#include "homoshear/moment_dynamics.hpp"
#include "homoshear/rng.hpp"
#include "homoshear/vec3.hpp"

namespace homoshear {

/// Exact free streaming under simple shear: (v1 - K v2 dt, v2, v3).
constexpr Vec3 shear_drift(const Vec3& v, double dt, double K) { return {v.x - K * v.y * dt, v.y, v.z}; }

struct InitialCondition {
  enum class Kind { maxwellian, point_mass, anisotropic_gaussian };
  Kind kind = Kind::maxwellian;
  Vec3 param{};  // point_mass: v0; anisotropic_gaussian: per-axis variances

  static InitialCondition maxwellian() { return {}; }
  static InitialCondition point_mass(const Vec3& v0) { return {Kind::point_mass, v0}; }
  static InitialCondition anisotropic_gaussian(const Vec3& variances) {
    return {Kind::anisotropic_gaussian, variances};
  }

  /// Exact second moments of the initial law.
  MomentMatrix moments() const;
  std::string name() const;
  static Kind parse_kind(const std::string& name);
};

struct SimConfig {
  double K = 0.0;
  CollisionKernel kernel = CollisionKernel::constant();
  std::size_t n_particles = 10000;
  double t_end = 1.0;
  std::optional<double> substep;  // default min(0.05, 0.5 / (1 + K))
  std::uint64_t seed = 1;
  InitialCondition initial;
  std::vector<double> record_times;  // sorted, within [0, t_end]
  std::vector<double> s_moments{2.0, 2.5};
  std::size_t trace_particles = 0;  // first particles whose inter-collision times are kept
  // Only the first gaps of each traced particle are kept. Gaps still open at
  // t_end are never seen, so an uncapped record is biased toward short gaps.
  std::size_t trace_gaps_per_particle = 4;
  unsigned threads = 1;

  double effective_substep() const;
  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

/// N independent tagged particles, each owning its random stream.
struct Ensemble {
  std::vector<Vec3> velocities;
  std::vector<CounterRng> rngs;
  double time = 0.0;
  std::uint64_t accepted_collisions = 0;
  std::uint64_t candidate_collisions = 0;

  std::size_t size() const { return velocities.size(); }
};

struct MomentEstimate {
  double time = 0.0;
  std::size_t n = 0;
  MomentMatrix M;
  MomentMatrix M_se;
  std::map<double, double> Ms;
  std::map<double, double> Ms_se;
  std::uint64_t accepted = 0;
  std::uint64_t candidates = 0;
};

MomentEstimate estimate_moments(const Ensemble& ensemble, const std::vector<double>& s_list);

/// The candidate rate bound exceeded the true rate; signals a broken majorant.
class MajorantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stepper holding an ensemble and advancing it exactly in time.
class Simulation {
 public:
  explicit Simulation(SimConfig config);
  ~Simulation();
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;

  /// Advances every particle to time t >= current time.
  void advance_to(double t);

  MomentEstimate estimate() const { return estimate_moments(ensemble_, config_.s_moments); }
  const Ensemble& ensemble() const { return ensemble_; }
  const SimConfig& config() const { return config_; }
  /// Times between consecutive accepted collisions of the traced particles, in particle order.
  std::vector<double> interarrival_times() const;

 private:
  struct Engine;

  SimConfig config_;
  Ensemble ensemble_;
  std::unique_ptr<Engine> engine_;
};

struct RunResult {
  std::vector<MomentEstimate> trajectory;
  Ensemble final;
  std::vector<double> interarrivals;
  double acceptance_ratio() const {
    return final.candidate_collisions ? static_cast<double>(final.accepted_collisions) /
                                            static_cast<double>(final.candidate_collisions)
                                      : 1.0;
  }
};

RunResult run(const SimConfig& config);

enum class Verdict { stationary, drifting, inconclusive };
std::string to_string(Verdict v);

struct StationarityResult {
  Verdict verdict = Verdict::inconclusive;
  double max_ratio = 0.0;  // largest |difference| / pooled SE
};

/// Compares block means of the six M entries and Ms[2] over the last two
/// windows of `window` records each.
StationarityResult stationarity_test(const std::vector<MomentEstimate>& trajectory, std::size_t window,
                                     double tol_sigma = 2.0);

/// Two-sample KS distance between |v| e^{-mu t / 2} of two ensembles.
double selfsim_diagnostic(const Ensemble& early, const Ensemble& late, double mu);

}  // namespace homoshear
