#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "homoshear/rng.hpp"
#include "homoshear/vec3.hpp"

namespace homoshear {

enum class AngularPreset { constant, quadratic, tabulated };

/// Cut-off collision kernel B(n.w, |V|) = b(n.w) |V|^gamma with 0 <= gamma < 1.
///
/// The angular part b is taken without any 1/(4 pi) prefactor, so for
/// gamma = 0 the scattering rate equals the angular mass ||b||_{L1(S^2)}.
/// A kernel is immutable after construction and may be shared across threads.
class CollisionKernel {
 public:
  /// b(x) = value.
  static CollisionKernel constant(double gamma = 0.0, double value = 1.0);
  /// b(x) = x^2.
  static CollisionKernel quadratic(double gamma = 0.0);
  /// Piecewise-linear b through (x_i, b_i); x strictly increasing and covering [-1, 1].
  static CollisionKernel tabulated(std::vector<double> x, std::vector<double> b, double gamma = 0.0);
  /// Two-column CSV (x, b(x)); lines starting with '#' or a non-numeric header are skipped.
  static CollisionKernel from_csv(const std::string& path, double gamma = 0.0);
  /// "constant" or "quadratic".
  static CollisionKernel from_preset(std::string_view name, double gamma = 0.0);

  /// Angular part b(x), x = n.w in [-1, 1].
  double angular(double x) const;
  double gamma() const { return gamma_; }
  double b_max() const { return b_max_; }
  AngularPreset preset() const { return preset_; }
  std::string name() const;

  /// Kinks of b (tabulation nodes inside (-1, 1)); empty for smooth presets.
  const std::vector<double>& breakpoints() const;

 private:
  struct Table {
    std::vector<double> x;
    std::vector<double> b;
  };

  CollisionKernel(AngularPreset preset, double gamma, double scale, std::shared_ptr<const Table> table);

  AngularPreset preset_;
  double gamma_;
  double scale_;
  double b_max_;
  std::shared_ptr<const Table> table_;
};

/// Angular moments alpha = 2 pi int b x^4, beta = 2 pi int b x^2, b_l1 = 2 pi int b.
struct KernelMoments {
  double alpha = 0.0;
  double beta = 0.0;
  double b_l1 = 0.0;
};

KernelMoments kernel_moments(const CollisionKernel& kernel);

/// E[|v - v_*|^gamma] for v_* standard normal in R^3 and |v| = speed.
/// Radial quadrature over the non-central chi(3) density; valid for gamma >= 0.
double relative_speed_moment(double gamma, double speed);

/// Scattering rate nu(|v|) = ||b||_{L1} E[|v - v_*|^gamma].
double scattering_rate(const CollisionKernel& kernel, double speed);

/// nu(r) tabulated on a grid uniform in log(1 + r), cubic interpolation
/// inside the table and exact recomputation beyond r_max.
class ScatteringRateTable {
 public:
  explicit ScatteringRateTable(const CollisionKernel& kernel, double r_max = 1e3, double log_step = 0.02);
  double operator()(double speed) const;
  double r_max() const { return r_max_; }

 private:
  CollisionKernel kernel_;
  double b_l1_;
  double r_max_;
  double step_;
  std::vector<double> values_;
};

/// G(R) = E[(R + |v_*|)^gamma], the radial factor of the thinning majorant.
/// lookup() rounds R up to the next grid node so the returned bound dominates.
class MajorantTable {
 public:
  explicit MajorantTable(double gamma, double r_max = 1e4, double log_step = 0.01);

  struct Entry {
    double radius;  // grid node >= requested radius
    double value;   // G(radius)
  };
  Entry lookup(double radius) const;
  double gamma() const { return gamma_; }

  /// Direct quadrature of G(R).
  static double evaluate(double gamma, double radius);

 private:
  double gamma_;
  double r_max_;
  double step_;
  std::vector<double> values_;
};

/// Draws v_* from the unit-temperature Maxwellian background.
Vec3 sample_background(CounterRng& rng);

/// Draws x = n.w with density proportional to b(x) on [-1, 1].
double sample_scatter_cosine(const CollisionKernel& kernel, CounterRng& rng);

/// Draws w on S^2 with density proportional to b(n.w), n = (v - v_*)/|v - v_*|.
/// Throws std::invalid_argument when v == v_*.
Vec3 sample_scatter_direction(const CollisionKernel& kernel, const Vec3& v, const Vec3& v_star,
                              CounterRng& rng);

/// Unit vector x n + sqrt(1 - x^2)(cos(phi) e1 + sin(phi) e2) around unit n.
Vec3 direction_about(const Vec3& n, double cos_angle, double azimuth);

struct CollisionOutcome {
  Vec3 v_prime;
  Vec3 v_star_prime;
};

/// v' = v - ((v - v_*).w) w, v_*' = v_* + ((v - v_*).w) w.
inline CollisionOutcome apply_collision(const Vec3& v, const Vec3& v_star, const Vec3& omega) {
  const double p = dot(v - v_star, omega);
  return {v - p * omega, v_star + p * omega};
}

}  // namespace homoshear
