#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "homoshear/moment_dynamics.hpp"

namespace homoshear {

/// Roots of the reduced cubic g(y) = y^3 - 3 C2 y^2 - 2 C2 K^2 (y = lambda + C1).
struct CubicRoots {
  double ybar = 0.0;               // the unique real root, > 0
  std::complex<double> pair{};     // a + ib with a < 0, b > 0; the other root is its conjugate

  /// Residuals of the three Viete relations, each relative to its largest term.
  std::array<double, 3> viete_residuals(double C2, double K) const;
};

CubicRoots reduced_cubic_roots(double C2, double K);

/// g(y) evaluated with compensated (error-free transformation) Horner.
double reduced_cubic(double C2, double K, double y);

struct SpectralReport {
  double C1 = 0.0;
  double C2 = 0.0;
  double K = 0.0;
  std::vector<std::complex<double>> eigenvalues;  // six, with multiplicity
  double max_real_part = 0.0;
  double K0 = 0.0;
  bool stable = false;
  std::optional<double> mu;  // present iff K > K0
};

/// Spectrum from the factorization p(lambda) = (lambda + C1)^3 g(lambda + C1).
SpectralReport eigenvalues(double C1, double C2, double K);

/// Eigenvalues of the dense 6x6 operator matrix (independent route).
std::vector<std::complex<double>> dense_eigenvalues(double C1, double C2, double K);

/// Critical shear K0 = C1 sqrt((C1 - 3 C2) / (2 C2)), where ybar(K0) = C1.
double find_K0(double C1, double C2);

/// K0 by bisection on ybar(K) - C1.
double find_K0_bisection(double C1, double C2);

/// K0 by bisection on the sign of max Re of the dense eigenvalues.
double find_K0_dense(double C1, double C2);

/// Growing mode above the threshold: A(M) = mu M with m13 = m23 = 0, m11 = 1.
struct GrowingMode {
  double mu = 0.0;
  MomentMatrix eigvec;
};

GrowingMode growing_mode(double C1, double C2, double K);

/// Parameters of g(dv) = F0(A1 v1^2 + A2 v2^2 + A3 v3^2) dv + beta_mass delta(v - (1,1,0))
/// with F0 the standard Gaussian profile (unit second moments per axis).
struct ReconstructionParams {
  double A1 = 0.0;
  double A2 = 0.0;
  double A3 = 0.0;
  double beta_mass = 0.0;
  Vec3 vbar{1.0, 1.0, 0.0};

  /// Second moments generated by these parameters.
  MomentMatrix moments() const;
};

ReconstructionParams reconstruct_measure(const GrowingMode& mode);

}  // namespace homoshear
