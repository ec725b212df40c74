#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>

#include "homoshear/kernels.hpp"
#include "homoshear/vec3.hpp"

namespace homoshear {

using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Symmetric 3x3 second-moment matrix stored as (m11, m12, m13, m22, m23, m33).
class MomentMatrix {
 public:
  MomentMatrix() = default;
  explicit MomentMatrix(const std::array<double, 6>& entries) : e_(entries) {}
  static MomentMatrix from_vec(const Vec6& v);
  static MomentMatrix from_matrix(const Mat3& m);
  static MomentMatrix identity(double scale = 1.0) { return MomentMatrix({scale, 0, 0, scale, 0, scale}); }
  static MomentMatrix outer(const Vec3& v) {
    return MomentMatrix({v.x * v.x, v.x * v.y, v.x * v.z, v.y * v.y, v.y * v.z, v.z * v.z});
  }

  double m11() const { return e_[0]; }
  double m12() const { return e_[1]; }
  double m13() const { return e_[2]; }
  double m22() const { return e_[3]; }
  double m23() const { return e_[4]; }
  double m33() const { return e_[5]; }

  /// Entry (j, k), zero-based.
  double operator()(int j, int k) const;
  double operator[](std::size_t i) const { return e_[i]; }
  double& operator[](std::size_t i) { return e_[i]; }
  const std::array<double, 6>& entries() const { return e_; }

  Vec6 vec() const { return Vec6(e_.data()); }
  Mat3 matrix() const;
  double trace() const { return e_[0] + e_[3] + e_[5]; }
  double min_eigenvalue() const;
  /// Max-abs over the six stored entries.
  double norm_inf() const;
  /// Positive semidefinite up to eigenvalues >= -tol.
  bool is_physical(double tol = 1e-10) const { return min_eigenvalue() >= -tol; }

 private:
  std::array<double, 6> e_{};
};

/// Index of (j, k) in the canonical 6-vector.
int moment_index(int j, int k);

/// Constant source c I in dM/dt = A(M) + c I.
enum class SourceConvention {
  unit_covariance,  // c = beta, consistent with a unit-temperature background
  paper_constant,   // c = beta / 3
};

double source_constant(const KernelMoments& moments, SourceConvention convention);

/// Linear operator M -> A(M) of the second-moment dynamics.
struct MomentOperator {
  double C1 = 0.0;  // (5 beta - 3 alpha) / 2
  double C2 = 0.0;  // (beta - alpha) / 2
  double K = 0.0;
  double source_c = 0.0;
  Mat6 matrix = Mat6::Zero();

  double beta() const { return C1 - 3.0 * C2; }
  Vec6 source() const;
  MomentMatrix apply(const MomentMatrix& m) const { return MomentMatrix::from_vec(Vec6(matrix * m.vec())); }
};

/// The 6x6 matrix of A for the given constants, rows in canonical order.
Mat6 operator_matrix(double C1, double C2, double K);

MomentOperator build_operator(const KernelMoments& moments, double K, double source_c);
MomentOperator build_operator(double C1, double C2, double K, double source_c);

/// Eigenvalue of A within 1e-10 of zero: no stationary state exists.
class ResonanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// exp(A) by scaling and squaring with the degree-13 Pade approximant (Higham 2005).
Mat6 expm_pade(const Mat6& a);
/// exp(A) through a complex eigendecomposition; used to audit expm_pade.
Mat6 expm_eigen(const Mat6& a);

/// Solves A(M) = -c I. Throws ResonanceError when A is singular.
MomentMatrix stationary_moments(const MomentOperator& op);

/// M(t) = e^{tA}(M0 - M_st) + M_st.
MomentMatrix evolve(const MomentOperator& op, const MomentMatrix& m0, double t);

/// Closed-form trace m(t) = 3c/beta + (m0 - 3c/beta) e^{-beta t}; only valid at K = 0.
double trace_solution(const MomentOperator& op, double m0, double t);

/// sup_t ||M(t)||_inf <= c_bar ||M0||_inf + c_tilde for a stable operator, with the
/// constants read off the eigendecomposition A = V diag(lambda) V^{-1}.
struct MomentBound {
  double c_bar = 0.0;
  double c_tilde = 0.0;
};
MomentBound moment_bound_constants(const MomentOperator& op);

/// Pointwise Povzner-type estimate
///   |v'|^s - |v|^s <= -|v|^s + Cs (|v|^{s-1}|v_*| + |v_*|^{s-1}|v|)
/// with v' from the collision rule. At v = 0 the check passes iff v_* = 0.
bool povzner_check(const Vec3& v, const Vec3& v_star, const Vec3& omega, double s, double cs);

/// Smallest power-of-two Cs passing povzner_check on n_samples quasi-random
/// triples with |v|, |v_*| log-uniform in [0.01, 100]. Throws past 2^16.
double find_povzner_constant(double s, std::size_t n_samples, std::uint64_t seed = 0);

/// The sampling domain shared by the constant search and its validation.
struct PovznerTriple {
  Vec3 v;
  Vec3 v_star;
  Vec3 omega;
};
/// Maps eight numbers in [0, 1) to a triple.
PovznerTriple povzner_triple(const std::array<double, 8>& u);

}  // namespace homoshear
