#include "homoshear/moment_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace homoshear {

MomentMatrix MomentMatrix::from_vec(const Vec6& v) {
  MomentMatrix m;
  for (int i = 0; i < 6; ++i) m.e_[static_cast<std::size_t>(i)] = v(i);
  return m;
}

MomentMatrix MomentMatrix::from_matrix(const Mat3& m) {
  return MomentMatrix({m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)), m(1, 1),
                       0.5 * (m(1, 2) + m(2, 1)), m(2, 2)});
}

int moment_index(int j, int k) {
  static constexpr int table[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  return table[j][k];
}

double MomentMatrix::operator()(int j, int k) const {
  return e_[static_cast<std::size_t>(moment_index(j, k))];
}

Mat3 MomentMatrix::matrix() const {
  Mat3 m;
  m << e_[0], e_[1], e_[2], e_[1], e_[3], e_[4], e_[2], e_[4], e_[5];
  return m;
}

double MomentMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Mat3> es(matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double MomentMatrix::norm_inf() const {
  double n = 0.0;
  for (double x : e_) n = std::max(n, std::abs(x));
  return n;
}

double source_constant(const KernelMoments& moments, SourceConvention convention) {
  return convention == SourceConvention::unit_covariance ? moments.beta : moments.beta / 3.0;
}

Vec6 MomentOperator::source() const {
  Vec6 s;
  s << source_c, 0, 0, source_c, 0, source_c;
  return s;
}

Mat6 operator_matrix(double C1, double C2, double K) {
  Mat6 a;
  // clang-format off
  a << C2 - C1, -2 * K,   0,       C2,      0,   C2,
       0,       -C1,      0,       -K,      0,   0,
       0,       0,        -C1,     0,       -K,  0,
       C2,      0,        0,       C2 - C1, 0,   C2,
       0,       0,        0,       0,       -C1, 0,
       C2,      0,        0,       C2,      0,   C2 - C1;
  // clang-format on
  return a;
}

MomentOperator build_operator(double C1, double C2, double K, double source_c) {
  if (K < 0.0) throw std::invalid_argument("shear rate K must be nonnegative");
  return {C1, C2, K, source_c, operator_matrix(C1, C2, K)};
}

MomentOperator build_operator(const KernelMoments& moments, double K, double source_c) {
  const double C1 = -(3.0 * moments.alpha - 5.0 * moments.beta) / 2.0;
  const double C2 = (moments.beta - moments.alpha) / 2.0;
  return build_operator(C1, C2, K, source_c);
}

Mat6 expm_pade(const Mat6& a) {
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  const Mat6 x = a / std::ldexp(1.0, squarings);
  const Mat6 id = Mat6::Identity();
  const Mat6 x2 = x * x;
  const Mat6 x4 = x2 * x2;
  const Mat6 x6 = x4 * x2;
  const Mat6 u = x * (x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * id);
  const Mat6 v = x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * id;
  Mat6 r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

Mat6 expm_eigen(const Mat6& a) {
  Eigen::EigenSolver<Mat6> es(a);
  const Eigen::Matrix<std::complex<double>, 6, 6> vecs = es.eigenvectors();
  Eigen::Matrix<std::complex<double>, 6, 1> d = es.eigenvalues().array().exp();
  return (vecs * d.asDiagonal() * vecs.inverse()).real();
}

namespace {

void check_not_resonant(const MomentOperator& op) {
  Eigen::EigenSolver<Mat6> es(op.matrix, false);
  for (int i = 0; i < 6; ++i)
    if (std::abs(es.eigenvalues()(i)) < 1e-10)
      throw ResonanceError("moment operator has an eigenvalue at zero (K at the stability threshold)");
}

}  // namespace

MomentMatrix stationary_moments(const MomentOperator& op) {
  check_not_resonant(op);
  Eigen::FullPivLU<Mat6> lu(op.matrix);
  if (!lu.isInvertible()) throw ResonanceError("moment operator is singular");
  const Vec6 rhs = -op.source();
  Vec6 x = lu.solve(rhs);
  // one step of iterative refinement
  x += lu.solve(Vec6(rhs - op.matrix * x));
  return MomentMatrix::from_vec(x);
}

MomentMatrix evolve(const MomentOperator& op, const MomentMatrix& m0, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("evolve requires t >= 0");
  if (t == 0.0) return m0;
  const Vec6 st = stationary_moments(op).vec();
  return MomentMatrix::from_vec(Vec6(expm_pade(t * op.matrix) * (m0.vec() - st) + st));
}

double trace_solution(const MomentOperator& op, double m0, double t) {
  if (op.K != 0.0) throw std::invalid_argument("closed-form trace dynamics hold only at K = 0");
  const double beta = op.beta();
  const double limit = 3.0 * op.source_c / beta;
  return limit + (m0 - limit) * std::exp(-beta * t);
}

MomentBound moment_bound_constants(const MomentOperator& op) {
  // (13, 23) form a Jordan block for K > 0; the (11, 12, 22, 33) block is
  // diagonalizable. Bound each block separately.
  static constexpr int idx4[] = {0, 1, 3, 5};
  Eigen::Matrix4d a4;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a4(i, j) = op.matrix(idx4[i], idx4[j]);
  Eigen::EigenSolver<Eigen::Matrix4d> es(a4);
  for (int i = 0; i < 4; ++i)
    if (!(es.eigenvalues()(i).real() < 0.0)) throw std::domain_error("moment operator is not stable");
  const Eigen::Matrix4cd v = es.eigenvectors();
  const Eigen::Matrix4cd vinv = v.inverse();
  auto inf_norm = [](const Eigen::Matrix4cd& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); };
  const double kappa4 = inf_norm(v) * inf_norm(vinv);

  // ||exp(tJ)||_inf = e^{-C1 t}(1 + K t), maximised at t = 1/C1 - 1/K when K > C1.
  double jordan = 1.0;
  if (op.K > op.C1) jordan = (op.K / op.C1) * std::exp(op.C1 / op.K - 1.0);

  const double c_bar = std::max(kappa4, jordan);
  const double st = stationary_moments(op).norm_inf();
  return {c_bar, (c_bar + 1.0) * st};
}

bool povzner_check(const Vec3& v, const Vec3& v_star, const Vec3& omega, double s, double cs) {
  if (!(s > 2.0 && s < 3.0)) throw std::invalid_argument("Povzner exponent must lie in (2, 3)");
  const double nv = norm(v);
  const double ns = norm(v_star);
  if (nv == 0.0) return ns == 0.0;
  const Vec3 vp = apply_collision(v, v_star, omega).v_prime;
  const double lhs = std::pow(norm(vp), s) - std::pow(nv, s);
  const double rhs = -std::pow(nv, s) + cs * (std::pow(nv, s - 1.0) * ns + std::pow(ns, s - 1.0) * nv);
  return lhs <= rhs;
}

PovznerTriple povzner_triple(const std::array<double, 8>& u) {
  auto magnitude = [](double x) { return std::pow(10.0, -2.0 + 4.0 * x); };
  auto direction = [](double a, double b) {
    const double c = 2.0 * a - 1.0;
    const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double phi = 2.0 * std::numbers::pi * b;
    return Vec3{sn * std::cos(phi), sn * std::sin(phi), c};
  };
  // log-uniform on (0.01, 100]; u = 0 maps to the open end
  const double r = magnitude(1.0 - u[0]);
  const double rs = magnitude(1.0 - u[1]);
  return {r * direction(u[2], u[3]), rs * direction(u[4], u[5]), direction(u[6], u[7])};
}

double find_povzner_constant(double s, std::size_t n_samples, std::uint64_t seed) {
  if (!(s > 2.0 && s < 3.0)) throw std::invalid_argument("Povzner exponent must lie in (2, 3)");
  // Additive recurrence with the generalised golden ratio in 8 dimensions,
  // randomly shifted per seed (Cranley-Patterson).
  double phi = 1.5;
  for (int it = 0; it < 100; ++it) phi = std::pow(1.0 + phi, 1.0 / 9.0);
  std::array<double, 8> alpha{}, shift{};
  CounterRng rng(seed, 0x50565a4e);
  for (std::size_t d = 0; d < 8; ++d) {
    alpha[d] = std::fmod(std::pow(1.0 / phi, static_cast<double>(d + 1)), 1.0);
    shift[d] = rng.uniform();
  }
  constexpr double kLimit = 65536.0;
  double cs = 1.0;
  std::array<double, 8> u{};
  for (std::size_t n = 0; n < n_samples; ++n) {
    for (std::size_t d = 0; d < 8; ++d) u[d] = std::fmod(shift[d] + static_cast<double>(n + 1) * alpha[d], 1.0);
    const auto tri = povzner_triple(u);
    while (!povzner_check(tri.v, tri.v_star, tri.omega, s, cs)) {
      cs *= 2.0;
      if (cs > kLimit) throw std::runtime_error("Povzner constant search exceeded 2^16");
    }
  }
  return cs;
}

}  // namespace homoshear
