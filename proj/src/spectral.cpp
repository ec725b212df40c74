#include "homoshear/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Eigenvalues>

namespace homoshear {

namespace {

// Error-free transformations for compensated Horner.
void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  const double bb = s - a;
  e = (a - (s - bb)) + (b - bb);
}

void two_prod(double a, double b, double& p, double& e) {
  p = a * b;
  e = std::fma(a, b, -p);
}

double bisect(const std::function<double(double)>& f, double lo, double hi) {
  // f(lo) < 0 < f(hi)
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double bracket_and_bisect(const std::function<double(double)>& f, double guess) {
  double hi = std::max(guess, 1.0);
  while (f(hi) <= 0.0) hi *= 2.0;
  return bisect(f, 0.0, hi);
}

}  // namespace

double reduced_cubic(double C2, double K, double y) {
  const double coeffs[] = {1.0, -3.0 * C2, 0.0, -2.0 * C2 * K * K};
  double s = coeffs[0];
  double c = 0.0;
  for (int i = 1; i < 4; ++i) {
    double p, pe, se;
    two_prod(s, y, p, pe);
    two_sum(p, coeffs[i], s, se);
    c = c * y + (pe + se);
  }
  return s + c;
}

std::array<double, 3> CubicRoots::viete_residuals(double C2, double K) const {
  const double a = pair.real();
  const double r2 = std::norm(pair);
  const double s1 = std::max({std::abs(ybar), std::abs(2 * a), 3 * C2});
  const double s2 = std::max(std::abs(2 * ybar * a), r2);
  const double s3 = 2 * C2 * K * K;
  return {std::abs(ybar + 2 * a - 3 * C2) / s1, std::abs(2 * ybar * a + r2) / s2,
          std::abs(ybar * r2 - 2 * C2 * K * K) / s3};
}

CubicRoots reduced_cubic_roots(double C2, double K) {
  if (!(C2 > 0.0) || !(K > 0.0)) throw std::invalid_argument("reduced cubic requires C2 > 0 and K > 0");
  // y = z + C2 gives z^3 - 3 C2^2 z - 2 C2 (C2^2 + K^2); both Cardano terms are positive.
  const double u = std::cbrt(C2 * C2 * C2 + C2 * K * K + C2 * K * std::sqrt(K * K + 2.0 * C2 * C2));
  double y = C2 + u + C2 * C2 / u;
  for (int it = 0; it < 2; ++it) {
    const double d = 3.0 * y * y - 6.0 * C2 * y;
    const double step = reduced_cubic(C2, K, y) / d;
    if (!std::isfinite(step)) break;
    y -= step;
  }
  // y - 3 C2 = 2 C2 K^2 / y^2 at the root; avoids cancellation for small K
  const double q = C2 * K * K / y;
  const double a = -q / y;
  const double b = std::sqrt(std::max(0.0, q * (2.0 - q / (y * y))));
  return {y, {a, b}};
}

double find_K0(double C1, double C2) {
  if (!(C2 > 0.0) || !(C1 > 3.0 * C2)) throw std::invalid_argument("threshold requires C1 > 3 C2 > 0");
  return C1 * std::sqrt((C1 - 3.0 * C2) / (2.0 * C2));
}

double find_K0_bisection(double C1, double C2) {
  return bracket_and_bisect([&](double K) { return K == 0.0 ? 3 * C2 - C1 : reduced_cubic_roots(C2, K).ybar - C1; },
                            C1);
}

std::vector<std::complex<double>> dense_eigenvalues(double C1, double C2, double K) {
  Eigen::EigenSolver<Mat6> es(operator_matrix(C1, C2, K), false);
  std::vector<std::complex<double>> out(6);
  for (int i = 0; i < 6; ++i) out[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  return out;
}

double find_K0_dense(double C1, double C2) {
  auto max_re = [&](double K) {
    double m = -INFINITY;
    for (auto z : dense_eigenvalues(C1, C2, K)) m = std::max(m, z.real());
    return m;
  };
  return bracket_and_bisect(max_re, C1);
}

SpectralReport eigenvalues(double C1, double C2, double K) {
  if (!(C1 > 0.0) || !(C2 > 0.0) || !(K >= 0.0)) throw std::invalid_argument("spectrum requires C1, C2 > 0 and K >= 0");
  SpectralReport r;
  r.C1 = C1;
  r.C2 = C2;
  r.K = K;
  r.K0 = find_K0(C1, C2);
  if (K == 0.0) {
    r.eigenvalues.assign(5, {-C1, 0.0});
    r.eigenvalues.push_back({3.0 * C2 - C1, 0.0});
    r.max_real_part = std::max(-C1, 3.0 * C2 - C1);
  } else {
    const auto roots = reduced_cubic_roots(C2, K);
    r.eigenvalues.assign(3, {-C1, 0.0});
    r.eigenvalues.push_back({roots.ybar - C1, 0.0});
    r.eigenvalues.push_back(roots.pair - C1);
    r.eigenvalues.push_back(std::conj(roots.pair) - C1);
    r.max_real_part = roots.ybar - C1;
  }
  r.stable = K < r.K0 && r.max_real_part < 0.0;
  if (K > r.K0 && r.max_real_part > 0.0) r.mu = r.max_real_part;
  return r;
}

GrowingMode growing_mode(double C1, double C2, double K) {
  const auto report = eigenvalues(C1, C2, K);
  if (!report.mu) throw std::domain_error("growing mode exists only for K > K0");
  const double mu = *report.mu;
  static constexpr int idx4[] = {0, 1, 3, 5};
  const Mat6 a = operator_matrix(C1, C2, K);
  Eigen::Matrix<double, 5, 4> sys;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) sys(i, j) = a(idx4[i], idx4[j]) - (i == j ? mu : 0.0);
  sys.row(4) << 1.0, 0.0, 0.0, 0.0;
  Eigen::Matrix<double, 5, 1> rhs = Eigen::Matrix<double, 5, 1>::Zero();
  rhs(4) = 1.0;
  const auto qr = sys.colPivHouseholderQr();
  Eigen::Vector4d x = qr.solve(rhs);
  x += qr.solve(Eigen::Matrix<double, 5, 1>(rhs - sys * x));
  x /= x(0);
  return {mu, MomentMatrix({x(0), x(1), 0.0, x(2), 0.0, x(3)})};
}

MomentMatrix ReconstructionParams::moments() const {
  const double root = std::sqrt(A1 * A2 * A3);
  return MomentMatrix({1.0 / (A1 * root) + beta_mass, beta_mass, 0.0, 1.0 / (A2 * root) + beta_mass, 0.0,
                       1.0 / (A3 * root)});
}

ReconstructionParams reconstruct_measure(const GrowingMode& mode) {
  const auto& m = mode.eigvec;
  const double beta = m.m12();
  const double x = m.m11() - beta;
  const double y = m.m22() - beta;
  const double z = m.m33();
  if (!(x > 0.0 && y > 0.0 && z > 0.0))
    throw std::domain_error("reconstruction needs m11 - m12 > 0, m22 - m12 > 0, m33 > 0");
  ReconstructionParams p;
  p.beta_mass = beta;
  p.A3 = std::pow(y * x / (z * z * z * z), 0.2);
  p.A2 = p.A3 * z / y;
  p.A1 = 1.0 / (p.A2 * p.A3 * p.A3 * p.A3 * z * z);
  return p;
}

}  // namespace homoshear
