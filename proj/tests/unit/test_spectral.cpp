#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "homoshear/moment_dynamics.hpp"
#include "homoshear/rng.hpp"
#include "homoshear/spectral.hpp"

using namespace homoshear;

namespace {

struct Consts {
  double C1, C2;
};

Consts from_ab(double alpha, double beta) { return {(5 * beta - 3 * alpha) / 2, (beta - alpha) / 2}; }

const Consts kConst = [] {
  const auto op = build_operator(kernel_moments(CollisionKernel::constant()), 0, 0);
  return Consts{op.C1, op.C2};
}();

// Greedy matching of two eigenvalue multisets; returns the worst distance.
double multiset_distance(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
  double worst = 0;
  for (auto z : a) {
    auto it = std::min_element(b.begin(), b.end(),
                               [&](auto p, auto q) { return std::abs(p - z) < std::abs(q - z); });
    worst = std::max(worst, std::abs(*it - z));
    b.erase(it);
  }
  return worst;
}

}  // namespace

TEST_CASE("closed-form spectrum equals the dense eigensolver") {
  CounterRng rng(11, 0);
  for (int i = 0; i < 50; ++i) {
    const double alpha = 0.1 + 5 * rng.uniform();
    const double beta = alpha * (1.05 + 3 * rng.uniform());
    const auto [C1, C2] = from_ab(alpha, beta);
    const double K = std::exp(std::log(1e-2) + rng.uniform() * std::log(1e5));
    const auto rep = eigenvalues(C1, C2, K);
    REQUIRE(rep.eigenvalues.size() == 6);
    const double scale = C1 + std::cbrt(C2 * K * K) + K;
    // triple roots of the dense route are only resolved to the cube root of eps
    CHECK(multiset_distance(rep.eigenvalues, dense_eigenvalues(C1, C2, K)) < 1e-4 * scale);
    double mx = -INFINITY;
    for (auto z : rep.eigenvalues) mx = std::max(mx, z.real());
    CHECK(rep.max_real_part == doctest::Approx(mx));
  }
}

TEST_CASE("reduced cubic roots satisfy the Viete relations") {
  CounterRng rng(12, 0);
  for (int i = 0; i < 200; ++i) {
    const double C2 = std::exp(6 * rng.uniform() - 3), K = std::exp(14 * rng.uniform() - 7);
    const auto r = reduced_cubic_roots(C2, K);
    CHECK(r.ybar > 0);
    CHECK(r.pair.real() < 0);
    CHECK(r.pair.imag() > 0);
    for (double res : r.viete_residuals(C2, K)) CHECK(res < 1e-12);
    CHECK(std::abs(reduced_cubic(C2, K, r.ybar)) <= 1e-12 * std::pow(r.ybar, 3));
  }
  // K -> 0: g(y) = y^2 (y - 3 C2)
  CHECK(reduced_cubic_roots(1.0, 1e-8).ybar == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("threshold: closed form, bisection and dense agree") {
  const double k0 = find_K0(kConst.C1, kConst.C2);
  CHECK(k0 == doctest::Approx(10.596894150182).epsilon(1e-11));
  CHECK(find_K0_bisection(kConst.C1, kConst.C2) == doctest::Approx(k0).epsilon(1e-10));
  CHECK(find_K0_dense(kConst.C1, kConst.C2) == doctest::Approx(k0).epsilon(1e-8));
  CHECK(reduced_cubic_roots(kConst.C2, k0).ybar == doctest::Approx(kConst.C1).epsilon(1e-13));
}

TEST_CASE("stability flips exactly once across the threshold") {
  const double k0 = find_K0(kConst.C1, kConst.C2);
  int flips = 0;
  bool prev = true;
  for (int i = 0; i <= 400; ++i) {
    const double K = 3 * k0 * i / 400.0;
    const auto rep = eigenvalues(kConst.C1, kConst.C2, K);
    if (rep.stable != prev) ++flips;
    prev = rep.stable;
    CHECK(rep.stable == (K < k0));
    CHECK(rep.mu.has_value() == (K > k0));
  }
  CHECK(flips == 1);
  const auto zero = eigenvalues(kConst.C1, kConst.C2, 0.0);
  CHECK(zero.max_real_part == doctest::Approx(-(kConst.C1 - 3 * kConst.C2)));
  const auto two = eigenvalues(kConst.C1, kConst.C2, 2 * k0);
  CHECK(*two.mu == doctest::Approx(3.31364574).epsilon(1e-8));
}

TEST_CASE("growing mode closed form") {
  const double k0 = find_K0(kConst.C1, kConst.C2);
  for (double f : {1.01, 1.5, 2.0, 10.0, 1e3}) {
    const double K = f * k0;
    const auto g = growing_mode(kConst.C1, kConst.C2, K);
    const double yb = reduced_cubic_roots(kConst.C2, K).ybar;
    CHECK(g.mu == doctest::Approx(yb - kConst.C1).epsilon(1e-12));
    CHECK(g.eigvec.m11() == doctest::Approx(1.0));
    CHECK(g.eigvec.m13() == 0.0);
    CHECK(g.eigvec.m23() == 0.0);
    const double m22 = kConst.C2 / (yb - 2 * kConst.C2);
    CHECK(g.eigvec.m22() == doctest::Approx(m22).epsilon(1e-10));
    CHECK(g.eigvec.m12() == doctest::Approx(-K * m22 / yb).epsilon(1e-10));
    CHECK(g.eigvec.m33() == doctest::Approx(m22).epsilon(1e-10));
    // it is an eigenvector of the full operator
    const auto op = build_operator(kConst.C1, kConst.C2, K, 0.0);
    const auto a = op.apply(g.eigvec);
    for (int k = 0; k < 6; ++k) CHECK(a[k] == doctest::Approx(g.mu * g.eigvec[k]).epsilon(1e-9).scale(1e-12));
  }
  CHECK_THROWS_AS(growing_mode(kConst.C1, kConst.C2, 0.5 * k0), std::domain_error);
}

TEST_CASE("growing mode is positive definite") {
  const double k0 = find_K0(kConst.C1, kConst.C2);
  for (double f : {1.5, 10.0, 1e3}) CHECK(growing_mode(kConst.C1, kConst.C2, f * k0).eigvec.min_eigenvalue() > 0);
}

TEST_CASE("large shear scaling") {
  const double K = 1e6;
  const auto g = growing_mode(kConst.C1, kConst.C2, K);
  const double th = std::cbrt(2 * kConst.C2);
  CHECK(g.mu / std::pow(K, 2.0 / 3) == doctest::Approx(th).epsilon(2e-3));
  CHECK(std::cbrt(K) * g.eigvec.m12() == doctest::Approx(-th / 2).epsilon(2e-3));
  CHECK(std::pow(K, 2.0 / 3) * g.eigvec.m22() == doctest::Approx(th * th / 2).epsilon(2e-3));
}

TEST_CASE("reconstruction") {
  const auto iso = reconstruct_measure({0.0, MomentMatrix::identity()});
  CHECK(iso.A1 == doctest::Approx(1.0));
  CHECK(iso.A2 == doctest::Approx(1.0));
  CHECK(iso.A3 == doctest::Approx(1.0));
  CHECK(iso.beta_mass == 0.0);
  const double k0 = find_K0(kConst.C1, kConst.C2);
  for (double f : {1.5, 10.0, 1e3}) {
    const auto g = growing_mode(kConst.C1, kConst.C2, f * k0);
    const auto p = reconstruct_measure(g);
    CHECK(p.A1 > 0);
    CHECK(p.A2 > 0);
    CHECK(p.A3 > 0);
    const auto back = p.moments();
    for (int k = 0; k < 6; ++k) CHECK(back[k] == doctest::Approx(g.eigvec[k]).epsilon(1e-10).scale(1e-14));
  }
  CHECK_THROWS_AS(reconstruct_measure({0.0, MomentMatrix({1, 2, 0, 1, 0, 1})}), std::domain_error);
}
