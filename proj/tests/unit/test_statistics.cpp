#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "homoshear/rng.hpp"
#include "homoshear/statistics.hpp"

using namespace homoshear;

TEST_CASE("running stats against two-pass formulas") {
  const std::vector<double> x = {1e8 + 1, 1e8 + 2, 1e8 + 4, 1e8 + 7, 1e8 + 11};
  RunningStats s, a, b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.add(x[i]);
    (i < 2 ? a : b).add(x[i]);
  }
  double mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size() - 1;
  CHECK(s.mean() == doctest::Approx(mean).epsilon(1e-15));
  CHECK(s.variance() == doctest::Approx(var).epsilon(1e-9));
  CHECK(s.standard_error() == doctest::Approx(std::sqrt(var / x.size())).epsilon(1e-9));
  a.merge(b);
  CHECK(a.count() == 5);
  CHECK(a.mean() == doctest::Approx(mean).epsilon(1e-15));
  CHECK(a.variance() == doctest::Approx(var).epsilon(1e-9));
  RunningStats empty;
  empty.merge(s);
  CHECK(empty.variance() == doctest::Approx(var).epsilon(1e-9));
  RunningStats one;
  one.add(3);
  CHECK(one.variance() == 0.0);
}

TEST_CASE("Kolmogorov-Smirnov") {
  CHECK(ks_two_sample({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_two_sample({1, 2, 3}, {4, 5, 6}) == 1.0);
  CHECK(ks_two_sample({1, 3}, {2, 4}) == doctest::Approx(0.5));
  CHECK(ks_one_sample({0.5}, [](double x) { return x; }) == doctest::Approx(0.5));
  CHECK(ks_pvalue(0.0, 100) == doctest::Approx(1.0));
  // 5% critical value of the Kolmogorov distribution
  CHECK(ks_pvalue(1.3581 / std::sqrt(1e6), 1e6) == doctest::Approx(0.05).epsilon(1e-3));
  CounterRng rng(1, 0);
  std::vector<double> u(20000);
  for (auto& x : u) x = rng.uniform();
  CHECK(ks_pvalue(ks_one_sample(u, [](double x) { return x; }), u.size()) > 1e-3);
}

TEST_CASE("chi-square tail") {
  for (double x : {0.1, 1.0, 5.0, 20.0}) CHECK(chi_square_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-12));
  CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
}

TEST_CASE("exponential goodness of fit") {
  CounterRng rng(2, 0);
  std::vector<double> e(50000), wrong(50000);
  for (auto& x : e) x = rng.exponential(3.0);
  for (auto& x : wrong) x = rng.exponential(3.3);
  const auto good = exponential_gof(e, 3.0);
  CHECK(good.dof == 49);
  CHECK(good.p_value > 1e-3);
  CHECK(exponential_gof(wrong, 3.0).p_value < 1e-6);
  CHECK_THROWS(exponential_gof(std::vector<double>(10, 1.0), 1.0));
}

TEST_CASE("line fits") {
  const std::vector<double> x = {0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2.5 - 0.75 * v);
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(-0.75));
  CHECK(f.intercept == doctest::Approx(2.5));
  CHECK(f.slope_se == doctest::Approx(0.0).scale(1.0));
  std::vector<double> t, g;
  for (int i = 0; i <= 20; ++i) {
    t.push_back(0.1 * i);
    // transient early, pure exponential later
    g.push_back(std::exp(1.7 * t.back()) + (i < 5 ? 50.0 : 0.0));
  }
  CHECK(fit_growth_rate(t, g).slope == doctest::Approx(1.7).epsilon(1e-12));
}
