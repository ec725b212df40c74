#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "homoshear/rng.hpp"
#include "homoshear/statistics.hpp"

using namespace homoshear;

// Known-answer vectors published with the Random123 reference implementation.
TEST_CASE("philox4x32-10 known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  CHECK(philox4x32(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
  CounterRng a(5, 3), b(5, 3), c(5, 4), d(6, 3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a();
    CHECK(x == b());
    seen.insert(x);
    seen.insert(c());
    seen.insert(d());
  }
  CHECK(seen.size() == 3000);
}

TEST_CASE("uniform range and moments") {
  CounterRng rng(1, 0);
  RunningStats s;
  for (int i = 0; i < 200000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s.add(u);
  }
  CHECK(std::abs(s.mean() - 0.5) < 5 * std::sqrt(1.0 / 12 / 200000));
  CHECK(s.variance() == doctest::Approx(1.0 / 12).epsilon(0.01));
  CounterRng p(1, 1);
  for (int i = 0; i < 10000; ++i) CHECK(p.uniform_pos() > 0.0);
}

TEST_CASE("normal and exponential moments") {
  CounterRng rng(2, 0);
  RunningStats n, n4, e;
  for (int i = 0; i < 400000; ++i) {
    const double z = rng.normal();
    n.add(z);
    n4.add(z * z * z * z);
    e.add(rng.exponential(2.5));
  }
  CHECK(std::abs(n.mean()) < 5 * n.standard_error());
  CHECK(n.variance() == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(n4.mean() - 3.0) < 5 * n4.standard_error());
  CHECK(std::abs(e.mean() - 0.4) < 5 * e.standard_error());
}

TEST_CASE("gamma sampler mean and variance") {
  for (double shape : {1.0, 1.75, 4.0}) {
    CounterRng rng(3, static_cast<std::uint64_t>(shape * 100));
    RunningStats s;
    for (int i = 0; i < 200000; ++i) s.add(rng.gamma_shape_ge1(shape));
    CHECK(std::abs(s.mean() - shape) < 5 * s.standard_error());
    CHECK(s.variance() == doctest::Approx(shape).epsilon(0.03));
  }
}

TEST_CASE("block counter advances once per two draws") {
  CounterRng rng(9, 9);
  for (int i = 0; i < 10; ++i) rng();
  CHECK(rng.blocks_used() == 5);
}
