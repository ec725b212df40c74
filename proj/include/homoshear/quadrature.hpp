#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace homoshear {

/// Raised when node doubling does not reach the requested tolerance.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Rules are computed once per order and cached; the reference stays valid
/// for the lifetime of the program.
const GaussLegendreRule& gauss_legendre(int order);

struct QuadratureOptions {
  double rel_tol = 1e-13;
  double abs_tol = 1e-300;
  int min_order = 8;
  int max_order = 4096;
};

/// Integrates f over [a, b], splitting at the given interior breakpoints.
/// On every panel the Gauss-Legendre order is doubled until two successive
/// estimates agree to rel_tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 std::span<const double> breakpoints = {}, const QuadratureOptions& opts = {});

}  // namespace homoshear
