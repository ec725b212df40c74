#include "homoshear/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "homoshear/quadrature.hpp"

namespace homoshear {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInvSqrtTwoPi = 0.3989422804014327;  // 1/sqrt(2 pi)
constexpr double kGaussianReach = 12.0;                // e^{-72} tail is below double precision

std::vector<double> no_breakpoints;

bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) return false;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

}  // namespace

CollisionKernel::CollisionKernel(AngularPreset preset, double gamma, double scale,
                                 std::shared_ptr<const Table> table)
    : preset_(preset), gamma_(gamma), scale_(scale), b_max_(0.0), table_(std::move(table)) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("kernel homogeneity gamma must lie in [0, 1), got " + std::to_string(gamma));
  switch (preset_) {
    case AngularPreset::constant:
      if (!(scale_ > 0.0) || !std::isfinite(scale_))
        throw std::invalid_argument("constant angular kernel must be positive");
      b_max_ = scale_;
      break;
    case AngularPreset::quadratic:
      b_max_ = 1.0;
      break;
    case AngularPreset::tabulated:
      b_max_ = *std::max_element(table_->b.begin(), table_->b.end());
      if (!(b_max_ > 0.0)) throw std::invalid_argument("angular kernel is identically zero");
      break;
  }
}

CollisionKernel CollisionKernel::constant(double gamma, double value) {
  return CollisionKernel(AngularPreset::constant, gamma, value, nullptr);
}

CollisionKernel CollisionKernel::quadratic(double gamma) {
  return CollisionKernel(AngularPreset::quadratic, gamma, 1.0, nullptr);
}

CollisionKernel CollisionKernel::tabulated(std::vector<double> x, std::vector<double> b, double gamma) {
  if (x.size() != b.size() || x.size() < 2)
    throw std::invalid_argument("tabulated kernel needs at least two (x, b) pairs");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(b[i])) throw std::invalid_argument("tabulated kernel has non-finite entries");
    if (b[i] < 0.0) throw std::invalid_argument("tabulated kernel has negative values");
    if (i > 0 && !(x[i] > x[i - 1])) throw std::invalid_argument("tabulated kernel abscissae must be strictly increasing");
  }
  if (x.front() > -1.0 || x.back() < 1.0) throw std::invalid_argument("tabulated kernel must cover [-1, 1]");
  auto table = std::make_shared<Table>(Table{std::move(x), std::move(b)});
  return CollisionKernel(AngularPreset::tabulated, gamma, 1.0, std::move(table));
}

CollisionKernel CollisionKernel::from_csv(const std::string& path, double gamma) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open kernel table " + path);
  std::vector<double> xs, bs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected two columns");
    double x, b;
    bool ok = parse_double(std::string_view(line).substr(0, comma), x) &&
              parse_double(std::string_view(line).substr(comma + 1), b);
    if (!ok) {
      if (xs.empty()) continue;  // header
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not a number");
    }
    xs.push_back(x);
    bs.push_back(b);
  }
  return tabulated(std::move(xs), std::move(bs), gamma);
}

CollisionKernel CollisionKernel::from_preset(std::string_view name, double gamma) {
  if (name == "constant") return constant(gamma);
  if (name == "quadratic") return quadratic(gamma);
  throw std::invalid_argument("unknown kernel preset '" + std::string(name) + "'");
}

double CollisionKernel::angular(double x) const {
  switch (preset_) {
    case AngularPreset::constant:
      return scale_;
    case AngularPreset::quadratic:
      return x * x;
    case AngularPreset::tabulated: {
      const auto& tx = table_->x;
      const auto& tb = table_->b;
      if (x <= tx.front()) return tb.front();
      if (x >= tx.back()) return tb.back();
      auto it = std::upper_bound(tx.begin(), tx.end(), x);
      const std::size_t i = static_cast<std::size_t>(it - tx.begin());
      const double w = (x - tx[i - 1]) / (tx[i] - tx[i - 1]);
      return (1.0 - w) * tb[i - 1] + w * tb[i];
    }
  }
  return 0.0;
}

std::string CollisionKernel::name() const {
  switch (preset_) {
    case AngularPreset::constant:
      return "constant";
    case AngularPreset::quadratic:
      return "quadratic";
    case AngularPreset::tabulated:
      return "tabulated";
  }
  return "unknown";
}

const std::vector<double>& CollisionKernel::breakpoints() const {
  return table_ ? table_->x : no_breakpoints;
}

KernelMoments kernel_moments(const CollisionKernel& kernel) {
  const auto& br = kernel.breakpoints();
  auto moment = [&](int power) {
    return kTwoPi * integrate([&](double x) { return kernel.angular(x) * std::pow(x, power); }, -1.0, 1.0, br);
  };
  KernelMoments m{moment(4), moment(2), moment(0)};
  assert(m.alpha <= m.beta && m.beta <= m.b_l1);
  if (!(m.alpha > 0.0)) throw std::invalid_argument("kernel has vanishing angular moments");
  return m;
}

double relative_speed_moment(double gamma, double speed) {
  if (speed < 0.0) throw std::invalid_argument("speed must be nonnegative");
  if (gamma < 0.0) throw std::invalid_argument("relative_speed_moment requires gamma >= 0");
  if (gamma == 0.0) return 1.0;
  const double r = speed;
  auto density = [r](double rho) {
    // Non-central chi(3): (rho / r) [phi(rho - r) - phi(rho + r)].
    if (r == 0.0) return 2.0 * rho * rho * kInvSqrtTwoPi * std::exp(-0.5 * rho * rho);
    const double d = rho - r;
    return (rho / r) * kInvSqrtTwoPi * std::exp(-0.5 * d * d) * -std::expm1(-2.0 * rho * r);
  };
  const double lo = std::max(0.0, r - kGaussianReach);
  const double hi = r + kGaussianReach;
  const double br[] = {r - 4.0, r - 1.0, r, r + 1.0, r + 4.0};
  return integrate([&](double rho) { return std::pow(rho, gamma) * density(rho); }, lo, hi, br);
}

double scattering_rate(const CollisionKernel& kernel, double speed) {
  return kernel_moments(kernel).b_l1 * relative_speed_moment(kernel.gamma(), speed);
}

ScatteringRateTable::ScatteringRateTable(const CollisionKernel& kernel, double r_max, double log_step)
    : kernel_(kernel), b_l1_(kernel_moments(kernel).b_l1), r_max_(r_max), step_(log_step) {
  const auto n = static_cast<std::size_t>(std::ceil(std::log1p(r_max) / step_)) + 3;
  values_.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i)
    values_[i] = b_l1_ * relative_speed_moment(kernel.gamma(), std::expm1(i * step_));
}

double ScatteringRateTable::operator()(double speed) const {
  if (kernel_.gamma() == 0.0) return b_l1_;
  if (speed > r_max_) return b_l1_ * relative_speed_moment(kernel_.gamma(), speed);
  const double u = std::log1p(speed) / step_;
  // four-point Lagrange stencil i-1 .. i+2, clamped at the origin
  auto i = static_cast<long>(std::floor(u));
  i = std::clamp(i - 1, 0L, static_cast<long>(values_.size()) - 4);
  const double s = u - static_cast<double>(i);
  const double l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
  const double l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
  const double l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
  const double l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
  const auto* v = &values_[static_cast<std::size_t>(i)];
  return l0 * v[0] + l1 * v[1] + l2 * v[2] + l3 * v[3];
}

double MajorantTable::evaluate(double gamma, double radius) {
  if (gamma == 0.0) return 1.0;
  const double br[] = {1.0, 3.0};
  return integrate(
      [&](double rho) {
        return std::pow(radius + rho, gamma) * 2.0 * rho * rho * kInvSqrtTwoPi * std::exp(-0.5 * rho * rho);
      },
      0.0, kGaussianReach, br);
}

MajorantTable::MajorantTable(double gamma, double r_max, double log_step)
    : gamma_(gamma), r_max_(r_max), step_(log_step) {
  if (gamma_ == 0.0) return;
  const auto n = static_cast<std::size_t>(std::ceil(std::log1p(r_max) / step_)) + 1;
  values_.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) values_[i] = evaluate(gamma_, std::expm1(i * step_));
}

MajorantTable::Entry MajorantTable::lookup(double radius) const {
  if (gamma_ == 0.0) return {radius, 1.0};
  if (radius > r_max_) return {radius, evaluate(gamma_, radius)};
  auto i = static_cast<std::size_t>(std::ceil(std::log1p(radius) / step_));
  double node = std::expm1(i * step_);
  if (node < radius) node = std::expm1(++i * step_);
  return {node, values_[i]};
}

Vec3 sample_background(CounterRng& rng) {
  const double x = rng.normal();
  const double y = rng.normal();
  const double z = rng.normal();
  return {x, y, z};
}

double sample_scatter_cosine(const CollisionKernel& kernel, CounterRng& rng) {
  switch (kernel.preset()) {
    case AngularPreset::constant:
      return 2.0 * rng.uniform() - 1.0;
    case AngularPreset::quadratic:
      // CDF (x^3 + 1)/2
      return std::cbrt(2.0 * rng.uniform() - 1.0);
    case AngularPreset::tabulated:
      break;
  }
  const double bmax = kernel.b_max();
  for (;;) {
    const double x = 2.0 * rng.uniform() - 1.0;
    const double bx = kernel.angular(x);
    assert(bx <= bmax);
    if (rng.uniform() * bmax < bx) return x;
  }
}

Vec3 direction_about(const Vec3& n, double cos_angle, double azimuth) {
  // Duff et al. 2017 orthonormal basis.
  const double sign = std::copysign(1.0, n.z);
  const double a = -1.0 / (sign + n.z);
  const double b = n.x * n.y * a;
  const Vec3 e1{1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x};
  const Vec3 e2{b, sign + n.y * n.y * a, -n.y};
  const double sin_angle = std::sqrt(std::max(0.0, 1.0 - cos_angle * cos_angle));
  const Vec3 w = cos_angle * n + sin_angle * (std::cos(azimuth) * e1 + std::sin(azimuth) * e2);
  return w * (1.0 / norm(w));
}

Vec3 sample_scatter_direction(const CollisionKernel& kernel, const Vec3& v, const Vec3& v_star,
                              CounterRng& rng) {
  const Vec3 rel = v - v_star;
  const double len = norm(rel);
  if (!(len > 0.0)) throw std::invalid_argument("scatter direction undefined for v == v_star");
  const double x = sample_scatter_cosine(kernel, rng);
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  return direction_about(rel * (1.0 / len), x, phi);
}

}  // namespace homoshear
