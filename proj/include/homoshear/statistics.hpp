#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace homoshear {

/// Streaming mean and variance (Welford), mergeable with Chan's update.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const RunningStats& o);

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  /// Standard error of the mean.
  double standard_error() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// sup |F_a - F_b| of two empirical distributions.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// sup |F_n - F| against a continuous CDF.
double ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Asymptotic Kolmogorov tail P(D > d) for effective sample size n_eff,
/// with the Stephens small-sample correction.
double ks_pvalue(double d, double n_eff);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
};

/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, int dof);

/// Goodness of fit of positive samples to Exp(rate) using equiprobable bins.
ChiSquareResult exponential_gof(std::span<const double> samples, double rate, int bins = 50);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Slope of log y against t over the final half of [t.front(), t.back()].
LinearFit fit_growth_rate(std::span<const double> t, std::span<const double> y);

}  // namespace homoshear
