#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

namespace clapeval {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CorrelationResult {
  double r = 0.0;
  std::size_t n = 0;
  double t_stat = 0.0;
  double p_value = 1.0;
};

struct Summary {
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 when count is 1.
  double stddev = 0.0;
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
};

/// Two-pass Pearson correlation, clamped to [-1, 1]. Constant inputs throw.
double pearson(std::span<const double> x, std::span<const double> y);

/// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// t = r * sqrt((n - 2) / (1 - r^2)).
double pearson_t_stat(double r, std::size_t n);

/// Two-tailed p-value of the t statistic with n - 2 degrees of freedom.
double pearson_p_value(double r, std::size_t n);

CorrelationResult correlate(std::span<const double> x, std::span<const double> y);

Summary aggregate(std::span<const double> values);

}  // namespace clapeval
