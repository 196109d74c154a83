#include "clapeval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace clapeval {
namespace {

double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw StatsError("incomplete beta continued fraction did not converge");
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw StatsError("pearson inputs differ in length (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw StatsError("pearson needs at least 2 samples");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw StatsError("pearson inputs must be finite");
  }
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw StatsError("pearson: x is constant");
  if (syy == 0.0) throw StatsError("pearson: y is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw StatsError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw StatsError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast below the mean; use the symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double pearson_t_stat(double r, std::size_t n) {
  if (n < 3) throw StatsError("t statistic needs n >= 3");
  if (std::abs(r) >= 1.0) return std::copysign(std::numeric_limits<double>::infinity(), r);
  return r * std::sqrt(static_cast<double>(n - 2) / (1.0 - r * r));
}

double pearson_p_value(double r, std::size_t n) {
  if (n < 3) throw StatsError("p-value needs n >= 3 (got " + std::to_string(n) + ")");
  if (!(std::abs(r) <= 1.0)) throw StatsError("correlation must lie in [-1, 1]");
  if (std::abs(r) == 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = pearson_t_stat(r, n);
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

CorrelationResult correlate(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 3) throw StatsError("correlation needs at least 3 paired values");
  CorrelationResult out;
  out.r = pearson(x, y);
  out.n = x.size();
  out.t_stat = pearson_t_stat(out.r, out.n);
  out.p_value = pearson_p_value(out.r, out.n);
  return out;
}

Summary aggregate(std::span<const double> values) {
  if (values.empty()) throw StatsError("cannot aggregate an empty set");
  Summary s;
  s.count = values.size();
  s.mean = mean_of(values);
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  return s;
}

}  // namespace clapeval
