#include "clapeval/sdr_metrics.hpp"

#include <algorithm>
#include <cmath>

namespace clapeval {
namespace {

double energy(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

double ratio_db(double signal_power, double distortion_power) {
  double db = 10.0 * std::log10((signal_power + kPowerEpsilon) / (distortion_power + kPowerEpsilon));
  return std::clamp(db, -kSdrClampDb, kSdrClampDb);
}

void require_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw MetricError(MetricErrc::kLengthMismatch,
                      "signals differ in length (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw MetricError(MetricErrc::kEmpty, "signals are empty");
}

bool all_zero(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

}  // namespace

AlignedPair align_lengths(const AudioClip& a, const AudioClip& b) {
  if (!a.is_mono() || !b.is_mono()) throw MetricError(MetricErrc::kNotMono, "align_lengths requires mono clips");
  if (a.sample_rate != b.sample_rate) {
    throw MetricError(MetricErrc::kRateMismatch,
                      "sample rates differ (" + std::to_string(a.sample_rate) + " vs " +
                          std::to_string(b.sample_rate) + ")");
  }
  const std::size_t shorter = std::min(a.samples.size(), b.samples.size());
  const std::size_t longer = std::max(a.samples.size(), b.samples.size());
  if (shorter == 0) throw MetricError(MetricErrc::kEmpty, "zero-length overlap");
  const double relative = static_cast<double>(longer - shorter) / static_cast<double>(longer);
  if (relative > kMaxRelativeLengthMismatch) {
    throw MetricError(MetricErrc::kLengthMismatch,
                      "lengths " + std::to_string(a.samples.size()) + " and " +
                          std::to_string(b.samples.size()) + " differ by more than 1%");
  }
  AlignedPair pair;
  pair.reference.assign(a.samples.begin(), a.samples.begin() + static_cast<std::ptrdiff_t>(shorter));
  pair.estimate.assign(b.samples.begin(), b.samples.begin() + static_cast<std::ptrdiff_t>(shorter));
  pair.truncated_samples = longer - shorter;
  return pair;
}

double sdr(std::span<const double> reference, std::span<const double> estimate) {
  require_same_length(reference, estimate);
  if (all_zero(reference)) throw MetricError(MetricErrc::kZeroReference, "reference is all zeros");
  double signal = 0.0;
  double distortion = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - estimate[i];
    signal += reference[i] * reference[i];
    distortion += d * d;
  }
  return ratio_db(1.0, distortion / signal);
}

double sdri(std::span<const double> reference, std::span<const double> estimate,
            std::span<const double> mixture) {
  require_same_length(reference, mixture);
  return sdr(reference, estimate) - sdr(reference, mixture);
}

SiSdrBreakdown si_sdr(std::span<const double> reference, std::span<const double> estimate) {
  require_same_length(reference, estimate);
  if (all_zero(reference)) throw MetricError(MetricErrc::kZeroReference, "reference is all zeros");
  if (all_zero(estimate)) throw MetricError(MetricErrc::kZeroEstimate, "estimate is all zeros");

  double cross = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) cross += estimate[i] * reference[i];
  SiSdrBreakdown out;
  out.alpha = cross / energy(reference);

  double target = 0.0;
  double residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double scaled = out.alpha * reference[i];
    const double r = scaled - estimate[i];
    target += scaled * scaled;
    residual += r * r;
  }
  // Both powers scale with the estimate's energy; normalizing by it keeps the
  // epsilon from breaking scale invariance for quiet estimates.
  const double estimate_energy = energy(estimate);
  out.value_db = ratio_db(target / estimate_energy, residual / estimate_energy);
  return out;
}

}  // namespace clapeval
