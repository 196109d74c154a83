#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "clapeval/audio_io.hpp"

namespace clapeval {

/// Added to both power terms, after normalizing them by the energy of the
/// reference (SDR) or estimate (SI-SDR), so perfect cases reach the clamp.
inline constexpr double kPowerEpsilon = 1e-12;
/// Every SDR-family value is clamped to [-kSdrClampDb, kSdrClampDb].
inline constexpr double kSdrClampDb = 120.0;
/// Largest tolerated relative length difference in align_lengths.
inline constexpr double kMaxRelativeLengthMismatch = 0.01;

enum class MetricErrc {
  kLengthMismatch,
  kRateMismatch,
  kNotMono,
  kEmpty,
  kZeroReference,
  kZeroEstimate,
};

class MetricError : public std::runtime_error {
 public:
  MetricError(MetricErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  MetricErrc code() const noexcept { return code_; }

 private:
  MetricErrc code_;
};

struct AlignedPair {
  std::vector<double> reference;
  std::vector<double> estimate;
  std::size_t truncated_samples = 0;
};

struct SiSdrBreakdown {
  double alpha = 0.0;
  double value_db = 0.0;
};

/// Truncates two mono clips of equal rate to the shorter length. Fails when
/// the lengths differ by more than 1% of the longer one.
AlignedPair align_lengths(const AudioClip& a, const AudioClip& b);

double sdr(std::span<const double> reference, std::span<const double> estimate);

double sdri(std::span<const double> reference, std::span<const double> estimate,
            std::span<const double> mixture);

SiSdrBreakdown si_sdr(std::span<const double> reference, std::span<const double> estimate);

}  // namespace clapeval
