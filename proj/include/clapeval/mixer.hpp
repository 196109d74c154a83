#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clapeval/audio_io.hpp"

namespace clapeval {

enum class MixStrategy { kSourceOnly, kWhiteNoise, kOtherContent };

std::string_view to_string(MixStrategy s);
MixStrategy parse_strategy(std::string_view text);

class MixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MixPlan {
  MixStrategy strategy = MixStrategy::kOtherContent;
  double target_sdr_db = 0.0;
  /// (|source| / |noise|) * 10^(-target/20); 1 for kSourceOnly.
  double gain = 1.0;
  std::optional<std::uint64_t> seed;
};

/// Strictly increasing list of mixing levels in dB.
class SdrLevelGrid {
 public:
  /// -20, -15, ..., 20.
  SdrLevelGrid();
  explicit SdrLevelGrid(std::vector<double> levels);

  /// `start:stop:step` (stop inclusive) or a comma-separated list.
  static SdrLevelGrid parse(std::string_view text);

  const std::vector<double>& levels() const { return levels_; }

 private:
  std::vector<double> levels_;
};

inline constexpr double kWhiteNoiseStddev = 0.1;

double gain_for_target_sdr(std::span<const double> source, std::span<const double> noise, double target_sdr_db);

/// source + g * noise with g from gain_for_target_sdr. Noise longer than the
/// source is truncated; shorter noise is an error. The sum is not clamped.
std::pair<AudioClip, MixPlan> mix_at_sdr(const AudioClip& source, const AudioClip& noise, double target_sdr_db);

/// Gaussian noise (sigma 0.1, clamped to [-1, 1]) from a splitmix64 stream
/// through Box-Muller.
AudioClip white_noise(std::size_t length, std::uint32_t sample_rate, std::uint64_t seed);

std::pair<AudioClip, MixPlan> build_strategy_mixture(const AudioClip& source, MixStrategy strategy,
                                                     const AudioClip* companion, double level_db,
                                                     std::uint64_t seed);

/// seed0 XOR FNV-1a(record id); independent of processing order.
std::uint64_t derive_record_seed(std::uint64_t base_seed, std::string_view record_id);

/// Samples widened to double for metric computation.
std::vector<double> as_double(const AudioClip& clip);

}  // namespace clapeval
