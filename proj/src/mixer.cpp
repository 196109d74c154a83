#include "clapeval/mixer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "clapeval/hashing.hpp"

namespace clapeval {
namespace {

double norm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc);
}

double parse_number(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(value)) {
    throw MixError("invalid level '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string_view to_string(MixStrategy s) {
  switch (s) {
    case MixStrategy::kSourceOnly:
      return "source_only";
    case MixStrategy::kWhiteNoise:
      return "white_noise";
    default:
      return "other_content";
  }
}

MixStrategy parse_strategy(std::string_view text) {
  if (text == "source_only") return MixStrategy::kSourceOnly;
  if (text == "white_noise") return MixStrategy::kWhiteNoise;
  if (text == "other_content") return MixStrategy::kOtherContent;
  throw MixError("unknown mixing strategy '" + std::string(text) + "'");
}

SdrLevelGrid::SdrLevelGrid() : levels_{-20, -15, -10, -5, 0, 5, 10, 15, 20} {}

SdrLevelGrid::SdrLevelGrid(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw MixError("level grid is empty");
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (!(levels_[i] > levels_[i - 1])) throw MixError("level grid must be strictly increasing");
  }
}

SdrLevelGrid SdrLevelGrid::parse(std::string_view text) {
  std::vector<double> levels;
  if (text.find(':') != std::string_view::npos) {
    auto first = text.find(':');
    auto second = text.find(':', first + 1);
    if (second == std::string_view::npos || text.find(':', second + 1) != std::string_view::npos) {
      throw MixError("range must be start:stop:step");
    }
    const double start = parse_number(text.substr(0, first));
    const double stop = parse_number(text.substr(first + 1, second - first - 1));
    const double step = parse_number(text.substr(second + 1));
    if (!(step > 0.0)) throw MixError("range step must be positive");
    if (stop < start) throw MixError("range stop precedes start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t k = 0; k < count; ++k) levels.push_back(start + static_cast<double>(k) * step);
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto comma = text.find(',', pos);
      if (comma == std::string_view::npos) comma = text.size();
      levels.push_back(parse_number(text.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  return SdrLevelGrid(std::move(levels));
}

std::vector<double> as_double(const AudioClip& clip) { return {clip.samples.begin(), clip.samples.end()}; }

double gain_for_target_sdr(std::span<const double> source, std::span<const double> noise, double target_sdr_db) {
  if (source.size() != noise.size()) throw MixError("source and noise lengths differ");
  if (!std::isfinite(target_sdr_db)) throw MixError("target SDR must be finite");
  const double source_norm = norm(source);
  const double noise_norm = norm(noise);
  if (source_norm == 0.0) throw MixError("source has zero energy");
  if (noise_norm == 0.0) throw MixError("noise has zero energy");
  return (source_norm / noise_norm) * std::pow(10.0, -target_sdr_db / 20.0);
}

std::pair<AudioClip, MixPlan> mix_at_sdr(const AudioClip& source, const AudioClip& noise, double target_sdr_db) {
  validate(source);
  validate(noise);
  if (!source.is_mono() || !noise.is_mono()) throw MixError("mixing requires mono clips");
  if (source.sample_rate != noise.sample_rate) {
    throw MixError("sample rates differ (" + std::to_string(source.sample_rate) + " vs " +
                   std::to_string(noise.sample_rate) + ")");
  }
  const std::size_t n = source.samples.size();
  if (noise.samples.size() < n) {
    throw MixError("noise (" + std::to_string(noise.samples.size()) + " samples) is shorter than source (" +
                   std::to_string(n) + " samples)");
  }
  const std::vector<double> s = as_double(source);
  const std::vector<double> v(noise.samples.begin(), noise.samples.begin() + static_cast<std::ptrdiff_t>(n));

  MixPlan plan;
  plan.target_sdr_db = target_sdr_db;
  plan.gain = gain_for_target_sdr(s, v, target_sdr_db);

  AudioClip mixture;
  mixture.sample_rate = source.sample_rate;
  mixture.channels = 1;
  mixture.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) mixture.samples[i] = static_cast<float>(s[i] + plan.gain * v[i]);
  return {std::move(mixture), plan};
}

AudioClip white_noise(std::size_t length, std::uint32_t sample_rate, std::uint64_t seed) {
  if (length == 0) throw MixError("white noise length must be positive");
  if (sample_rate == 0) throw MixError("sample rate must be positive");
  SplitMix64 rng(seed);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.channels = 1;
  clip.samples.resize(length);
  for (std::size_t i = 0; i < length; i += 2) {
    // u1 in (0, 1] keeps the logarithm finite.
    const double u1 = 1.0 - rng.next_unit();
    const double u2 = rng.next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    clip.samples[i] = static_cast<float>(std::clamp(kWhiteNoiseStddev * radius * std::cos(angle), -1.0, 1.0));
    if (i + 1 < length) {
      clip.samples[i + 1] =
          static_cast<float>(std::clamp(kWhiteNoiseStddev * radius * std::sin(angle), -1.0, 1.0));
    }
  }
  return clip;
}

std::pair<AudioClip, MixPlan> build_strategy_mixture(const AudioClip& source, MixStrategy strategy,
                                                     const AudioClip* companion, double level_db,
                                                     std::uint64_t seed) {
  switch (strategy) {
    case MixStrategy::kSourceOnly: {
      validate(source);
      MixPlan plan;
      plan.strategy = strategy;
      plan.target_sdr_db = level_db;
      plan.gain = 1.0;
      return {source, plan};
    }
    case MixStrategy::kWhiteNoise: {
      auto noise = white_noise(source.samples.size(), source.sample_rate, seed);
      auto result = mix_at_sdr(source, noise, level_db);
      result.second.strategy = strategy;
      result.second.seed = seed;
      return result;
    }
    default: {
      if (companion == nullptr) throw MixError("other_content strategy requires a companion clip");
      auto result = mix_at_sdr(source, *companion, level_db);
      result.second.strategy = strategy;
      return result;
    }
  }
}

std::uint64_t derive_record_seed(std::uint64_t base_seed, std::string_view record_id) {
  return base_seed ^ fnv1a64(record_id);
}

}  // namespace clapeval
