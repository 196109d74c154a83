#pragma once

// Seeded synthetic datasets written to disk: an evaluation manifest with its
// WAV files, and a pairs manifest for sweeps.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "clapeval/audio_io.hpp"
#include "clapeval/mixer.hpp"
#include "test_util.hpp"

namespace clapeval::testing {

inline const std::vector<std::string>& synthetic_queries() {
  static const std::vector<std::string> q = {"dog barking",   "church bells",    "rain on a roof",
                                             "a rising tone", "speech in a hall", "engine idling"};
  return q;
}

inline AudioClip synthetic_source(std::size_t k, std::size_t frames = 16000) {
  auto base = sine(220.0 * static_cast<double>(k + 1), frames, 0.4, 16000, 0.3 * static_cast<double>(k));
  auto texture = white_noise(frames, 16000, 1000 + k);
  for (std::size_t i = 0; i < frames; ++i) base.samples[i] += 0.5f * texture.samples[i];
  return base;
}

struct ManifestOptions {
  std::size_t records = 6;
  /// Records with index < with_reference get a reference_path.
  std::size_t with_reference = 4;
  std::uint64_t seed = 2024;
};

/// Writes mixtures, separated estimates and references for `options.records`
/// items plus `manifest.jsonl` into `dir`, returning the manifest path.
inline std::filesystem::path write_synthetic_manifest(const std::filesystem::path& dir,
                                                      const ManifestOptions& options = {}) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
  for (std::size_t k = 0; k < options.records; ++k) {
    const std::string id = "rec" + std::to_string(k);
    const auto source = synthetic_source(k);
    const auto interferer = white_noise(source.samples.size(), 16000, options.seed + 17 * k);
    const auto mixture = mix_at_sdr(source, interferer, -5.0 + 2.0 * static_cast<double>(k)).first;
    const auto separated = mix_at_sdr(source, interferer, 8.0 + static_cast<double>(k)).first;
    write_wav(mixture, dir / (id + "_mix.wav"), WavEncoding::kFloat32);
    write_wav(separated, dir / (id + "_sep.wav"), WavEncoding::kFloat32);
    nlohmann::ordered_json line;
    line["id"] = id;
    line["mixture_path"] = id + "_mix.wav";
    line["separated_path"] = id + "_sep.wav";
    if (k < options.with_reference) {
      write_wav(source, dir / (id + "_ref.wav"), WavEncoding::kFloat32);
      line["reference_path"] = id + "_ref.wav";
    }
    line["query"] = synthetic_queries()[k % synthetic_queries().size()];
    manifest << line.dump() << '\n';
  }
  return dir / "manifest.jsonl";
}

/// Two source/companion pairs with distinct content.
inline std::filesystem::path write_synthetic_pairs(const std::filesystem::path& dir, std::size_t count = 2) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "pairs.jsonl", std::ios::binary);
  for (std::size_t k = 0; k < count; ++k) {
    const std::string id = "pair" + std::to_string(k);
    write_wav(synthetic_source(k, 12000), dir / (id + "_src.wav"), WavEncoding::kFloat32);
    write_wav(synthetic_source(k + 3, 14000), dir / (id + "_other.wav"), WavEncoding::kFloat32);
    nlohmann::ordered_json line;
    line["id"] = id;
    line["source_path"] = id + "_src.wav";
    line["companion_path"] = id + "_other.wav";
    line["query"] = synthetic_queries()[k];
    manifest << line.dump() << '\n';
  }
  return dir / "pairs.jsonl";
}

}  // namespace clapeval::testing
