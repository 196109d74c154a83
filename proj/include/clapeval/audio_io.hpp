#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace clapeval {

/// Decoded audio. Samples are interleaved per frame and normalized so that
/// integer full scale maps to [-1, 1).
struct AudioClip {
  std::vector<float> samples;
  std::uint32_t sample_rate = 0;
  std::uint16_t channels = 1;

  std::size_t frames() const { return channels == 0 ? 0 : samples.size() / channels; }
  double duration_seconds() const {
    return sample_rate == 0 ? 0.0 : static_cast<double>(frames()) / sample_rate;
  }
  bool is_mono() const { return channels == 1; }
};

enum class AudioErrc {
  kNotFound,
  kIo,
  kMalformed,
  kUnsupported,
  kNonFinite,
  kInvalidClip,
};

class AudioError : public std::runtime_error {
 public:
  AudioError(AudioErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  AudioErrc code() const noexcept { return code_; }

 private:
  AudioErrc code_;
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Throws AudioError(kInvalidClip) when the clip violates its invariants.
void validate(const AudioClip& clip);

/// Reads RIFF/WAVE with PCM 16/24/32-bit integer or IEEE 32-bit float data.
AudioClip read_wav(const std::filesystem::path& path);

/// Decodes an in-memory RIFF/WAVE image. `origin` only labels error messages.
AudioClip decode_wav(const std::vector<std::uint8_t>& bytes,
                     const std::string& origin = "<memory>");

/// Samples are clamped to [-1, 1] before encoding in both encodings.
void write_wav(const AudioClip& clip, const std::filesystem::path& path,
               WavEncoding encoding = WavEncoding::kFloat32);

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding);

/// Quantizes one sample to 16-bit PCM after clamping to [-1, 1].
std::int16_t quantize_pcm16(float sample);

AudioClip to_mono(const AudioClip& clip);

/// Linear interpolation at positions i * (src_rate / target_rate), holding the
/// last sample past the end. Requires a mono clip.
AudioClip resample_linear(const AudioClip& clip, std::uint32_t target_rate);

}  // namespace clapeval
