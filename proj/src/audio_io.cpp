#include "clapeval/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace clapeval {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t load_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t load_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void store_tag(std::vector<std::uint8_t>& out, const char (&tag)[5]) {
  out.insert(out.end(), tag, tag + 4);
}

[[noreturn]] void fail(AudioErrc code, const std::string& origin, const std::string& msg) {
  throw AudioError(code, origin + ": " + msg);
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

FormatChunk parse_fmt(const std::uint8_t* p, std::uint32_t size, const std::string& origin) {
  if (size < 16) fail(AudioErrc::kMalformed, origin, "'fmt ' chunk shorter than 16 bytes");
  FormatChunk fmt;
  fmt.format = load_u16(p);
  fmt.channels = load_u16(p + 2);
  fmt.sample_rate = load_u32(p + 4);
  fmt.block_align = load_u16(p + 12);
  fmt.bits = load_u16(p + 14);
  if (fmt.format == kFormatExtensible) {
    if (size < 40) fail(AudioErrc::kMalformed, origin, "'fmt ' extensible chunk shorter than 40 bytes");
    // First two bytes of the sub-format GUID carry the plain format code.
    fmt.format = load_u16(p + 24);
  }
  if (fmt.format != kFormatPcm && fmt.format != kFormatFloat) {
    fail(AudioErrc::kUnsupported, origin,
         "'fmt ' declares unsupported codec " + std::to_string(fmt.format));
  }
  if (fmt.format == kFormatPcm && fmt.bits != 16 && fmt.bits != 24 && fmt.bits != 32) {
    fail(AudioErrc::kUnsupported, origin,
         "'fmt ' declares unsupported PCM bit depth " + std::to_string(fmt.bits));
  }
  if (fmt.format == kFormatFloat && fmt.bits != 32) {
    fail(AudioErrc::kUnsupported, origin,
         "'fmt ' declares unsupported float bit depth " + std::to_string(fmt.bits));
  }
  if (fmt.channels == 0) fail(AudioErrc::kMalformed, origin, "'fmt ' declares zero channels");
  if (fmt.sample_rate == 0) fail(AudioErrc::kMalformed, origin, "'fmt ' declares zero sample rate");
  if (fmt.block_align != fmt.channels * (fmt.bits / 8)) {
    fail(AudioErrc::kMalformed, origin, "'fmt ' block align disagrees with channels and bit depth");
  }
  return fmt;
}

float decode_sample(const std::uint8_t* p, const FormatChunk& fmt) {
  if (fmt.format == kFormatFloat) {
    return std::bit_cast<float>(load_u32(p));
  }
  switch (fmt.bits) {
    case 16:
      return static_cast<float>(static_cast<std::int16_t>(load_u16(p)) / 32768.0);
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return static_cast<float>(v / 8388608.0);
    }
    default:
      return static_cast<float>(static_cast<std::int32_t>(load_u32(p)) / 2147483648.0);
  }
}

}  // namespace

void validate(const AudioClip& clip) {
  if (clip.sample_rate == 0) throw AudioError(AudioErrc::kInvalidClip, "sample rate must be positive");
  if (clip.channels == 0) throw AudioError(AudioErrc::kInvalidClip, "channel count must be positive");
  if (clip.samples.size() % clip.channels != 0) {
    throw AudioError(AudioErrc::kInvalidClip, "sample count is not a multiple of the channel count");
  }
}

AudioClip decode_wav(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 12) fail(AudioErrc::kMalformed, origin, "'RIFF' header truncated");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0) fail(AudioErrc::kMalformed, origin, "missing 'RIFF' tag");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) fail(AudioErrc::kMalformed, origin, "missing 'WAVE' form type");

  const std::uint8_t* base = bytes.data();
  std::size_t pos = 12;
  bool have_fmt = false;
  FormatChunk fmt;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  while (pos + 8 <= bytes.size()) {
    std::string id(reinterpret_cast<const char*>(base + pos), 4);
    std::uint32_t size = load_u32(base + pos + 4);
    pos += 8;
    std::size_t available = bytes.size() - pos;
    if (id == "data") {
      if (size > available) {
        if (size - available > 1) {
          fail(AudioErrc::kMalformed, origin,
               "'data' chunk declares " + std::to_string(size) + " bytes but only " +
                   std::to_string(available) + " are present");
        }
        size = static_cast<std::uint32_t>(available);
      }
      data = base + pos;
      data_size = size;
    } else if (id == "fmt ") {
      if (size > available) fail(AudioErrc::kMalformed, origin, "'fmt ' chunk truncated");
      fmt = parse_fmt(base + pos, size, origin);
      have_fmt = true;
    } else if (size > available) {
      // Trailing unknown chunk cut short; everything needed may already be parsed.
      break;
    }
    pos += size + (size & 1u);
  }

  if (!have_fmt) fail(AudioErrc::kMalformed, origin, "no 'fmt ' chunk");
  if (data == nullptr) fail(AudioErrc::kMalformed, origin, "no 'data' chunk");
  if (data_size % fmt.block_align != 0) {
    fail(AudioErrc::kMalformed, origin, "'data' chunk size is not a whole number of frames");
  }

  AudioClip clip;
  clip.sample_rate = fmt.sample_rate;
  clip.channels = fmt.channels;
  const std::size_t width = fmt.bits / 8;
  const std::size_t count = data_size / width;
  clip.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    float v = decode_sample(data + i * width, fmt);
    if (!std::isfinite(v)) {
      fail(AudioErrc::kNonFinite, origin, "'data' chunk holds a non-finite sample at index " + std::to_string(i));
    }
    clip.samples[i] = std::clamp(v, -1.0f, 1.0f);
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw AudioError(AudioErrc::kNotFound, path.string() + ": no such file");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError(AudioErrc::kIo, path.string() + ": cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw AudioError(AudioErrc::kIo, path.string() + ": read failed");
  return decode_wav(bytes, path.string());
}

std::int16_t quantize_pcm16(float sample) {
  double v = std::clamp(static_cast<double>(sample), -1.0, 1.0);
  long q = std::lround(v * 32768.0);
  return static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L));
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding) {
  validate(clip);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    if (!std::isfinite(clip.samples[i])) {
      throw AudioError(AudioErrc::kNonFinite, "cannot encode non-finite sample at index " + std::to_string(i));
    }
  }
  const bool is_float = encoding == WavEncoding::kFloat32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint16_t block_align = static_cast<std::uint16_t>(clip.channels * (bits / 8));
  const std::uint64_t data_size = static_cast<std::uint64_t>(clip.samples.size()) * (bits / 8);
  if (data_size > 0xFFFFFFFFull - 36) throw AudioError(AudioErrc::kIo, "clip too long for a RIFF file");

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  store_tag(out, "RIFF");
  store_u32(out, static_cast<std::uint32_t>(36 + data_size));
  store_tag(out, "WAVE");
  store_tag(out, "fmt ");
  store_u32(out, 16);
  store_u16(out, is_float ? kFormatFloat : kFormatPcm);
  store_u16(out, clip.channels);
  store_u32(out, clip.sample_rate);
  store_u32(out, clip.sample_rate * block_align);
  store_u16(out, block_align);
  store_u16(out, bits);
  store_tag(out, "data");
  store_u32(out, static_cast<std::uint32_t>(data_size));
  for (float s : clip.samples) {
    if (is_float) {
      store_u32(out, std::bit_cast<std::uint32_t>(std::clamp(s, -1.0f, 1.0f)));
    } else {
      store_u16(out, static_cast<std::uint16_t>(quantize_pcm16(s)));
    }
  }
  return out;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path, WavEncoding encoding) {
  auto bytes = encode_wav(clip, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw AudioError(AudioErrc::kIo, path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw AudioError(AudioErrc::kIo, path.string() + ": write failed");
}

AudioClip to_mono(const AudioClip& clip) {
  validate(clip);
  if (clip.channels == 1) return clip;
  AudioClip mono;
  mono.sample_rate = clip.sample_rate;
  mono.channels = 1;
  const std::size_t frames = clip.frames();
  mono.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double sum = 0.0;
    for (std::size_t c = 0; c < clip.channels; ++c) sum += clip.samples[f * clip.channels + c];
    mono.samples[f] = static_cast<float>(sum / clip.channels);
  }
  return mono;
}

AudioClip resample_linear(const AudioClip& clip, std::uint32_t target_rate) {
  validate(clip);
  if (!clip.is_mono()) throw AudioError(AudioErrc::kInvalidClip, "resample_linear requires a mono clip");
  if (target_rate == 0) throw AudioError(AudioErrc::kInvalidClip, "target rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const std::size_t src_len = clip.samples.size();
  const std::size_t out_len =
      static_cast<std::size_t>(static_cast<std::uint64_t>(src_len) * target_rate / clip.sample_rate);
  const double step = static_cast<double>(clip.sample_rate) / target_rate;

  AudioClip out;
  out.sample_rate = target_rate;
  out.channels = 1;
  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double position = static_cast<double>(i) * step;
    const auto index = static_cast<std::size_t>(position);
    if (index + 1 >= src_len) {
      out.samples[i] = clip.samples[src_len - 1];
      continue;
    }
    const double frac = position - static_cast<double>(index);
    const double a = clip.samples[index];
    const double b = clip.samples[index + 1];
    out.samples[i] = static_cast<float>(a + (b - a) * frac);
  }
  return out;
}

}  // namespace clapeval
