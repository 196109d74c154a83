#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "clapeval/audio_io.hpp"

namespace clapeval {

enum class Modality { kAudio, kText };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view text);

/// Byte prepended to payloads before hashing (mock seed and cache key).
constexpr std::uint8_t modality_tag(Modality m) { return m == Modality::kAudio ? 'a' : 't'; }

struct Embedding {
  std::vector<double> vector;
  Modality modality = Modality::kAudio;
  std::string model_id;

  std::size_t dim() const { return vector.size(); }
  bool operator==(const Embedding&) const = default;
};

enum class EmbeddingErrc {
  kPrecondition,
  kUnreachable,
  kTimeout,
  kHttpStatus,
  kProtocol,
  kCacheMiss,
  kCorrupt,
  kDimMismatch,
  kModalityMismatch,
  kZeroNorm,
  kIo,
};

class EmbeddingError : public std::runtime_error {
 public:
  EmbeddingError(EmbeddingErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  EmbeddingErrc code() const noexcept { return code_; }

 private:
  EmbeddingErrc code_;
};

/// Natural-language query; never empty after trimming.
class TextQuery {
 public:
  explicit TextQuery(std::string text);

  const std::string& text() const { return text_; }
  /// ASCII-lowercased and whitespace-trimmed form used for hashing and the wire.
  std::string normalized() const;

 private:
  std::string text_;
};

/// Throws EmbeddingError on vector length/finite-ness violations.
void validate(const Embedding& emb);

/// (a . b) / (|a| |b|), clamped to [-1, 1].
double cosine_similarity(const Embedding& a, const Embedding& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Little-endian 16-bit quantization of mono samples.
std::vector<std::uint8_t> audio_payload(const AudioClip& mono);
std::vector<std::uint8_t> text_payload(const TextQuery& query);

/// SHA-256 hex of (modality tag || payload).
std::string cache_key(Modality modality, std::span<const std::uint8_t> payload);

inline constexpr std::size_t kDefaultMockDim = 512;
inline constexpr double kMinClipSeconds = 0.1;

/// Deterministic, L2-normalized pseudo-embedding seeded by FNV-1a over
/// (modality tag || payload) and filled from a splitmix64 stream.
Embedding mock_embed(std::span<const std::uint8_t> payload, Modality modality,
                     std::size_t dim = kDefaultMockDim);

std::string mock_model_id(std::size_t dim);

enum class BackendKind { kService, kCache, kMock };

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::string endpoint;
  std::filesystem::path cache_dir;
  std::size_t mock_dim = kDefaultMockDim;
  double timeout_seconds = 60.0;
  std::size_t max_in_flight = 4;
};

/// Parses `mock`, `mock:<dim>`, `cache:<dir>` or `service:<url>`.
BackendConfig parse_backend_spec(std::string_view spec);
std::string_view to_string(BackendKind kind);

/// Audio/text encoder pair. Implementations are safe to share across threads.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  /// Requires a mono clip of at least kMinClipSeconds.
  Embedding embed_audio(const AudioClip& clip);
  Embedding embed_text(const TextQuery& query);

  virtual BackendConfig config() const = 0;

  /// Dimension of the first embedding produced, if any.
  std::optional<std::size_t> observed_dim() const;

 protected:
  virtual Embedding do_embed_audio(const AudioClip& clip) = 0;
  virtual Embedding do_embed_text(const TextQuery& query) = 0;

 private:
  Embedding checked(Embedding emb, Modality expected);

  mutable std::mutex dim_mutex_;
  std::optional<std::size_t> dim_;
};

class MockBackend final : public EmbeddingBackend {
 public:
  explicit MockBackend(std::size_t dim = kDefaultMockDim);
  BackendConfig config() const override;

 protected:
  Embedding do_embed_audio(const AudioClip& clip) override;
  Embedding do_embed_text(const TextQuery& query) override;

 private:
  std::size_t dim_;
};

std::unique_ptr<EmbeddingBackend> make_backend(const BackendConfig& config);

}  // namespace clapeval
