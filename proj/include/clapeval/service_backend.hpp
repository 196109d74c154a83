#pragma once

#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>
#include <vector>

#include "clapeval/embedding.hpp"

namespace clapeval {

/// Wire routes of the embedding service.
inline constexpr const char* kHealthRoute = "/v1/health";
inline constexpr const char* kTextRoute = "/v1/embeddings/text";
inline constexpr const char* kAudioRoute = "/v1/embeddings/audio";

struct ServiceHealth {
  std::string model_id;
  std::size_t dim = 0;
};

/// Request bodies as sent on the wire.
std::string make_text_request(const std::vector<std::string>& texts);
std::string make_audio_request(std::uint32_t sample_rate, const std::vector<const AudioClip*>& clips);

/// Parses an embeddings response, checking count and per-item dim.
std::vector<Embedding> parse_embed_response(const std::string& body, Modality modality,
                                            std::size_t expected_count);

/// Counting gate bounding concurrent requests.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit);

  void acquire();
  void release();
  std::size_t peak() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t active_ = 0;
  std::size_t peak_ = 0;
};

/// HTTP client for the embedding service. Non-2xx responses raise
/// EmbeddingError(kHttpStatus) carrying the response body.
class ServiceBackend final : public EmbeddingBackend {
 public:
  explicit ServiceBackend(BackendConfig config);

  BackendConfig config() const override { return config_; }

  ServiceHealth health();
  std::vector<Embedding> embed_texts(const std::vector<TextQuery>& queries);
  std::vector<Embedding> embed_audios(const std::vector<AudioClip>& clips);

  std::size_t peak_in_flight() const { return limiter_.peak(); }

 protected:
  Embedding do_embed_audio(const AudioClip& clip) override;
  Embedding do_embed_text(const TextQuery& query) override;

 private:
  std::string request(const char* route, const std::string* body);

  BackendConfig config_;
  std::string host_;
  std::string base_path_;
  InFlightLimiter limiter_;
};

}  // namespace clapeval
