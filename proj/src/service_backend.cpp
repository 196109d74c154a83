#include "clapeval/service_backend.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include <httplib.h>
#include <json.hpp>

#include "clapeval/hashing.hpp"

namespace clapeval {
namespace {

struct SlotGuard {
  explicit SlotGuard(InFlightLimiter& l) : limiter(l) { limiter.acquire(); }
  ~SlotGuard() { limiter.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;
  InFlightLimiter& limiter;
};

std::string float_bytes_b64(const AudioClip& clip) {
  std::vector<std::uint8_t> bytes(clip.samples.size() * 4);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(clip.samples[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return base64_encode(bytes);
}

}  // namespace

std::string make_text_request(const std::vector<std::string>& texts) {
  nlohmann::ordered_json doc;
  doc["texts"] = texts;
  return doc.dump();
}

std::string make_audio_request(std::uint32_t sample_rate, const std::vector<const AudioClip*>& clips) {
  nlohmann::ordered_json doc;
  doc["sample_rate"] = sample_rate;
  auto& audio = doc["audio"] = nlohmann::ordered_json::array();
  for (const AudioClip* clip : clips) audio.push_back(float_bytes_b64(*clip));
  return doc.dump();
}

std::vector<Embedding> parse_embed_response(const std::string& body, Modality modality,
                                            std::size_t expected_count) {
  try {
    auto doc = nlohmann::json::parse(body);
    const auto model_id = doc.at("model_id").get<std::string>();
    const auto dim = doc.at("dim").get<std::size_t>();
    const auto& items = doc.at("embeddings");
    if (!items.is_array() || items.size() != expected_count) {
      throw EmbeddingError(EmbeddingErrc::kProtocol,
                           "service returned " + std::to_string(items.size()) + " embeddings for " +
                               std::to_string(expected_count) + " inputs");
    }
    std::vector<Embedding> out;
    out.reserve(items.size());
    for (const auto& item : items) {
      Embedding emb;
      emb.model_id = model_id;
      emb.modality = modality;
      emb.vector = item.get<std::vector<double>>();
      if (emb.dim() != dim) {
        throw EmbeddingError(EmbeddingErrc::kProtocol, "service embedding length " + std::to_string(emb.dim()) +
                                                           " disagrees with declared dim " + std::to_string(dim));
      }
      validate(emb);
      out.push_back(std::move(emb));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw EmbeddingError(EmbeddingErrc::kProtocol, std::string("malformed service response: ") + e.what());
  } catch (const EmbeddingError& e) {
    if (e.code() == EmbeddingErrc::kProtocol) throw;
    throw EmbeddingError(EmbeddingErrc::kProtocol, e.what());
  }
}

InFlightLimiter::InFlightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return active_ < limit_; });
  ++active_;
  peak_ = std::max(peak_, active_);
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --active_;
  }
  cv_.notify_one();
}

std::size_t InFlightLimiter::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

ServiceBackend::ServiceBackend(BackendConfig config)
    : config_(std::move(config)), limiter_(config_.max_in_flight) {
  std::string url = config_.endpoint;
  if (!url.starts_with("http://")) {
    throw EmbeddingError(EmbeddingErrc::kPrecondition, "service endpoint must be an http:// URL: " + url);
  }
  auto path_start = url.find('/', std::strlen("http://"));
  if (path_start == std::string::npos) {
    host_ = url;
  } else {
    host_ = url.substr(0, path_start);
    base_path_ = url.substr(path_start);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  }
}

std::string ServiceBackend::request(const char* route, const std::string* body) {
  SlotGuard slot(limiter_);
  httplib::Client client(host_);
  const auto seconds = static_cast<time_t>(std::floor(config_.timeout_seconds));
  const auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);

  const std::string path = base_path_ + route;
  auto result = body ? client.Post(path, *body, "application/json") : client.Get(path);
  if (!result) {
    const auto err = result.error();
    const auto code = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                          ? EmbeddingErrc::kTimeout
                          : EmbeddingErrc::kUnreachable;
    throw EmbeddingError(code, config_.endpoint + path + ": " + httplib::to_string(err));
  }
  if (result->status < 200 || result->status >= 300) {
    throw EmbeddingError(EmbeddingErrc::kHttpStatus,
                         path + " returned HTTP " + std::to_string(result->status) + ": " + result->body);
  }
  return result->body;
}

ServiceHealth ServiceBackend::health() {
  const std::string body = request(kHealthRoute, nullptr);
  try {
    auto doc = nlohmann::json::parse(body);
    return {doc.at("model_id").get<std::string>(), doc.at("dim").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw EmbeddingError(EmbeddingErrc::kProtocol, std::string("malformed health response: ") + e.what());
  }
}

std::vector<Embedding> ServiceBackend::embed_texts(const std::vector<TextQuery>& queries) {
  std::vector<std::string> texts;
  texts.reserve(queries.size());
  for (const auto& q : queries) texts.push_back(q.normalized());
  const std::string body = make_text_request(texts);
  return parse_embed_response(request(kTextRoute, &body), Modality::kText, queries.size());
}

std::vector<Embedding> ServiceBackend::embed_audios(const std::vector<AudioClip>& clips) {
  if (clips.empty()) return {};
  std::vector<const AudioClip*> ptrs;
  for (const auto& c : clips) {
    if (c.sample_rate != clips.front().sample_rate) {
      throw EmbeddingError(EmbeddingErrc::kPrecondition, "audio batch mixes sample rates");
    }
    ptrs.push_back(&c);
  }
  const std::string body = make_audio_request(clips.front().sample_rate, ptrs);
  return parse_embed_response(request(kAudioRoute, &body), Modality::kAudio, clips.size());
}

Embedding ServiceBackend::do_embed_audio(const AudioClip& clip) {
  const std::string body = make_audio_request(clip.sample_rate, {&clip});
  return parse_embed_response(request(kAudioRoute, &body), Modality::kAudio, 1).front();
}

Embedding ServiceBackend::do_embed_text(const TextQuery& query) {
  const std::string body = make_text_request({query.normalized()});
  return parse_embed_response(request(kTextRoute, &body), Modality::kText, 1).front();
}

}  // namespace clapeval
