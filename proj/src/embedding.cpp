#include "clapeval/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "clapeval/embedding_cache.hpp"
#include "clapeval/hashing.hpp"
#include "clapeval/service_backend.hpp"

namespace clapeval {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  auto begin = std::find_if_not(s.begin(), s.end(), is_space);
  auto end = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  return begin < end ? std::string(begin, end) : std::string();
}

}  // namespace

std::string_view to_string(Modality m) { return m == Modality::kAudio ? "audio" : "text"; }

Modality parse_modality(std::string_view text) {
  if (text == "audio") return Modality::kAudio;
  if (text == "text") return Modality::kText;
  throw EmbeddingError(EmbeddingErrc::kCorrupt, "unknown modality '" + std::string(text) + "'");
}

TextQuery::TextQuery(std::string text) : text_(std::move(text)) {
  if (trim(text_).empty()) throw EmbeddingError(EmbeddingErrc::kPrecondition, "text query is empty");
}

std::string TextQuery::normalized() const {
  std::string out = trim(text_);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

void validate(const Embedding& emb) {
  if (emb.vector.empty()) throw EmbeddingError(EmbeddingErrc::kCorrupt, "embedding has zero dimension");
  for (double v : emb.vector) {
    if (!std::isfinite(v)) throw EmbeddingError(EmbeddingErrc::kCorrupt, "embedding has a non-finite component");
  }
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw EmbeddingError(EmbeddingErrc::kDimMismatch, "embedding dims differ (" + std::to_string(a.size()) +
                                                          " vs " + std::to_string(b.size()) + ")");
  }
  double dot = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw EmbeddingError(EmbeddingErrc::kZeroNorm, "zero-norm embedding");
  return std::clamp(dot / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  return cosine_similarity(std::span<const double>(a.vector), std::span<const double>(b.vector));
}

std::vector<std::uint8_t> audio_payload(const AudioClip& mono) {
  if (!mono.is_mono()) throw EmbeddingError(EmbeddingErrc::kPrecondition, "audio payload requires a mono clip");
  std::vector<std::uint8_t> out;
  out.reserve(mono.samples.size() * 2);
  for (float s : mono.samples) {
    auto q = static_cast<std::uint16_t>(quantize_pcm16(s));
    out.push_back(static_cast<std::uint8_t>(q & 0xFF));
    out.push_back(static_cast<std::uint8_t>(q >> 8));
  }
  return out;
}

std::vector<std::uint8_t> text_payload(const TextQuery& query) {
  std::string norm = query.normalized();
  return {norm.begin(), norm.end()};
}

std::string cache_key(Modality modality, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> buf;
  buf.reserve(payload.size() + 1);
  buf.push_back(modality_tag(modality));
  buf.insert(buf.end(), payload.begin(), payload.end());
  return sha256_hex(buf);
}

std::string mock_model_id(std::size_t dim) { return "mock-splitmix64-d" + std::to_string(dim); }

Embedding mock_embed(std::span<const std::uint8_t> payload, Modality modality, std::size_t dim) {
  if (payload.empty()) throw EmbeddingError(EmbeddingErrc::kPrecondition, "mock_embed payload is empty");
  if (dim == 0) throw EmbeddingError(EmbeddingErrc::kPrecondition, "mock_embed dim must be positive");
  const std::uint8_t tag = modality_tag(modality);
  const std::uint64_t seed = fnv1a64(payload, fnv1a64(std::span<const std::uint8_t>(&tag, 1)));

  SplitMix64 rng(seed);
  Embedding emb;
  emb.modality = modality;
  emb.model_id = mock_model_id(dim);
  emb.vector.resize(dim);
  double norm2 = 0.0;
  for (double& v : emb.vector) {
    v = static_cast<double>(rng.next() >> 11) * 0x1.0p-52 - 1.0;
    norm2 += v * v;
  }
  const double norm = std::sqrt(norm2);
  for (double& v : emb.vector) v /= norm;
  return emb;
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kService:
      return "service";
    case BackendKind::kCache:
      return "cache";
    default:
      return "mock";
  }
}

BackendConfig parse_backend_spec(std::string_view spec) {
  BackendConfig config;
  if (spec == "mock") return config;
  auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("backend must be mock, mock:<dim>, cache:<dir> or service:<url>");
  }
  std::string_view kind = spec.substr(0, colon);
  std::string_view rest = spec.substr(colon + 1);
  if (rest.empty()) throw std::invalid_argument("backend '" + std::string(kind) + "' needs an argument");
  if (kind == "mock") {
    std::size_t dim = 0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), dim);
    if (ec != std::errc() || ptr != rest.data() + rest.size() || dim == 0) {
      throw std::invalid_argument("mock dim must be a positive integer");
    }
    config.mock_dim = dim;
  } else if (kind == "cache") {
    config.kind = BackendKind::kCache;
    config.cache_dir = std::string(rest);
  } else if (kind == "service") {
    config.kind = BackendKind::kService;
    config.endpoint = std::string(rest);
  } else {
    throw std::invalid_argument("unknown backend kind '" + std::string(kind) + "'");
  }
  return config;
}

Embedding EmbeddingBackend::embed_audio(const AudioClip& clip) {
  validate(clip);
  if (!clip.is_mono()) throw EmbeddingError(EmbeddingErrc::kPrecondition, "embed_audio requires a mono clip");
  if (clip.duration_seconds() < kMinClipSeconds) {
    throw EmbeddingError(EmbeddingErrc::kPrecondition, "clip shorter than 0.1 s");
  }
  return checked(do_embed_audio(clip), Modality::kAudio);
}

Embedding EmbeddingBackend::embed_text(const TextQuery& query) {
  return checked(do_embed_text(query), Modality::kText);
}

std::optional<std::size_t> EmbeddingBackend::observed_dim() const {
  std::lock_guard lock(dim_mutex_);
  return dim_;
}

Embedding EmbeddingBackend::checked(Embedding emb, Modality expected) {
  validate(emb);
  if (emb.modality != expected) {
    throw EmbeddingError(EmbeddingErrc::kModalityMismatch,
                         "backend returned " + std::string(to_string(emb.modality)) + " embedding for " +
                             std::string(to_string(expected)) + " input");
  }
  std::lock_guard lock(dim_mutex_);
  if (!dim_) {
    dim_ = emb.dim();
  } else if (*dim_ != emb.dim()) {
    throw EmbeddingError(EmbeddingErrc::kDimMismatch, "backend dim changed from " + std::to_string(*dim_) +
                                                          " to " + std::to_string(emb.dim()));
  }
  return emb;
}

MockBackend::MockBackend(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw EmbeddingError(EmbeddingErrc::kPrecondition, "mock dim must be positive");
}

BackendConfig MockBackend::config() const {
  BackendConfig c;
  c.kind = BackendKind::kMock;
  c.mock_dim = dim_;
  return c;
}

Embedding MockBackend::do_embed_audio(const AudioClip& clip) {
  return mock_embed(audio_payload(clip), Modality::kAudio, dim_);
}

Embedding MockBackend::do_embed_text(const TextQuery& query) {
  return mock_embed(text_payload(query), Modality::kText, dim_);
}

std::unique_ptr<EmbeddingBackend> make_backend(const BackendConfig& config) {
  switch (config.kind) {
    case BackendKind::kService:
      return std::make_unique<ServiceBackend>(config);
    case BackendKind::kCache:
      return std::make_unique<CacheBackend>(config.cache_dir);
    default:
      return std::make_unique<MockBackend>(config.mock_dim);
  }
}

}  // namespace clapeval
