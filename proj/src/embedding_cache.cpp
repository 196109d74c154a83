#include "clapeval/embedding_cache.hpp"

#include <atomic>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <json.hpp>

namespace clapeval {
namespace {

constexpr std::string_view kSuffix = ".emb.json";

bool is_sidecar(const std::filesystem::path& p) {
  const std::string name = p.filename().string();
  return name.size() > kSuffix.size() && name.ends_with(kSuffix);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmbeddingError(EmbeddingErrc::kIo, path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_name(const std::string& key) {
  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream name;
  name << '.' << key << ".tmp." << ::getpid() << '.'
       << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.' << counter.fetch_add(1);
  return name.str();
}

/// Dim of any entry already in the cache, excluding in-flight temp files.
std::optional<std::size_t> existing_dim(const std::filesystem::path& cache_dir) {
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(cache_dir, ec)) {
    if (!entry.is_regular_file() || !is_sidecar(entry.path())) continue;
    try {
      return parse_sidecar(read_file(entry.path()), entry.path().string()).dim();
    } catch (const EmbeddingError&) {
      continue;
    }
  }
  return std::nullopt;
}

}  // namespace

std::filesystem::path cache_entry_path(const std::filesystem::path& cache_dir, const std::string& key) {
  return cache_dir / (key + std::string(kSuffix));
}

bool cache_contains(const std::filesystem::path& cache_dir, const std::string& key) {
  std::error_code ec;
  return std::filesystem::is_regular_file(cache_entry_path(cache_dir, key), ec);
}

std::string serialize_sidecar(const Embedding& emb) {
  nlohmann::ordered_json doc;
  doc["model_id"] = emb.model_id;
  doc["modality"] = std::string(to_string(emb.modality));
  doc["dim"] = emb.dim();
  doc["vector"] = emb.vector;
  return doc.dump() + "\n";
}

Embedding parse_sidecar(const std::string& text, const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw EmbeddingError(EmbeddingErrc::kCorrupt, origin + ": unparsable sidecar (" + e.what() + ")");
  }
  try {
    Embedding emb;
    emb.model_id = doc.at("model_id").get<std::string>();
    emb.modality = parse_modality(doc.at("modality").get<std::string>());
    const auto dim = doc.at("dim").get<std::size_t>();
    emb.vector = doc.at("vector").get<std::vector<double>>();
    if (emb.vector.size() != dim) {
      throw EmbeddingError(EmbeddingErrc::kCorrupt, origin + ": dim " + std::to_string(dim) +
                                                        " disagrees with vector length " +
                                                        std::to_string(emb.vector.size()));
    }
    validate(emb);
    return emb;
  } catch (const nlohmann::json::exception& e) {
    throw EmbeddingError(EmbeddingErrc::kCorrupt, origin + ": malformed sidecar (" + e.what() + ")");
  } catch (const EmbeddingError& e) {
    if (e.code() == EmbeddingErrc::kCorrupt) throw;
    throw EmbeddingError(EmbeddingErrc::kCorrupt, origin + ": " + e.what());
  }
}

void cache_put(const std::filesystem::path& cache_dir, const std::string& key, const Embedding& emb) {
  validate(emb);
  std::error_code ec;
  if (!std::filesystem::is_directory(cache_dir, ec)) {
    throw EmbeddingError(EmbeddingErrc::kIo, cache_dir.string() + ": cache directory does not exist");
  }
  if (auto dim = existing_dim(cache_dir); dim && *dim != emb.dim()) {
    throw EmbeddingError(EmbeddingErrc::kDimMismatch, "cache holds dim " + std::to_string(*dim) +
                                                          " but entry '" + key + "' has dim " +
                                                          std::to_string(emb.dim()));
  }

  const auto tmp = cache_dir / temp_name(key);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw EmbeddingError(EmbeddingErrc::kIo, tmp.string() + ": cannot open for writing");
    out << serialize_sidecar(emb);
    out.close();
    if (!out) {
      std::filesystem::remove(tmp, ec);
      throw EmbeddingError(EmbeddingErrc::kIo, tmp.string() + ": write failed");
    }
  }
  std::filesystem::rename(tmp, cache_entry_path(cache_dir, key), ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw EmbeddingError(EmbeddingErrc::kIo, "cannot publish cache entry '" + key + "': " + ec.message());
  }
}

Embedding cache_get(const std::filesystem::path& cache_dir, const std::string& key) {
  const auto path = cache_entry_path(cache_dir, key);
  if (!cache_contains(cache_dir, key)) {
    throw EmbeddingError(EmbeddingErrc::kCacheMiss, "cache miss for key " + key);
  }
  return parse_sidecar(read_file(path), path.string());
}

CacheBackend::CacheBackend(std::filesystem::path cache_dir) : cache_dir_(std::move(cache_dir)) {
  std::error_code ec;
  if (!std::filesystem::is_directory(cache_dir_, ec)) {
    throw EmbeddingError(EmbeddingErrc::kIo, cache_dir_.string() + ": cache directory does not exist");
  }
}

BackendConfig CacheBackend::config() const {
  BackendConfig c;
  c.kind = BackendKind::kCache;
  c.cache_dir = cache_dir_;
  return c;
}

Embedding CacheBackend::do_embed_audio(const AudioClip& clip) {
  return cache_get(cache_dir_, cache_key(Modality::kAudio, audio_payload(clip)));
}

Embedding CacheBackend::do_embed_text(const TextQuery& query) {
  return cache_get(cache_dir_, cache_key(Modality::kText, text_payload(query)));
}

}  // namespace clapeval
