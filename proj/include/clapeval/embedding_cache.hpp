#pragma once

#include <filesystem>
#include <string>

#include "clapeval/embedding.hpp"

namespace clapeval {

/// `<cache_dir>/<key>.emb.json`
std::filesystem::path cache_entry_path(const std::filesystem::path& cache_dir, const std::string& key);

bool cache_contains(const std::filesystem::path& cache_dir, const std::string& key);

/// Writes the sidecar through a temporary file and an atomic rename. Rejects
/// embeddings whose dim differs from entries already present.
void cache_put(const std::filesystem::path& cache_dir, const std::string& key, const Embedding& emb);

/// Throws EmbeddingError(kCacheMiss) for absent keys and kCorrupt for
/// unparsable or inconsistent sidecars.
Embedding cache_get(const std::filesystem::path& cache_dir, const std::string& key);

std::string serialize_sidecar(const Embedding& emb);
Embedding parse_sidecar(const std::string& text, const std::string& origin);

/// Read-only backend resolving content-addressed keys against a cache directory.
class CacheBackend final : public EmbeddingBackend {
 public:
  explicit CacheBackend(std::filesystem::path cache_dir);
  BackendConfig config() const override;

 protected:
  Embedding do_embed_audio(const AudioClip& clip) override;
  Embedding do_embed_text(const TextQuery& query) override;

 private:
  std::filesystem::path cache_dir_;
};

}  // namespace clapeval
