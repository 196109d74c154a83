#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "clapeval/audio_io.hpp"
#include "clapeval/embedding_cache.hpp"
#include "clapeval/harness.hpp"

namespace clapeval {
namespace {

struct WorkItem {
  Modality modality;
  std::filesystem::path audio_path;
  std::optional<TextQuery> query;

  std::string label() const {
    return modality == Modality::kAudio ? audio_path.string() : "query '" + query->text() + "'";
  }
};

}  // namespace

PrecomputeResult precompute_embeddings(const std::vector<EvalRecord>& records, EmbeddingBackend& backend,
                                       const std::filesystem::path& cache_dir, std::size_t workers) {
  std::filesystem::create_directories(cache_dir);
  std::vector<WorkItem> items;
  std::set<std::filesystem::path> seen_paths;
  std::set<std::string> seen_texts;
  auto add_audio = [&](const std::filesystem::path& p) {
    if (seen_paths.insert(p).second) items.push_back(WorkItem{Modality::kAudio, p, std::nullopt});
  };
  for (const auto& r : records) {
    add_audio(r.mixture_path);
    add_audio(r.separated_path);
    if (r.reference_path) add_audio(*r.reference_path);
    if (seen_texts.insert(r.query.normalized()).second) {
      items.push_back(WorkItem{Modality::kText, {}, r.query});
    }
  }

  PrecomputeResult result;
  std::mutex mutex;
  std::set<std::string> claimed_keys;
  std::vector<std::string> failures(items.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) {
      const WorkItem& item = items[i];
      try {
        std::optional<AudioClip> clip;
        std::string key;
        if (item.modality == Modality::kAudio) {
          clip = to_mono(read_wav(item.audio_path));
          key = cache_key(Modality::kAudio, audio_payload(*clip));
        } else {
          key = cache_key(Modality::kText, text_payload(*item.query));
        }
        {
          std::lock_guard lock(mutex);
          // Identical content under different paths maps to one key.
          if (cache_contains(cache_dir, key) || !claimed_keys.insert(key).second) {
            ++result.already_cached;
            continue;
          }
        }
        Embedding emb = clip ? backend.embed_audio(*clip) : backend.embed_text(*item.query);
        cache_put(cache_dir, key, emb);
        std::lock_guard lock(mutex);
        ++result.written;
      } catch (const std::exception& e) {
        failures[i] = item.label() + ": " + e.what();
      }
    }
  };

  const std::size_t thread_count = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(items.size(), 1));
  if (thread_count == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < thread_count; ++t) pool.emplace_back(work);
  }
  for (auto& f : failures) {
    if (!f.empty()) result.failures.push_back(std::move(f));
  }
  return result;
}

}  // namespace clapeval
