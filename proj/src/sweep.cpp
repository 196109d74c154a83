#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "clapeval/audio_io.hpp"
#include "clapeval/harness.hpp"

namespace clapeval {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace

std::string mixture_file_name(std::string_view id, MixStrategy strategy, double level_db) {
  return std::string(id) + "__" + std::string(to_string(strategy)) + "__" + format_double(level_db) + "dB.wav";
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "strategy,level_db,id,clapscore\n";
  for (const auto& row : result.rows) {
    out << to_string(row.strategy) << ',' << format_double(row.level_db) << ',' << row.id << ','
        << format_double(row.clapscore) << '\n';
  }
  return out.str();
}

std::string sweep_means_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "strategy,level_db,mean_clapscore,count\n";
  for (const auto& m : result.means) {
    out << to_string(m.strategy) << ',' << format_double(m.level_db) << ',' << format_double(m.mean_clapscore)
        << ',' << m.count << '\n';
  }
  return out.str();
}

SweepResult run_sweep(const std::vector<SweepPair>& pairs, const SweepOptions& options,
                      EmbeddingBackend& backend, const std::filesystem::path& out_dir) {
  if (options.strategies.empty()) throw std::invalid_argument("no mixing strategies selected");
  const bool needs_companion =
      std::find(options.strategies.begin(), options.strategies.end(), MixStrategy::kOtherContent) !=
      options.strategies.end();
  std::filesystem::create_directories(out_dir);

  std::vector<SweepPair> ordered = pairs;
  std::sort(ordered.begin(), ordered.end(), [](const SweepPair& a, const SweepPair& b) { return a.id < b.id; });

  // Indexed by [strategy position][level position] so the output order is
  // strategy-major, then level, then id.
  const auto& levels = options.grid.levels();
  std::vector<std::vector<std::vector<SweepRow>>> cells(
      options.strategies.size(), std::vector<std::vector<SweepRow>>(levels.size()));
  std::ostringstream index;

  for (const auto& pair : ordered) {
    const AudioClip source = to_mono(read_wav(pair.source_path));
    std::optional<AudioClip> companion;
    if (needs_companion) {
      if (!pair.companion_path) throw MixError("pair '" + pair.id + "' has no companion_path for other_content");
      companion = to_mono(read_wav(*pair.companion_path));
    }
    const Embedding text_emb = backend.embed_text(pair.query);
    const std::uint64_t seed = derive_record_seed(options.seed, pair.id);

    for (std::size_t si = 0; si < options.strategies.size(); ++si) {
      const MixStrategy strategy = options.strategies[si];
      std::optional<double> clean_score;
      for (std::size_t li = 0; li < levels.size(); ++li) {
        auto [mixture, plan] =
            build_strategy_mixture(source, strategy, companion ? &*companion : nullptr, levels[li], seed);
        double score = 0.0;
        if (strategy == MixStrategy::kSourceOnly && clean_score) {
          score = *clean_score;
        } else {
          score = clapscore(backend.embed_audio(mixture), text_emb);
          if (strategy == MixStrategy::kSourceOnly) clean_score = score;
        }
        cells[si][li].push_back(SweepRow{strategy, levels[li], pair.id, score});

        const std::string file = mixture_file_name(pair.id, strategy, levels[li]);
        if (options.write_audio) write_wav(mixture, out_dir / file, WavEncoding::kFloat32);
        nlohmann::ordered_json entry;
        entry["file"] = file;
        entry["id"] = pair.id;
        entry["strategy"] = std::string(to_string(plan.strategy));
        entry["target_sdr_db"] = plan.target_sdr_db;
        entry["gain"] = plan.gain;
        if (plan.seed) {
          entry["seed"] = *plan.seed;
        } else {
          entry["seed"] = nullptr;
        }
        index << entry.dump() << '\n';
      }
    }
  }

  SweepResult result;
  for (std::size_t si = 0; si < options.strategies.size(); ++si) {
    for (std::size_t li = 0; li < levels.size(); ++li) {
      const auto& cell = cells[si][li];
      double sum = 0.0;
      for (const auto& row : cell) {
        result.rows.push_back(row);
        sum += row.clapscore;
      }
      if (!cell.empty()) {
        result.means.push_back(
            SweepMean{options.strategies[si], levels[li], sum / static_cast<double>(cell.size()), cell.size()});
      }
    }
  }

  write_text(out_dir / "sweep.csv", sweep_csv(result));
  write_text(out_dir / "sweep_means.csv", sweep_means_csv(result));
  write_text(out_dir / "index.jsonl", index.str());
  return result;
}

}  // namespace clapeval
