#include <algorithm>
#include <atomic>
#include <thread>

#include "clapeval/audio_io.hpp"
#include "clapeval/harness.hpp"
#include "clapeval/sdr_metrics.hpp"

namespace clapeval {
namespace {

constexpr Metric kAllMetrics[] = {Metric::kSdr,       Metric::kSdri,       Metric::kSiSdr,
                                  Metric::kClapscore, Metric::kClapscoreI, Metric::kRefClapscore};

bool wants(std::span<const Metric> metrics, Metric m) {
  return std::find(metrics.begin(), metrics.end(), m) != metrics.end();
}

AudioClip load_mono(const std::filesystem::path& path) { return to_mono(read_wav(path)); }

MetricOutcome value(double v) {
  MetricOutcome out;
  out.value = v;
  return out;
}

MetricOutcome skipped(std::string reason) {
  MetricOutcome out;
  out.skip_reason = std::move(reason);
  return out;
}

struct AlignedTriple {
  std::vector<double> reference;
  std::vector<double> estimate;
  std::vector<double> mixture;
  std::size_t truncated = 0;
};

AlignedTriple align_three(const AudioClip& reference, const AudioClip& estimate, const AudioClip* mixture) {
  AlignedPair pair = align_lengths(reference, estimate);
  AlignedTriple out;
  std::size_t n = pair.reference.size();
  if (mixture != nullptr) {
    AlignedPair with_mix = align_lengths(reference, *mixture);
    n = std::min(n, with_mix.reference.size());
    out.mixture.assign(with_mix.estimate.begin(), with_mix.estimate.begin() + static_cast<std::ptrdiff_t>(n));
  }
  out.reference.assign(pair.reference.begin(), pair.reference.begin() + static_cast<std::ptrdiff_t>(n));
  out.estimate.assign(pair.estimate.begin(), pair.estimate.begin() + static_cast<std::ptrdiff_t>(n));
  out.truncated = std::max(reference.samples.size(), estimate.samples.size()) - n;
  if (mixture != nullptr) out.truncated = std::max(out.truncated, mixture->samples.size() - n);
  return out;
}

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kSdr:
      return "sdr";
    case Metric::kSdri:
      return "sdri";
    case Metric::kSiSdr:
      return "sisdr";
    case Metric::kClapscore:
      return "clapscore";
    case Metric::kClapscoreI:
      return "clapscore_i";
    case Metric::kRefClapscore:
      return "ref_clapscore";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

std::vector<Metric> all_metrics() { return {std::begin(kAllMetrics), std::end(kAllMetrics)}; }

std::vector<Metric> parse_metric_list(std::string_view csv) {
  std::set<Metric> chosen;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    auto comma = csv.find(',', pos);
    if (comma == std::string_view::npos) comma = csv.size();
    std::string_view item = csv.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item == "all") {
      chosen.insert(std::begin(kAllMetrics), std::end(kAllMetrics));
    } else {
      chosen.insert(parse_metric(item));
    }
    pos = comma + 1;
  }
  return {chosen.begin(), chosen.end()};
}

RecordResult evaluate_record(const EvalRecord& record, EmbeddingBackend& backend,
                             std::span<const Metric> metrics) {
  RecordResult result;
  result.id = record.id;
  try {
    const bool has_reference = record.reference_path.has_value();
    const bool want_sdr_family = wants(metrics, Metric::kSdr) || wants(metrics, Metric::kSdri) ||
                                 wants(metrics, Metric::kSiSdr);
    const bool need_mixture_audio = wants(metrics, Metric::kSdri) || wants(metrics, Metric::kClapscoreI);
    const bool need_reference_audio =
        has_reference && (want_sdr_family || wants(metrics, Metric::kRefClapscore));

    const AudioClip separated = load_mono(record.separated_path);
    std::optional<AudioClip> mixture;
    if (need_mixture_audio) mixture = load_mono(record.mixture_path);
    std::optional<AudioClip> reference;
    if (need_reference_audio) reference = load_mono(*record.reference_path);

    if (want_sdr_family) {
      if (!reference) {
        for (Metric m : {Metric::kSdr, Metric::kSdri, Metric::kSiSdr}) {
          if (wants(metrics, m)) result.metrics[m] = skipped(kSkipNoReference);
        }
      } else {
        const bool with_mixture = wants(metrics, Metric::kSdri);
        AlignedTriple t = align_three(*reference, separated, with_mixture ? &*mixture : nullptr);
        result.truncated_samples = t.truncated;
        if (wants(metrics, Metric::kSdr)) result.metrics[Metric::kSdr] = value(sdr(t.reference, t.estimate));
        if (with_mixture) result.metrics[Metric::kSdri] = value(sdri(t.reference, t.estimate, t.mixture));
        if (wants(metrics, Metric::kSiSdr)) {
          result.metrics[Metric::kSiSdr] = value(si_sdr(t.reference, t.estimate).value_db);
        }
      }
    }

    const bool want_clap = wants(metrics, Metric::kClapscore) || wants(metrics, Metric::kClapscoreI) ||
                           wants(metrics, Metric::kRefClapscore);
    if (want_clap) {
      const Embedding text_emb = backend.embed_text(record.query);
      const Embedding separated_emb = backend.embed_audio(separated);
      result.model_ids.insert(text_emb.model_id);
      result.model_ids.insert(separated_emb.model_id);

      std::optional<Embedding> mixture_emb;
      if (wants(metrics, Metric::kClapscoreI)) {
        mixture_emb = backend.embed_audio(*mixture);
        result.model_ids.insert(mixture_emb->model_id);
      }
      std::optional<Embedding> reference_emb;
      if (wants(metrics, Metric::kRefClapscore) && reference) {
        reference_emb = backend.embed_audio(*reference);
        result.model_ids.insert(reference_emb->model_id);
      }

      ClapScores scores = score_all(separated_emb, text_emb, mixture_emb ? &*mixture_emb : nullptr,
                                    reference_emb ? &*reference_emb : nullptr);
      result.clapscore_before = scores.clapscore_before;
      result.clapscore_ref = scores.clapscore_ref;
      if (wants(metrics, Metric::kClapscore)) result.metrics[Metric::kClapscore] = value(scores.clapscore);
      if (scores.clapscore_i) result.metrics[Metric::kClapscoreI] = value(*scores.clapscore_i);
      if (wants(metrics, Metric::kRefClapscore)) {
        if (scores.ref_clapscore) {
          MetricOutcome out = value(*scores.ref_clapscore);
          out.flags = scores.flags;
          result.metrics[Metric::kRefClapscore] = out;
        } else {
          result.metrics[Metric::kRefClapscore] = skipped(kSkipNoReference);
        }
      }
    }
  } catch (const std::exception& e) {
    result.failed = true;
    result.error = e.what();
    result.metrics.clear();
    result.clapscore_before.reset();
    result.clapscore_ref.reset();
    result.truncated_samples.reset();
    for (Metric m : metrics) result.metrics[m] = skipped(kSkipRecordFailed);
  }
  return result;
}

std::size_t MetricReport::failed_count() const {
  return static_cast<std::size_t>(
      std::count_if(per_record.begin(), per_record.end(), [](const RecordResult& r) { return r.failed; }));
}

MetricReport score_records(const std::vector<EvalRecord>& records, EmbeddingBackend& backend,
                           std::span<const Metric> metrics, std::size_t workers) {
  MetricReport report;
  report.metrics_requested.assign(metrics.begin(), metrics.end());
  std::sort(report.metrics_requested.begin(), report.metrics_requested.end());
  report.metrics_requested.erase(std::unique(report.metrics_requested.begin(), report.metrics_requested.end()),
                                 report.metrics_requested.end());
  report.backend = backend.config();
  report.per_record.resize(records.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1)) {
      report.per_record[i] = evaluate_record(records[i], backend, report.metrics_requested);
    }
  };
  const std::size_t thread_count = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(records.size(), 1));
  if (thread_count == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) pool.emplace_back(work);
  }

  std::sort(report.per_record.begin(), report.per_record.end(),
            [](const RecordResult& a, const RecordResult& b) { return a.id < b.id; });

  for (Metric m : report.metrics_requested) {
    std::vector<double> values;
    MetricAggregate agg;
    for (const auto& r : report.per_record) {
      auto it = r.metrics.find(m);
      if (it != r.metrics.end() && it->second.usable()) {
        values.push_back(*it->second.value);
      } else {
        ++agg.excluded;
      }
    }
    if (!values.empty()) agg.summary = aggregate(values);
    report.aggregates[m] = agg;
  }
  for (const auto& r : report.per_record) report.model_ids.insert(r.model_ids.begin(), r.model_ids.end());
  return report;
}

}  // namespace clapeval
