#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clapeval/clap_metrics.hpp"
#include "clapeval/embedding.hpp"
#include "clapeval/mixer.hpp"
#include "clapeval/stats.hpp"

namespace clapeval {

inline constexpr const char* kToolVersion = CLAPEVAL_VERSION;

// ---------------------------------------------------------------------------
// Manifests

class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::size_t line, const std::string& what)
      : std::runtime_error(what), line_(line) {}
  /// 1-based line number, 0 when the whole file is at fault.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct EvalRecord {
  std::string id;
  std::filesystem::path mixture_path;
  std::filesystem::path separated_path;
  std::optional<std::filesystem::path> reference_path;
  TextQuery query;
};

/// JSON-lines manifest; relative paths resolve against `base_dir`. Blank lines
/// are ignored.
std::vector<EvalRecord> parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
std::vector<EvalRecord> load_manifest(const std::filesystem::path& path);

struct SweepPair {
  std::string id;
  std::filesystem::path source_path;
  std::optional<std::filesystem::path> companion_path;
  TextQuery query;
};

/// Pairs manifest: one {"id", "source_path", "companion_path", "query"} per line.
std::vector<SweepPair> parse_pairs(std::istream& in, const std::filesystem::path& base_dir);
std::vector<SweepPair> load_pairs(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Metrics and scoring

enum class Metric { kSdr, kSdri, kSiSdr, kClapscore, kClapscoreI, kRefClapscore };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);
/// Comma-separated list; duplicates collapse, order is canonical.
std::vector<Metric> parse_metric_list(std::string_view csv);
std::vector<Metric> all_metrics();

inline constexpr const char* kSkipNoReference = "no_reference";
inline constexpr const char* kSkipRecordFailed = "record_failed";

/// One metric for one record: a value (possibly flagged) or a skip reason.
struct MetricOutcome {
  std::optional<double> value;
  std::string skip_reason;
  std::set<ScoreFlag> flags;

  bool usable() const { return value.has_value() && flags.empty(); }
};

struct RecordResult {
  std::string id;
  bool failed = false;
  std::string error;
  std::map<Metric, MetricOutcome> metrics;
  std::optional<double> clapscore_before;
  std::optional<double> clapscore_ref;
  std::optional<std::size_t> truncated_samples;
  std::set<std::string> model_ids;
};

/// Computes the requested metrics. Never throws for per-record problems; the
/// result is marked failed instead.
RecordResult evaluate_record(const EvalRecord& record, EmbeddingBackend& backend,
                             std::span<const Metric> metrics);

struct MetricAggregate {
  std::optional<Summary> summary;
  std::size_t excluded = 0;
};

struct MetricReport {
  std::vector<RecordResult> per_record;
  std::map<Metric, MetricAggregate> aggregates;
  std::vector<Metric> metrics_requested;
  BackendConfig backend;
  std::set<std::string> model_ids;
  std::string tool_version = kToolVersion;

  std::size_t failed_count() const;
};

/// Evaluates every record with up to `workers` threads; output is sorted by id
/// and independent of the worker count.
MetricReport score_records(const std::vector<EvalRecord>& records, EmbeddingBackend& backend,
                           std::span<const Metric> metrics, std::size_t workers = 1);

nlohmann::ordered_json report_to_json(const MetricReport& report);
std::string serialize_report(const MetricReport& report);

struct ReportCorrelation {
  CorrelationResult result;
  std::size_t excluded = 0;
};

/// Pearson correlation of two metrics over records where both are usable.
ReportCorrelation correlate_report(const nlohmann::json& report, std::string_view x_metric,
                                   std::string_view y_metric);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepOptions {
  SdrLevelGrid grid;
  std::vector<MixStrategy> strategies{MixStrategy::kSourceOnly, MixStrategy::kWhiteNoise,
                                      MixStrategy::kOtherContent};
  std::uint64_t seed = 0;
  bool write_audio = true;
};

struct SweepRow {
  MixStrategy strategy;
  double level_db;
  std::string id;
  double clapscore;
};

struct SweepMean {
  MixStrategy strategy;
  double level_db;
  double mean_clapscore;
  std::size_t count;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepMean> means;
};

/// Mixes every pair under every strategy and level, scores each mixture
/// against the pair's query, and writes sweep.csv, sweep_means.csv,
/// index.jsonl and (optionally) the mixtures into `out_dir`.
SweepResult run_sweep(const std::vector<SweepPair>& pairs, const SweepOptions& options,
                      EmbeddingBackend& backend, const std::filesystem::path& out_dir);

std::string sweep_csv(const SweepResult& result);
std::string sweep_means_csv(const SweepResult& result);

/// `<id>__<strategy>__<level>dB.wav`
std::string mixture_file_name(std::string_view id, MixStrategy strategy, double level_db);

// ---------------------------------------------------------------------------
// Cache population

struct PrecomputeResult {
  std::size_t written = 0;
  std::size_t already_cached = 0;
  std::vector<std::string> failures;
};

/// Embeds every distinct audio file and query referenced by the manifest that
/// is not yet cached, storing the results under content-addressed keys.
PrecomputeResult precompute_embeddings(const std::vector<EvalRecord>& records, EmbeddingBackend& backend,
                                       const std::filesystem::path& cache_dir, std::size_t workers = 1);

/// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace clapeval
