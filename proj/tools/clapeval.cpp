// clapeval: reference-free and reference-based evaluation of language-queried
// source separation outputs.
//
// Exit codes: 0 success, 1 usage error, 2 partial record failures,
// 3 fatal (manifest or backend unusable).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "clapeval/audio_io.hpp"
#include "clapeval/embedding.hpp"
#include "clapeval/harness.hpp"
#include "clapeval/mixer.hpp"
#include "clapeval/sdr_metrics.hpp"
#include "clapeval/service_backend.hpp"

namespace fs = std::filesystem;
using namespace clapeval;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;
constexpr int kExitFatal = 3;

struct Fatal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::unique_ptr<EmbeddingBackend> open_backend(const std::string& spec) {
  BackendConfig config;
  try {
    config = parse_backend_spec(spec);
  } catch (const std::invalid_argument& e) {
    throw Usage(e.what());
  }
  try {
    auto backend = make_backend(config);
    if (auto* service = dynamic_cast<ServiceBackend*>(backend.get())) {
      auto health = service->health();
      std::cerr << "service " << config.endpoint << " serving " << health.model_id << " (dim " << health.dim
                << ")\n";
    }
    return backend;
  } catch (const std::exception& e) {
    throw Fatal(std::string("backend unusable: ") + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Fatal(path.string() + ": cannot open for writing");
  out << text;
  out.close();
  if (!out) throw Fatal(path.string() + ": write failed");
}

template <typename T>
T load_or_fatal(T (*loader)(const fs::path&), const fs::path& path) {
  try {
    return loader(path);
  } catch (const std::exception& e) {
    throw Fatal(e.what());
  }
}

struct ScoreArgs {
  std::string manifest;
  std::string backend = "mock";
  std::string metrics = "sdr,sdri,sisdr,clapscore,clapscore_i,ref_clapscore";
  std::string out;
  std::size_t workers = 1;
};

int run_score(const ScoreArgs& args) {
  std::vector<Metric> metrics;
  try {
    metrics = parse_metric_list(args.metrics);
  } catch (const std::invalid_argument& e) {
    throw Usage(e.what());
  }
  auto records = load_or_fatal(&load_manifest, args.manifest);
  auto backend = open_backend(args.backend);
  MetricReport report = score_records(records, *backend, metrics, args.workers);
  write_file(args.out, serialize_report(report));

  const std::size_t failed = report.failed_count();
  std::cerr << "scored " << report.per_record.size() << " records (" << failed << " failed) -> " << args.out
            << "\n";
  for (const auto& r : report.per_record) {
    if (r.failed) std::cerr << "  " << r.id << ": " << r.error << "\n";
  }
  return failed == 0 ? kExitOk : kExitPartial;
}

struct MixArgs {
  std::string source;
  std::string noise;
  double sdr_db = 0.0;
  std::string out;
  std::uint64_t seed = 0;
  std::string encoding = "float32";
};

int run_mix(const MixArgs& args) {
  if (args.encoding != "float32" && args.encoding != "pcm16") throw Usage("--encoding must be float32 or pcm16");
  AudioClip source = to_mono(read_wav(args.source));
  std::pair<AudioClip, MixPlan> mixed;
  if (args.noise == "white") {
    mixed = build_strategy_mixture(source, MixStrategy::kWhiteNoise, nullptr, args.sdr_db, args.seed);
  } else {
    AudioClip noise = to_mono(read_wav(args.noise));
    mixed = build_strategy_mixture(source, MixStrategy::kOtherContent, &noise, args.sdr_db, args.seed);
  }
  const auto& [mixture, plan] = mixed;
  write_wav(mixture, args.out, args.encoding == "pcm16" ? WavEncoding::kPcm16 : WavEncoding::kFloat32);

  const auto s = as_double(source);
  const auto m = as_double(mixture);
  nlohmann::ordered_json doc;
  doc["out"] = args.out;
  doc["strategy"] = std::string(to_string(plan.strategy));
  doc["target_sdr_db"] = plan.target_sdr_db;
  doc["gain"] = plan.gain;
  doc["measured_sdr_db"] = sdr(s, m);
  if (plan.seed) doc["seed"] = *plan.seed;
  std::cout << doc.dump() << "\n";
  return kExitOk;
}

struct SweepArgs {
  std::string pairs;
  std::string levels = "-20:20:5";
  std::string strategies = "source_only,white_noise,other_content";
  std::string backend = "mock";
  std::string out_dir;
  std::uint64_t seed = 0;
  bool no_audio = false;
};

int run_sweep_cmd(const SweepArgs& args) {
  SweepOptions options;
  try {
    options.grid = SdrLevelGrid::parse(args.levels);
    options.strategies.clear();
    std::string_view rest = args.strategies;
    while (true) {
      auto comma = rest.find(',');
      options.strategies.push_back(parse_strategy(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  } catch (const MixError& e) {
    throw Usage(e.what());
  }
  options.seed = args.seed;
  options.write_audio = !args.no_audio;

  auto pairs = load_or_fatal(&load_pairs, args.pairs);
  auto backend = open_backend(args.backend);
  SweepResult result;
  try {
    result = run_sweep(pairs, options, *backend, args.out_dir);
  } catch (const std::exception& e) {
    throw Fatal(std::string("sweep failed: ") + e.what());
  }
  std::cerr << "wrote " << result.rows.size() << " rows to " << (fs::path(args.out_dir) / "sweep.csv").string()
            << "\n";
  std::cout << sweep_means_csv(result);
  return kExitOk;
}

struct CorrArgs {
  std::string report;
  std::string x;
  std::string y;
};

int run_corr(const CorrArgs& args) {
  try {
    parse_metric(args.x);
    parse_metric(args.y);
  } catch (const std::invalid_argument& e) {
    throw Usage(e.what());
  }
  nlohmann::json report;
  {
    std::ifstream in(args.report);
    if (!in) throw Fatal(args.report + ": cannot open report");
    try {
      report = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Fatal(args.report + ": malformed report (" + e.what() + ")");
    }
  }
  ReportCorrelation corr;
  try {
    corr = correlate_report(report, args.x, args.y);
  } catch (const StatsError& e) {
    throw Fatal(e.what());
  }
  nlohmann::ordered_json doc;
  doc["x"] = args.x;
  doc["y"] = args.y;
  doc["r"] = corr.result.r;
  doc["n"] = corr.result.n;
  doc["t_stat"] = corr.result.t_stat;
  doc["p_value"] = corr.result.p_value;
  doc["excluded"] = corr.excluded;
  std::cout << doc.dump(2) << "\n";
  return kExitOk;
}

struct EmbedArgs {
  std::string manifest;
  std::string service;
  std::string cache;
  std::size_t workers = 1;
};

int run_embed(const EmbedArgs& args) {
  auto records = load_or_fatal(&load_manifest, args.manifest);
  std::error_code ec;
  fs::create_directories(args.cache, ec);
  if (!fs::is_directory(args.cache)) throw Fatal(args.cache + ": cannot create cache directory");

  BackendConfig config;
  config.kind = BackendKind::kService;
  config.endpoint = args.service;
  config.max_in_flight = std::max<std::size_t>(args.workers, 1);
  std::unique_ptr<ServiceBackend> service;
  try {
    service = std::make_unique<ServiceBackend>(config);
  } catch (const std::exception& e) {
    throw Usage(e.what());
  }
  PrecomputeResult result = precompute_embeddings(records, *service, args.cache, args.workers);
  std::cerr << "wrote " << result.written << " entries, " << result.already_cached << " already cached, "
            << result.failures.size() << " failed\n";
  for (const auto& f : result.failures) std::cerr << "  " << f << "\n";
  std::cout << result.written << "\n";
  return result.failures.empty() ? kExitOk : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation toolkit for language-queried audio source separation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score separated audio listed in a manifest");
  score_cmd->add_option("--manifest", score.manifest, "JSON-lines evaluation manifest")->required();
  score_cmd->add_option("--backend", score.backend, "mock[:dim] | cache:<dir> | service:<url>")->required();
  score_cmd->add_option("--metrics", score.metrics, "Comma-separated metrics")->capture_default_str();
  score_cmd->add_option("--out", score.out, "Report JSON path")->required();
  score_cmd->add_option("--workers", score.workers, "Parallel record workers")->check(CLI::PositiveNumber);

  MixArgs mix;
  auto* mix_cmd = app.add_subcommand("mix", "Mix a source with noise at an exact SDR");
  mix_cmd->add_option("--source", mix.source, "Source WAV")->required();
  mix_cmd->add_option("--noise", mix.noise, "Noise WAV, or 'white' for seeded Gaussian noise")->required();
  mix_cmd->add_option("--sdr", mix.sdr_db, "Target SDR in dB")->required();
  mix_cmd->add_option("--out", mix.out, "Output WAV")->required();
  mix_cmd->add_option("--seed", mix.seed, "White-noise seed");
  mix_cmd->add_option("--encoding", mix.encoding, "float32 | pcm16")->capture_default_str();

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "CLAPScore of simulated mixtures across SDR levels");
  sweep_cmd->add_option("--pairs", sweep.pairs, "JSON-lines pairs manifest")->required();
  sweep_cmd->add_option("--levels", sweep.levels, "start:stop:step or comma list")->capture_default_str();
  sweep_cmd->add_option("--strategies", sweep.strategies, "Comma-separated strategies")->capture_default_str();
  sweep_cmd->add_option("--backend", sweep.backend, "mock[:dim] | cache:<dir> | service:<url>")->required();
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "Output directory")->required();
  sweep_cmd->add_option("--seed", sweep.seed, "Base seed for white noise");
  sweep_cmd->add_flag("--no-audio", sweep.no_audio, "Skip writing mixture WAVs");

  CorrArgs corr;
  auto* corr_cmd = app.add_subcommand("corr", "Pearson correlation between two metrics of a report");
  corr_cmd->add_option("--report", corr.report, "Report JSON")->required();
  corr_cmd->add_option("--x", corr.x, "First metric")->required();
  corr_cmd->add_option("--y", corr.y, "Second metric")->required();

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed", "Populate the embedding cache from a service");
  embed_cmd->add_option("--manifest", embed.manifest, "JSON-lines evaluation manifest")->required();
  embed_cmd->add_option("--service", embed.service, "Service base URL")->required();
  embed_cmd->add_option("--cache", embed.cache, "Cache directory")->required();
  embed_cmd->add_option("--workers", embed.workers, "Parallel requests")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*score_cmd) return run_score(score);
    if (*mix_cmd) return run_mix(mix);
    if (*sweep_cmd) return run_sweep_cmd(sweep);
    if (*corr_cmd) return run_corr(corr);
    if (*embed_cmd) return run_embed(embed);
  } catch (const Usage& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Fatal& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitUsage;
}
