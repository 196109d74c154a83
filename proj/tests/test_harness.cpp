#include <gtest/gtest.h>

#include <sstream>

#include "clapeval/embedding_cache.hpp"
#include "clapeval/harness.hpp"
#include "clapeval/sdr_metrics.hpp"
#include "clapeval/service_backend.hpp"
#include "clapeval/stats.hpp"
#include "fake_service.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace clapeval;
using clapeval::testing::TempDir;

namespace {

std::vector<EvalRecord> parse(const std::string& text, const std::filesystem::path& base = "/data") {
  std::istringstream in(text);
  return parse_manifest(in, base);
}

std::size_t manifest_error_line(const std::string& text, std::string* message = nullptr) {
  try {
    parse(text);
  } catch (const ManifestError& e) {
    if (message) *message = e.what();
    return e.line();
  }
  ADD_FAILURE() << "expected ManifestError";
  return 0;
}

EvalRecord record(std::string id, std::filesystem::path mix, std::filesystem::path sep,
                  std::optional<std::filesystem::path> ref, std::string query) {
  return EvalRecord{std::move(id), std::move(mix), std::move(sep), std::move(ref), TextQuery(std::move(query))};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Manifest, ParsesRecords) {
  auto records = parse(
      R"({"id":"a","mixture_path":"m1.wav","separated_path":"s1.wav","reference_path":"r1.wav","query":"dog"})"
      "\n\n"
      R"({"id":"b","mixture_path":"/abs/m2.wav","separated_path":"s2.wav","query":"cat"})"
      "\n"
      R"({"id":"c","mixture_path":"m3.wav","separated_path":"s3.wav","reference_path":null,"query":"bird"})"
      "\n");
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0].mixture_path, std::filesystem::path("/data/m1.wav"));
  EXPECT_EQ(records[0].reference_path, std::filesystem::path("/data/r1.wav"));
  EXPECT_EQ(records[1].mixture_path, std::filesystem::path("/abs/m2.wav"));
  EXPECT_FALSE(records[1].reference_path);
  EXPECT_FALSE(records[2].reference_path);
  EXPECT_EQ(records[2].query.text(), "bird");
}

TEST(Manifest, ErrorsNameLineAndField) {
  std::string message;
  EXPECT_EQ(manifest_error_line(R"({"id":"a","mixture_path":"m","separated_path":"s","query":"q"})"
                                "\n"
                                R"({"id":"a","mixture_path":"m","separated_path":"s","query":"q"})",
                                &message),
            2u);
  EXPECT_NE(message.find("line 2"), std::string::npos);
  EXPECT_NE(message.find("duplicate id 'a'"), std::string::npos);

  EXPECT_EQ(manifest_error_line(R"({"id":"a","mixture_path":"m","separated_path":"s"})", &message), 1u);
  EXPECT_NE(message.find("'query'"), std::string::npos);

  EXPECT_EQ(manifest_error_line("\n{not json", &message), 2u);
  EXPECT_NE(message.find("malformed JSON"), std::string::npos);
  EXPECT_EQ(manifest_error_line(R"({"id":"a","mixture_path":"m","separated_path":"s","query":"   "})"), 1u);
  EXPECT_EQ(manifest_error_line(R"({"id":"a","mixture_path":3,"separated_path":"s","query":"q"})"), 1u);
  EXPECT_EQ(manifest_error_line("[1,2]"), 1u);
  EXPECT_THROW(load_manifest("/nonexistent/manifest.jsonl"), ManifestError);
}

TEST(Manifest, LoadResolvesAgainstManifestDirectory) {
  TempDir dir;
  auto path = clapeval::testing::write_synthetic_manifest(dir.path());
  auto records = load_manifest(path);
  ASSERT_EQ(records.size(), 6u);
  for (const auto& r : records) EXPECT_TRUE(std::filesystem::exists(r.separated_path)) << r.separated_path;
}

TEST(Pairs, Parses) {
  std::istringstream in(R"({"id":"p","source_path":"a.wav","companion_path":"b.wav","query":"x"})"
                        "\n"
                        R"({"id":"q","source_path":"c.wav","query":"y"})");
  auto pairs = parse_pairs(in, "/d");
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].companion_path, std::filesystem::path("/d/b.wav"));
  EXPECT_FALSE(pairs[1].companion_path);
}

TEST(Metrics, NamesAndLists) {
  for (Metric m : all_metrics()) EXPECT_EQ(parse_metric(to_string(m)), m);
  EXPECT_EQ(parse_metric_list("clapscore, sdr,clapscore"), (std::vector<Metric>{Metric::kSdr, Metric::kClapscore}));
  EXPECT_EQ(parse_metric_list("all"), all_metrics());
  EXPECT_THROW(parse_metric_list("sdr,pesq"), std::invalid_argument);
}

class EvaluateRecord : public ::testing::Test {
 protected:
  void SetUp() override {
    clapeval::testing::write_synthetic_manifest(dir.path());
    records = load_manifest(dir / "manifest.jsonl");
  }
  TempDir dir;
  std::vector<EvalRecord> records;
  MockBackend backend;
};

TEST_F(EvaluateRecord, WithoutReferenceSkipsSdrFamily) {
  const EvalRecord& r = records[5];
  ASSERT_FALSE(r.reference_path);
  auto metrics = all_metrics();
  auto result = evaluate_record(r, backend, metrics);
  EXPECT_FALSE(result.failed) << result.error;
  for (Metric m : {Metric::kSdr, Metric::kSdri, Metric::kSiSdr, Metric::kRefClapscore}) {
    EXPECT_FALSE(result.metrics.at(m).value);
    EXPECT_EQ(result.metrics.at(m).skip_reason, kSkipNoReference);
  }
  EXPECT_TRUE(result.metrics.at(Metric::kClapscore).usable());
  EXPECT_TRUE(result.metrics.at(Metric::kClapscoreI).usable());
  EXPECT_EQ(result.model_ids, std::set<std::string>{mock_model_id(kDefaultMockDim)});
}

TEST_F(EvaluateRecord, SeparatedEqualsReference) {
  // Pick a query whose score is positive so the harmonic mean is defined.
  const auto ref = dir / "rec0_ref.wav";
  std::optional<EvalRecord> r;
  for (int q = 0; q < 50 && !r; ++q) {
    EvalRecord candidate = record("x", dir / "rec0_mix.wav", ref, ref, "query " + std::to_string(q));
    auto metrics = all_metrics();
    if (*evaluate_record(candidate, backend, metrics).metrics.at(Metric::kClapscore).value > 0) r = candidate;
  }
  ASSERT_TRUE(r);
  auto metrics = all_metrics();
  auto result = evaluate_record(*r, backend, metrics);
  const double score = *result.metrics.at(Metric::kClapscore).value;
  EXPECT_EQ(*result.clapscore_ref, score);
  EXPECT_NEAR(*result.metrics.at(Metric::kRefClapscore).value, score, 1e-15);
  EXPECT_EQ(*result.metrics.at(Metric::kSdr).value, kSdrClampDb);
}

TEST_F(EvaluateRecord, SeparatedEqualsMixture) {
  EvalRecord r = record("x", dir / "rec1_mix.wav", dir / "rec1_mix.wav", dir / "rec1_ref.wav", "church bells");
  auto metrics = all_metrics();
  auto result = evaluate_record(r, backend, metrics);
  ASSERT_FALSE(result.failed) << result.error;
  EXPECT_EQ(*result.metrics.at(Metric::kClapscoreI).value, 0.0);
  EXPECT_EQ(*result.metrics.at(Metric::kSdri).value, 0.0);
}

TEST_F(EvaluateRecord, SdrMatchesMixingLevel) {
  auto metrics = parse_metric_list("sdr");
  auto result = evaluate_record(records[2], backend, metrics);
  // rec2 separated = source + interferer at 10 dB.
  EXPECT_NEAR(*result.metrics.at(Metric::kSdr).value, 10.0, 1e-4);
  EXPECT_EQ(result.metrics.size(), 1u);
  EXPECT_EQ(*result.truncated_samples, 0u);
}

TEST_F(EvaluateRecord, FailureMarksEveryMetric) {
  EvalRecord r = record("bad", dir / "missing.wav", dir / "rec0_sep.wav", std::nullopt, "x");
  auto metrics = all_metrics();
  auto result = evaluate_record(r, backend, metrics);
  EXPECT_TRUE(result.failed);
  EXPECT_NE(result.error.find("missing.wav"), std::string::npos);
  EXPECT_EQ(result.metrics.size(), metrics.size());
  for (const auto& [m, outcome] : result.metrics) EXPECT_EQ(outcome.skip_reason, kSkipRecordFailed);
}

TEST_F(EvaluateRecord, LengthMismatchBeyondTolerance) {
  AudioClip short_clip = read_wav(dir / "rec0_ref.wav");
  short_clip.samples.resize(short_clip.samples.size() / 2);
  write_wav(short_clip, dir / "short.wav", WavEncoding::kFloat32);
  EvalRecord r = record("x", dir / "rec0_mix.wav", dir / "short.wav", dir / "rec0_ref.wav", "q");
  auto metrics = all_metrics();
  EXPECT_TRUE(evaluate_record(r, backend, metrics).failed);
}

TEST_F(EvaluateRecord, ReportIsIndependentOfWorkers) {
  records.push_back(record("zz_failed", dir / "nope.wav", dir / "nope.wav", std::nullopt, "q"));
  auto metrics = all_metrics();
  const std::string one = serialize_report(score_records(records, backend, metrics, 1));
  for (std::size_t workers : {2u, 4u, 8u, 16u}) {
    MockBackend fresh;
    EXPECT_EQ(serialize_report(score_records(records, fresh, metrics, workers)), one) << workers;
  }
  auto doc = nlohmann::json::parse(one);
  EXPECT_EQ(doc["record_count"], 7);
  EXPECT_EQ(doc["failed_count"], 1);
  EXPECT_EQ(doc["per_record"].size(), 7u);
  EXPECT_EQ(doc["per_record"][6]["status"], "failed");
  EXPECT_EQ(doc["aggregates"]["sdr"]["count"], 4);
  EXPECT_EQ(doc["aggregates"]["sdr"]["excluded"], 3);
  EXPECT_EQ(doc["aggregates"]["clapscore"]["count"], 6);
  EXPECT_EQ(doc["backend"]["kind"], "mock");
}

TEST_F(EvaluateRecord, AggregatesMatchPerRecordValues) {
  auto metrics = all_metrics();
  auto report = score_records(records, backend, metrics, 3);
  std::vector<double> scores;
  for (const auto& r : report.per_record) scores.push_back(*r.metrics.at(Metric::kClapscore).value);
  auto expected = aggregate(scores);
  const auto& got = *report.aggregates.at(Metric::kClapscore).summary;
  EXPECT_EQ(got.mean, expected.mean);
  EXPECT_EQ(got.stddev, expected.stddev);
  EXPECT_EQ(got.count, 6u);
}

TEST(CorrelateReport, Examples) {
  nlohmann::json doc;
  doc["per_record"] = nlohmann::json::array();
  for (int i = 0; i < 5; ++i) {
    nlohmann::json rec;
    rec["metrics"]["sdr"]["value"] = 0.37 * i - 1;
    rec["metrics"]["clapscore"]["value"] = 2 * (0.37 * i - 1) + 1;
    doc["per_record"].push_back(rec);
  }
  auto c = correlate_report(doc, "sdr", "clapscore");
  EXPECT_NEAR(c.result.r, 1.0, 1e-12);
  EXPECT_EQ(c.result.n, 5u);
  EXPECT_EQ(c.excluded, 0u);

  doc["per_record"][0]["metrics"]["sdr"] = {{"skipped", "no_reference"}};
  doc["per_record"][1]["metrics"]["clapscore"]["flags"] = {"nonpositive_harmonic_input"};
  doc["per_record"][2]["metrics"].erase("sdr");
  EXPECT_THROW(correlate_report(doc, "sdr", "clapscore"), StatsError);
  EXPECT_THROW(correlate_report(doc, "sdr", "bogus"), std::invalid_argument);
}

TEST(CorrelateReport, MatchesSpreadsheetOracle) {
  TempDir dir;
  clapeval::testing::ManifestOptions options;
  options.records = 6;
  options.with_reference = 6;
  auto records = load_manifest(clapeval::testing::write_synthetic_manifest(dir.path(), options));
  MockBackend backend;
  auto metrics = all_metrics();
  auto doc = nlohmann::json::parse(serialize_report(score_records(records, backend, metrics, 2)));
  auto c = correlate_report(doc, "sisdr", "clapscore");

  // Textbook formula in long double: sum of products of deviations.
  long double sx = 0, sy = 0;
  std::vector<long double> xs, ys;
  for (const auto& rec : doc["per_record"]) {
    xs.push_back(rec["metrics"]["sisdr"]["value"].get<double>());
    ys.push_back(rec["metrics"]["clapscore"]["value"].get<double>());
    sx += xs.back();
    sy += ys.back();
  }
  const long double mx = sx / xs.size(), my = sy / ys.size();
  long double cxy = 0, cxx = 0, cyy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    cxy += (xs[i] - mx) * (ys[i] - my);
    cxx += (xs[i] - mx) * (xs[i] - mx);
    cyy += (ys[i] - my) * (ys[i] - my);
  }
  EXPECT_NEAR(c.result.r, static_cast<double>(cxy / std::sqrt(cxx * cyy)), 1e-12);
  EXPECT_EQ(c.result.n, 6u);
}

TEST(Sweep, CardinalityOrderAndDeterminism) {
  TempDir dir;
  auto pairs = load_pairs(clapeval::testing::write_synthetic_pairs(dir / "in"));
  SweepOptions options;
  options.seed = 77;
  MockBackend backend;
  auto result = run_sweep(pairs, options, backend, dir / "out1");
  ASSERT_EQ(result.rows.size(), 54u);
  EXPECT_EQ(result.means.size(), 27u);
  EXPECT_EQ(lines_of(clapeval::testing::read_text(dir / "out1" / "sweep.csv")).size(), 55u);
  EXPECT_EQ(lines_of(clapeval::testing::read_text(dir / "out1" / "index.jsonl")).size(), 54u);
  EXPECT_TRUE(std::filesystem::exists(dir / "out1" / mixture_file_name("pair0", MixStrategy::kWhiteNoise, -20)));
  EXPECT_EQ(mixture_file_name("pair0", MixStrategy::kWhiteNoise, -20), "pair0__white_noise__-20dB.wav");

  for (std::size_t i = 0; i < 18; ++i) {
    EXPECT_EQ(result.rows[i].strategy, MixStrategy::kSourceOnly);
    EXPECT_EQ(result.rows[i].clapscore, result.rows[i % 2].clapscore);
  }
  EXPECT_EQ(result.rows[18].strategy, MixStrategy::kWhiteNoise);
  EXPECT_EQ(result.rows[18].level_db, -20.0);
  EXPECT_EQ(result.rows[18].id, "pair0");
  EXPECT_EQ(result.rows[19].id, "pair1");

  auto again = run_sweep(pairs, options, backend, dir / "out2");
  for (const char* file : {"sweep.csv", "sweep_means.csv", "index.jsonl"}) {
    EXPECT_EQ(clapeval::testing::read_text(dir / "out1" / file), clapeval::testing::read_text(dir / "out2" / file))
        << file;
  }
  EXPECT_EQ(clapeval::testing::read_text(dir / "out1" / "pair1__other_content__5dB.wav"),
            clapeval::testing::read_text(dir / "out2" / "pair1__other_content__5dB.wav"));
}

TEST(Sweep, WrittenMixturesMatchPlans) {
  TempDir dir;
  auto pairs = load_pairs(clapeval::testing::write_synthetic_pairs(dir / "in"));
  SweepOptions options;
  options.seed = 11;
  MockBackend backend;
  run_sweep(pairs, options, backend, dir / "out");
  const AudioClip source = read_wav(pairs[0].source_path);
  const AudioClip companion = read_wav(*pairs[0].companion_path);
  const auto s = as_double(source);
  for (auto strategy : {MixStrategy::kWhiteNoise, MixStrategy::kOtherContent}) {
    for (double level : options.grid.levels()) {
      auto [mixture, plan] = build_strategy_mixture(source, strategy, &companion, level,
                                                    derive_record_seed(options.seed, "pair0"));
      EXPECT_NEAR(sdr(s, as_double(mixture)), level, 1e-6);
      // On disk the mixture is clamped to [-1, 1].
      auto written = read_wav(dir / "out" / mixture_file_name("pair0", strategy, level));
      ASSERT_EQ(written.samples.size(), mixture.samples.size());
      for (std::size_t i = 0; i < mixture.samples.size(); ++i) {
        ASSERT_EQ(written.samples[i], std::clamp(mixture.samples[i], -1.0f, 1.0f)) << level << " @" << i;
      }
    }
  }
}

TEST(Sweep, MissingCompanionAborts) {
  TempDir dir;
  clapeval::testing::write_synthetic_pairs(dir.path());
  std::istringstream in(R"({"id":"solo","source_path":"pair0_src.wav","query":"x"})");
  auto pairs = parse_pairs(in, dir.path());
  MockBackend backend;
  EXPECT_THROW(run_sweep(pairs, SweepOptions{}, backend, dir / "out"), MixError);
  SweepOptions white_only;
  white_only.strategies = {MixStrategy::kWhiteNoise};
  EXPECT_EQ(run_sweep(pairs, white_only, backend, dir / "out").rows.size(), 9u);
}

class Precompute : public ::testing::Test {
 protected:
  void SetUp() override {
    clapeval::testing::ManifestOptions options;
    options.records = 3;
    options.with_reference = 3;
    records = load_manifest(clapeval::testing::write_synthetic_manifest(dir / "data", options));
    config.kind = BackendKind::kService;
    config.endpoint = service.url();
  }
  TempDir dir;
  std::vector<EvalRecord> records;
  clapeval::testing::FakeEmbeddingService service{32};
  BackendConfig config;
};

TEST_F(Precompute, FillsCacheAndIsIdempotent) {
  ServiceBackend backend(config);
  auto first = precompute_embeddings(records, backend, dir / "cache", 4);
  EXPECT_TRUE(first.failures.empty()) << (first.failures.empty() ? "" : first.failures.front());
  EXPECT_EQ(first.written, 3u * 3u + 3u);
  EXPECT_EQ(first.already_cached, 0u);

  auto second = precompute_embeddings(records, backend, dir / "cache", 4);
  EXPECT_EQ(second.written, 0u);
  EXPECT_EQ(second.already_cached, 12u);

  CacheBackend cache(dir / "cache");
  auto metrics = all_metrics();
  auto report = score_records(records, cache, metrics, 2);
  EXPECT_EQ(report.failed_count(), 0u);
  EXPECT_EQ(report.model_ids, std::set<std::string>{service.model_id()});
}

TEST_F(Precompute, DuplicateContentSharesOneEntry) {
  records.push_back(record("dup", records[0].mixture_path, records[0].mixture_path, std::nullopt, "DOG barking"));
  ServiceBackend backend(config);
  auto result = precompute_embeddings(records, backend, dir / "cache", 1);
  EXPECT_EQ(result.written, 12u);
}

TEST_F(Precompute, ServiceDownListsFailures) {
  service.fail_status = 503;
  ServiceBackend backend(config);
  auto result = precompute_embeddings(records, backend, dir / "cache", 3);
  EXPECT_EQ(result.written, 0u);
  EXPECT_EQ(result.failures.size(), 12u);
  EXPECT_NE(result.failures.front().find("503"), std::string::npos);
}
