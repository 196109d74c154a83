// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "clapeval/clap_metrics.hpp"
#include "clapeval/harness.hpp"
#include "clapeval/mixer.hpp"
#include "clapeval/sdr_metrics.hpp"
#include "clapeval/stats.hpp"
#include "fixtures.hpp"
#include "oracles/beta_quadrature.hpp"
#include "oracles/naive_metrics.hpp"
#include "test_util.hpp"

using namespace clapeval;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Outcome metric_oracle_equivalence() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> length(1, 4096);
  std::uniform_real_distribution<double> level(0.0, 2.0);
  double worst = 0.0;
  const auto start = Clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = length(rng);
    auto s = clapeval::testing::random_vector(rng, n);
    auto est = s;
    auto mix = s;
    const double noise_level = level(rng);
    const double mix_level = level(rng) + 0.5;
    auto e1 = clapeval::testing::random_vector(rng, n, noise_level);
    auto e2 = clapeval::testing::random_vector(rng, n, mix_level);
    const double scale = 0.2 + level(rng);
    for (std::size_t i = 0; i < n; ++i) {
      est[i] = scale * s[i] + e1[i];
      mix[i] += e2[i];
    }
    worst = std::max(worst, std::abs(sdr(s, est) - oracle::naive_sdr(s, est)));
    worst = std::max(worst, std::abs(sdri(s, est, mix) - oracle::naive_sdri(s, est, mix)));
    worst = std::max(worst, std::abs(si_sdr(s, est).value_db - oracle::naive_si_sdr(s, est)));
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-9 && elapsed < 10.0,
          "1000 triples, max |diff| " + fmt(worst) + " dB (tol 1e-9), " + fmt(elapsed) + " s (limit 10)"};
}

Outcome mixer_exactness() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> length(4096, 48000);
  std::uniform_real_distribution<double> amp(0.05, 0.9);
  const SdrLevelGrid grid;
  double worst = 0.0;
  std::size_t cases = 0;
  const auto start = Clock::now();
  for (int pair = 0; pair < 50; ++pair) {
    const std::size_t n = length(rng);
    auto source = clapeval::testing::random_clip(rng, n, amp(rng));
    auto noise = pair % 2 == 0 ? white_noise(n + 100, 16000, static_cast<std::uint64_t>(pair))
                               : clapeval::testing::random_clip(rng, n, amp(rng));
    const auto s = as_double(source);
    for (double level : grid.levels()) {
      auto [mixture, plan] = mix_at_sdr(source, noise, level);
      worst = std::max(worst, std::abs(sdr(s, as_double(mixture)) - level));
      ++cases;
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-6 && elapsed < 5.0 && cases == 450,
          std::to_string(cases) + " mixtures, max |measured - target| " + fmt(worst) + " dB (tol 1e-6), " +
              fmt(elapsed) + " s (limit 5)"};
}

Outcome si_sdr_scale_invariance() {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<std::size_t> length(64, 4096);
  std::uniform_real_distribution<double> level(0.05, 1.5);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = length(rng);
    auto s = clapeval::testing::random_vector(rng, n);
    auto e = clapeval::testing::random_vector(rng, n, level(rng));
    std::vector<double> est(n);
    for (std::size_t i = 0; i < n; ++i) est[i] = s[i] + e[i];
    const double base = si_sdr(s, est).value_db;
    for (double beta : {1e-3, 0.5, 2.0, 1e3, -1.0}) {
      std::vector<double> scaled(n);
      for (std::size_t i = 0; i < n; ++i) scaled[i] = beta * est[i];
      worst = std::max(worst, std::abs(si_sdr(s, scaled).value_db - base));
    }
  }
  return {worst < 1e-9, "200 pairs x 5 scales, max drift " + fmt(worst) + " dB (tol 1e-9)"};
}

Outcome clap_identities() {
  std::mt19937_64 rng(31337);
  bool ok = true;
  std::size_t self_cases = 0;
  for (int i = 0; i < 1000; ++i) {
    Embedding x{clapeval::testing::random_vector(rng, 64), Modality::kAudio, "m"};
    Embedding t{clapeval::testing::random_vector(rng, 64), Modality::kText, "m"};
    ok = ok && clapscore_i(x, x, t) == 0.0;
    ++self_cases;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_self = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double a = i == 0 ? 1.0 : 1.0 - unit(rng);  // (0, 1]
    worst_self = std::max(worst_self, std::abs(ref_clapscore(a, a).value - a) / a);
  }
  std::size_t bound_violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double a = 1.0 - unit(rng);
    const double b = 1.0 - unit(rng);
    const auto h = ref_clapscore(a, b);
    if (h.nonpositive_input || h.value < std::min(a, b) * (1 - 1e-15) || h.value > std::max(a, b) * (1 + 1e-15)) {
      ++bound_violations;
    }
  }
  ok = ok && worst_self <= 1e-15 && bound_violations == 0;
  return {ok, std::to_string(self_cases) + " clapscore_i(x,x,t) exactly 0; ref_clapscore(a,a) max rel err " +
                  fmt(worst_self) + "; " + std::to_string(bound_violations) +
                  " min/max bound violations in 10000 pairs"};
}

Outcome statistics() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coef(-50.0, 50.0);
  double worst_affine = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    auto x = clapeval::testing::random_vector(rng, 3 + static_cast<std::size_t>(trial));
    double a = coef(rng);
    if (std::abs(a) < 1e-3) a = 2.0;
    const double b = coef(rng);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
    worst_affine = std::max(worst_affine, std::abs(pearson(x, y) - (a > 0 ? 1.0 : -1.0)));
  }
  const double p = pearson_p_value(0.270, 3000);
  double worst_beta = 0.0;
  for (double a : {0.5, 1.0, 10.0, 1499.0}) {
    for (double x : {0.01, 0.5, 0.99}) {
      worst_beta = std::max(worst_beta,
                            std::abs(incomplete_beta(a, 0.5, x) - oracles::quadrature_incomplete_beta(a, 0.5, x)));
    }
  }
  const bool ok = worst_affine <= 1e-12 && p < 0.05 && p < 1e-10 && worst_beta <= 1e-8;
  return {ok, "affine |r|-1 max " + fmt(worst_affine) + " (tol 1e-12); p(r=0.270, n=3000) = " + fmt(p) +
                  " (< 0.05 and < 1e-10); incomplete beta vs quadrature max " + fmt(worst_beta) + " (tol 1e-8)"};
}

Outcome end_to_end_golden() {
  clapeval::testing::TempDir dir;
  auto records = load_manifest(clapeval::testing::write_synthetic_manifest(dir.path()));
  const auto metrics = all_metrics();
  std::vector<std::string> reports;
  for (std::size_t workers : {1u, 1u, 4u, 8u}) {
    MockBackend backend;
    reports.push_back(serialize_report(score_records(records, backend, metrics, workers)));
  }
  // A second, independently generated copy of the dataset must give the same bytes.
  clapeval::testing::TempDir other;
  auto regenerated = load_manifest(clapeval::testing::write_synthetic_manifest(other.path()));
  MockBackend backend;
  std::string again = serialize_report(score_records(regenerated, backend, metrics, 4));

  bool same = true;
  for (const auto& r : reports) same = same && r == reports.front();
  same = same && again == reports.front();
  auto doc = nlohmann::json::parse(reports.front());
  const bool sane = doc["record_count"] == 6 && doc["failed_count"] == 0;
  return {same && sane, "6 records, reports for runs x2 and workers 1/4/8 plus regenerated data " +
                            std::string(same ? "byte-identical" : "DIFFER") + " (" +
                            std::to_string(reports.front().size()) + " bytes)"};
}

Outcome reference_free_path() {
  clapeval::testing::TempDir dir;
  clapeval::testing::ManifestOptions options;
  options.with_reference = 0;
  auto records = load_manifest(clapeval::testing::write_synthetic_manifest(dir.path(), options));
  MockBackend backend;
  const auto metrics = all_metrics();
  auto report = score_records(records, backend, metrics, 4);
  std::size_t complete = 0;
  for (const auto& r : report.per_record) {
    const bool clap_ok = !r.failed && r.metrics.at(Metric::kClapscore).usable() &&
                         r.metrics.at(Metric::kClapscoreI).usable() &&
                         r.metrics.at(Metric::kRefClapscore).skip_reason == kSkipNoReference &&
                         r.metrics.at(Metric::kSdr).skip_reason == kSkipNoReference;
    if (clap_ok) ++complete;
  }
  const bool ok = report.failed_count() == 0 && complete == records.size();
  return {ok, std::to_string(complete) + "/" + std::to_string(records.size()) +
                  " records with clapscore and clapscore_i, " + std::to_string(report.failed_count()) + " errors"};
}

Outcome sweep_cardinality() {
  clapeval::testing::TempDir dir;
  auto pairs = load_pairs(clapeval::testing::write_synthetic_pairs(dir / "in"));
  SweepOptions options;
  options.seed = 1234;
  MockBackend backend;
  auto first = run_sweep(pairs, options, backend, dir / "run1");
  MockBackend fresh;
  run_sweep(pairs, options, fresh, dir / "run2");
  const std::string a = clapeval::testing::read_text(dir / "run1" / "sweep.csv");
  const std::string b = clapeval::testing::read_text(dir / "run2" / "sweep.csv");
  const auto data_rows = static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n')) - 1;
  const bool ok = first.rows.size() == 54 && data_rows == 54 && a == b;
  return {ok, "2 pairs x 3 strategies x 9 levels -> " + std::to_string(data_rows) + " CSV rows, reruns " +
                  (a == b ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", metric_oracle_equivalence},
      {"mixer exactness", mixer_exactness},
      {"si-sdr scale invariance", si_sdr_scale_invariance},
      {"clapscore family identities", clap_identities},
      {"statistics", statistics},
      {"end-to-end golden report", end_to_end_golden},
      {"reference-free path", reference_free_path},
      {"sweep cardinality and determinism", sweep_cardinality},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
