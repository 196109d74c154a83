#include <array>
#include <charconv>
#include <cmath>

#include "clapeval/harness.hpp"

namespace clapeval {
namespace {

nlohmann::ordered_json backend_json(const BackendConfig& config, const std::set<std::string>& model_ids) {
  nlohmann::ordered_json out;
  out["kind"] = std::string(to_string(config.kind));
  switch (config.kind) {
    case BackendKind::kMock:
      out["mock_dim"] = config.mock_dim;
      break;
    case BackendKind::kCache:
      out["cache_dir"] = config.cache_dir.string();
      break;
    case BackendKind::kService:
      out["endpoint"] = config.endpoint;
      out["timeout_seconds"] = config.timeout_seconds;
      out["max_in_flight"] = config.max_in_flight;
      break;
  }
  out["model_ids"] = std::vector<std::string>(model_ids.begin(), model_ids.end());
  return out;
}

nlohmann::ordered_json outcome_json(const MetricOutcome& outcome) {
  nlohmann::ordered_json out;
  if (outcome.value) {
    out["value"] = *outcome.value;
    if (!outcome.flags.empty()) {
      auto& flags = out["flags"] = nlohmann::ordered_json::array();
      for (ScoreFlag f : outcome.flags) flags.push_back(std::string(to_string(f)));
    }
  } else {
    out["skipped"] = outcome.skip_reason;
  }
  return out;
}

/// Usable numeric value of `metric` in a serialized record, if any.
std::optional<double> usable_value(const nlohmann::json& record, std::string_view metric) {
  auto metrics = record.find("metrics");
  if (metrics == record.end() || !metrics->is_object()) return std::nullopt;
  auto entry = metrics->find(std::string(metric));
  if (entry == metrics->end() || !entry->is_object()) return std::nullopt;
  auto v = entry->find("value");
  if (v == entry->end() || !v->is_number()) return std::nullopt;
  if (auto flags = entry->find("flags"); flags != entry->end() && !flags->empty()) return std::nullopt;
  return v->get<double>();
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

nlohmann::ordered_json report_to_json(const MetricReport& report) {
  nlohmann::ordered_json doc;
  doc["tool_version"] = report.tool_version;
  doc["backend"] = backend_json(report.backend, report.model_ids);
  auto& requested = doc["metrics_requested"] = nlohmann::ordered_json::array();
  for (Metric m : report.metrics_requested) requested.push_back(std::string(to_string(m)));
  doc["record_count"] = report.per_record.size();
  doc["failed_count"] = report.failed_count();

  auto& records = doc["per_record"] = nlohmann::ordered_json::array();
  for (const auto& r : report.per_record) {
    nlohmann::ordered_json rec;
    rec["id"] = r.id;
    rec["status"] = r.failed ? "failed" : "ok";
    if (r.failed) rec["error"] = r.error;
    auto& metrics = rec["metrics"] = nlohmann::ordered_json::object();
    for (Metric m : report.metrics_requested) {
      auto it = r.metrics.find(m);
      metrics[std::string(to_string(m))] =
          it != r.metrics.end() ? outcome_json(it->second) : nlohmann::ordered_json{{"skipped", "not_computed"}};
    }
    if (r.clapscore_before || r.clapscore_ref || r.truncated_samples) {
      auto& details = rec["details"] = nlohmann::ordered_json::object();
      if (r.clapscore_before) details["clapscore_before"] = *r.clapscore_before;
      if (r.clapscore_ref) details["clapscore_ref"] = *r.clapscore_ref;
      if (r.truncated_samples) details["truncated_samples"] = *r.truncated_samples;
    }
    records.push_back(std::move(rec));
  }

  auto& aggregates = doc["aggregates"] = nlohmann::ordered_json::object();
  for (const auto& [metric, agg] : report.aggregates) {
    nlohmann::ordered_json a;
    if (agg.summary) {
      a["mean"] = agg.summary->mean;
      a["stddev"] = agg.summary->stddev;
      a["count"] = agg.summary->count;
      a["min"] = agg.summary->min;
      a["max"] = agg.summary->max;
    } else {
      a["mean"] = nullptr;
      a["count"] = 0;
    }
    a["excluded"] = agg.excluded;
    aggregates[std::string(to_string(metric))] = std::move(a);
  }
  return doc;
}

std::string serialize_report(const MetricReport& report) { return report_to_json(report).dump(2) + "\n"; }

ReportCorrelation correlate_report(const nlohmann::json& report, std::string_view x_metric,
                                   std::string_view y_metric) {
  parse_metric(x_metric);
  parse_metric(y_metric);
  auto records = report.find("per_record");
  if (records == report.end() || !records->is_array()) throw StatsError("report has no per_record array");

  std::vector<double> xs;
  std::vector<double> ys;
  ReportCorrelation out;
  for (const auto& rec : *records) {
    auto x = usable_value(rec, x_metric);
    auto y = usable_value(rec, y_metric);
    if (x && y) {
      xs.push_back(*x);
      ys.push_back(*y);
    } else {
      ++out.excluded;
    }
  }
  if (xs.size() < 3) {
    throw StatsError("only " + std::to_string(xs.size()) + " records carry both " + std::string(x_metric) +
                     " and " + std::string(y_metric) + "; need at least 3");
  }
  out.result = correlate(xs, ys);
  return out;
}

}  // namespace clapeval
