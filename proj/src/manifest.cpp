#include <fstream>
#include <unordered_map>

#include "clapeval/harness.hpp"

namespace clapeval {
namespace {

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& raw) {
  std::filesystem::path p(raw);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

const nlohmann::json& require(const nlohmann::json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    throw ManifestError(line, "line " + std::to_string(line) + ": missing required field '" + field + "'");
  }
  if (!it->is_string()) {
    throw ManifestError(line, "line " + std::to_string(line) + ": field '" + field + "' must be a string");
  }
  return *it;
}

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ManifestError(line, "line " + std::to_string(line) + ": field '" + field + "' must be a string");
  }
  return it->get<std::string>();
}

TextQuery make_query(const nlohmann::json& obj, std::size_t line) {
  try {
    return TextQuery(require(obj, "query", line).get<std::string>());
  } catch (const EmbeddingError&) {
    throw ManifestError(line, "line " + std::to_string(line) + ": field 'query' is empty");
  }
}

/// Calls `fn(object, line)` for each non-blank line and enforces unique ids.
template <typename Fn>
void for_each_object(std::istream& in, Fn&& fn) {
  std::unordered_map<std::string, std::size_t> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(line, "line " + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw ManifestError(line, "line " + std::to_string(line) + ": expected a JSON object");
    std::string id = require(obj, "id", line).get<std::string>();
    if (id.empty()) throw ManifestError(line, "line " + std::to_string(line) + ": field 'id' is empty");
    auto [it, inserted] = seen.emplace(id, line);
    if (!inserted) {
      throw ManifestError(line, "line " + std::to_string(line) + ": duplicate id '" + id + "' (first on line " +
                                    std::to_string(it->second) + ")");
    }
    fn(obj, std::move(id), line);
  }
}

std::ifstream open_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError(0, path.string() + ": cannot open manifest");
  return in;
}

}  // namespace

std::vector<EvalRecord> parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  std::vector<EvalRecord> records;
  for_each_object(in, [&](const nlohmann::json& obj, std::string id, std::size_t line) {
    auto mixture = resolve(base_dir, require(obj, "mixture_path", line).get<std::string>());
    auto separated = resolve(base_dir, require(obj, "separated_path", line).get<std::string>());
    std::optional<std::filesystem::path> reference;
    if (auto ref = optional_string(obj, "reference_path", line)) reference = resolve(base_dir, *ref);
    records.push_back(EvalRecord{std::move(id), std::move(mixture), std::move(separated), std::move(reference),
                                 make_query(obj, line)});
  });
  return records;
}

std::vector<EvalRecord> load_manifest(const std::filesystem::path& path) {
  auto in = open_manifest(path);
  return parse_manifest(in, path.parent_path());
}

std::vector<SweepPair> parse_pairs(std::istream& in, const std::filesystem::path& base_dir) {
  std::vector<SweepPair> pairs;
  for_each_object(in, [&](const nlohmann::json& obj, std::string id, std::size_t line) {
    auto source = resolve(base_dir, require(obj, "source_path", line).get<std::string>());
    std::optional<std::filesystem::path> companion;
    if (auto c = optional_string(obj, "companion_path", line)) companion = resolve(base_dir, *c);
    pairs.push_back(SweepPair{std::move(id), std::move(source), std::move(companion), make_query(obj, line)});
  });
  return pairs;
}

std::vector<SweepPair> load_pairs(const std::filesystem::path& path) {
  auto in = open_manifest(path);
  return parse_pairs(in, path.parent_path());
}

}  // namespace clapeval
