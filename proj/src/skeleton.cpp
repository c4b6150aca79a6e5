#include "keyshap/skeleton.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "keyshap/error.hpp"
#include "keyshap/io.hpp"
#include "keyshap/rng.hpp"

namespace keyshap {
namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 4> kAliases{{
    {"l-foot", "l-ankle"},
    {"r-foot", "r-ankle"},
    {"l-shd", "l-shoulder"},
    {"r-shd", "r-shoulder"},
}};

constexpr std::string_view kCocoDocument = R"({
  "names": [
    "nose", "l-eye", "r-eye", "l-ear", "r-ear",
    "l-shoulder", "r-shoulder", "l-elbow", "r-elbow", "l-wrist", "r-wrist",
    "l-hip", "r-hip", "l-knee", "r-knee", "l-ankle", "r-ankle"
  ],
  "edges": [
    ["l-ankle", "l-knee"], ["l-knee", "l-hip"], ["r-ankle", "r-knee"], ["r-knee", "r-hip"],
    ["l-hip", "r-hip"], ["l-shoulder", "l-hip"], ["r-shoulder", "r-hip"],
    ["l-shoulder", "r-shoulder"], ["l-shoulder", "l-elbow"], ["r-shoulder", "r-elbow"],
    ["l-elbow", "l-wrist"], ["r-elbow", "r-wrist"],
    ["l-eye", "r-eye"], ["nose", "l-eye"], ["nose", "r-eye"],
    ["l-eye", "l-ear"], ["r-eye", "r-ear"], ["l-ear", "l-shoulder"], ["r-ear", "r-shoulder"]
  ]
})";

}  // namespace

std::string_view canonical_keypoint_name(std::string_view name) {
  for (const auto& [alias, canonical] : kAliases)
    if (alias == name) return canonical;
  return name;
}

KeypointSchema::KeypointSchema(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2)
    throw Error(ErrorKind::kSchemaValidation, "schema needs at least 2 keypoints");
  std::set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw Error(ErrorKind::kSchemaValidation, "empty keypoint name");
    if (!seen.insert(n).second)
      throw Error(ErrorKind::kSchemaValidation, "duplicate keypoint name '" + n + "'");
  }
}

std::optional<std::size_t> KeypointSchema::index_of(std::string_view name) const {
  auto find = [&](std::string_view key) -> std::optional<std::size_t> {
    const auto it = std::find(names_.begin(), names_.end(), key);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  };
  if (auto i = find(name)) return i;
  const auto canonical = canonical_keypoint_name(name);
  if (canonical != name) return find(canonical);
  return std::nullopt;
}

std::size_t KeypointSchema::require_index(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw Error(ErrorKind::kSchemaValidation, "unknown keypoint '" + std::string(name) + "'");
}

Skeleton::Skeleton(KeypointSchema schema,
                   const std::vector<std::pair<std::string, std::string>>& edges)
    : schema_(std::move(schema)),
      degree_(schema_.size(), 0),
      adjacency_(schema_.size()) {
  for (const auto& [a, b] : edges) {
    const auto ia = schema_.index_of(a);
    const auto ib = schema_.index_of(b);
    if (!ia) throw Error(ErrorKind::kSchemaValidation, "edge references unknown keypoint '" + a + "'");
    if (!ib) throw Error(ErrorKind::kSchemaValidation, "edge references unknown keypoint '" + b + "'");
    if (*ia == *ib)
      throw Error(ErrorKind::kSchemaValidation, "self-loop on '" + schema_.name(*ia) + "'");
    if (adjacency_(*ia, *ib) != 0.0)
      throw Error(ErrorKind::kSchemaValidation,
                  "duplicate edge (" + schema_.name(*ia) + ", " + schema_.name(*ib) + ")");
    adjacency_(*ia, *ib) = adjacency_(*ib, *ia) = 1.0;
    ++degree_[*ia];
    ++degree_[*ib];
    edges_.emplace_back(std::min(*ia, *ib), std::max(*ia, *ib));
  }
}

std::string Skeleton::hash() const {
  std::string canonical;
  for (const auto& n : schema_.names()) canonical += n + "\n";
  for (const auto& [a, b] : edges_) canonical += std::to_string(a) + "-" + std::to_string(b) + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

std::string Skeleton::to_json() const {
  nlohmann::ordered_json doc;
  doc["names"] = schema_.names();
  doc["edges"] = nlohmann::ordered_json::array();
  for (const auto& [a, b] : edges_) doc["edges"].push_back({schema_.name(a), schema_.name(b)});
  return doc.dump(2) + "\n";
}

Skeleton load_schema(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchemaValidation, std::string("schema is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("names") || !doc["names"].is_array())
    throw Error(ErrorKind::kSchemaValidation, "schema needs a 'names' array");
  std::vector<std::string> names;
  for (const auto& n : doc["names"]) {
    if (!n.is_string()) throw Error(ErrorKind::kSchemaValidation, "keypoint names must be strings");
    names.push_back(n.get<std::string>());
  }
  std::vector<std::pair<std::string, std::string>> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw Error(ErrorKind::kSchemaValidation, "'edges' must be an array");
    for (const auto& e : doc["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
        throw Error(ErrorKind::kSchemaValidation, "edge entries must be [name, name] pairs: " + e.dump());
      edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  }
  return Skeleton(KeypointSchema(std::move(names)), edges);
}

Skeleton load_schema_file(const std::filesystem::path& path) {
  return load_schema(read_text_file(path));
}

const Skeleton& default_skeleton() {
  static const Skeleton skeleton = load_schema(kCocoDocument);
  return skeleton;
}

SquareMatrix keypoint_connectivity(const Skeleton& skeleton) {
  for (std::size_t i = 0; i < skeleton.size(); ++i)
    if (skeleton.degree(i) == 0)
      throw Error(ErrorKind::kZeroDegree,
                  "keypoint '" + skeleton.schema().name(i) + "' has no skeleton edges");
  std::size_t bad = 0;
  return symmetric_row_normalized(skeleton.adjacency(), &bad);
}

}  // namespace keyshap
