#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "keyshap/matrix.hpp"

namespace keyshap {

// Resolves the alternative spellings used in published pose tables
// ("l-foot" for "l-ankle", "l-shd" for "l-shoulder"). Unknown names pass through.
std::string_view canonical_keypoint_name(std::string_view name);

class KeypointSchema {
 public:
  KeypointSchema() = default;
  explicit KeypointSchema(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  // Exact match first, then the canonical alias.
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require_index(std::string_view name) const;

  friend bool operator==(const KeypointSchema&, const KeypointSchema&) = default;

 private:
  std::vector<std::string> names_;
};

using Edge = std::pair<std::size_t, std::size_t>;  // first < second

class Skeleton {
 public:
  Skeleton(KeypointSchema schema, const std::vector<std::pair<std::string, std::string>>& edges);

  const KeypointSchema& schema() const noexcept { return schema_; }
  std::size_t size() const noexcept { return schema_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  bool connected(std::size_t i, std::size_t j) const noexcept { return adjacency_(i, j) != 0.0; }
  std::size_t degree(std::size_t i) const noexcept { return degree_[i]; }
  const SquareMatrix& adjacency() const noexcept { return adjacency_; }

  // Stable 16-hex-digit digest of names and edges, recorded in run manifests.
  std::string hash() const;

  std::string to_json() const;

 private:
  KeypointSchema schema_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> degree_;
  SquareMatrix adjacency_;
};

// JSON document {"names": [...], "edges": [[a, b], ...]}.
Skeleton load_schema(std::string_view json_text);
Skeleton load_schema_file(const std::filesystem::path& path);

// The 17-keypoint COCO schema with its 19 standard limb edges.
const Skeleton& default_skeleton();

// KC(i,j) = 1/2 (conn(i,j)/deg(i) + conn(j,i)/deg(j)), zero diagonal.
// Throws Error(kZeroDegree) for an isolated keypoint.
SquareMatrix keypoint_connectivity(const Skeleton& skeleton);

}  // namespace keyshap
