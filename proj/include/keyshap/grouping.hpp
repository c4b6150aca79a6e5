#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "keyshap/matrix.hpp"
#include "keyshap/skeleton.hpp"

namespace keyshap {

// s(i,j) = PI(i,j) + KC(i,j). Both inputs must be n x n, symmetric, non-negative.
SquareMatrix interdependency(const SquareMatrix& pi, const SquareMatrix& kc);

// Disjoint keypoint groups covering 0..n-1. Members ascend within a group and
// groups are ordered by their smallest member.
class Grouping {
 public:
  Grouping() = default;
  Grouping(std::vector<std::vector<std::size_t>> groups, std::size_t n);

  std::size_t size() const noexcept { return groups_.size(); }
  std::size_t keypoints() const noexcept { return group_of_.size(); }
  const std::vector<std::vector<std::size_t>>& groups() const noexcept { return groups_; }
  const std::vector<std::size_t>& group(std::size_t h) const { return groups_.at(h); }
  std::size_t group_of(std::size_t keypoint) const { return group_of_.at(keypoint); }

  // Every group of `finer` lies inside one group of *this.
  bool is_refined_by(const Grouping& finer) const;

  friend bool operator==(const Grouping& a, const Grouping& b) { return a.groups_ == b.groups_; }

 private:
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<std::size_t> group_of_;
};

// Contiguous groups of the given sizes: {0..s0-1}, {s0..s0+s1-1}, ...
Grouping grouping_from_sizes(const std::vector<std::size_t>& sizes);

enum class Linkage { kSingle, kAverage };

Linkage parse_linkage(std::string_view name);
std::string_view linkage_name(Linkage linkage);

// Agglomerative clustering on a similarity matrix: start from singletons and
// repeatedly merge the two clusters with the highest linkage similarity until
// g clusters remain. The diagonal is never used. Ties go to the pair with the
// lexicographically smallest (min member, min member).
Grouping cluster(const SquareMatrix& similarity, std::size_t g, Linkage linkage = Linkage::kSingle);

// {"groups": [[names...], ...], "g": int}
std::string grouping_to_json(const Grouping& grouping, const KeypointSchema& schema);
Grouping grouping_from_json(std::string_view text, const KeypointSchema& schema);

}  // namespace keyshap
