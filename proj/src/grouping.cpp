#include "keyshap/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "keyshap/error.hpp"

namespace keyshap {

SquareMatrix interdependency(const SquareMatrix& pi, const SquareMatrix& kc) {
  if (pi.size() != kc.size())
    throw Error(ErrorKind::kDimensionMismatch, "PI is " + std::to_string(pi.size()) +
                                                   "x, KC is " + std::to_string(kc.size()) + "x");
  const std::size_t n = pi.size();
  for (const auto* m : {&pi, &kc}) {
    if (!m->is_symmetric(1e-12))
      throw Error(ErrorKind::kConfig, "interdependency inputs must be symmetric");
    for (double v : m->data())
      if (!(v >= 0.0) || !std::isfinite(v))
        throw Error(ErrorKind::kConfig, "interdependency inputs must be finite and non-negative");
  }
  SquareMatrix s(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = pi(i, j) + kc(i, j);
  return s;
}

Grouping::Grouping(std::vector<std::vector<std::size_t>> groups, std::size_t n)
    : groups_(std::move(groups)), group_of_(n, std::numeric_limits<std::size_t>::max()) {
  for (auto& g : groups_) {
    if (g.empty()) throw Error(ErrorKind::kConfig, "empty group");
    std::sort(g.begin(), g.end());
  }
  std::sort(groups_.begin(), groups_.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (std::size_t h = 0; h < groups_.size(); ++h) {
    for (std::size_t k : groups_[h]) {
      if (k >= n)
        throw Error(ErrorKind::kSchemaMismatch, "group member " + std::to_string(k) +
                                                    " outside schema of " + std::to_string(n));
      if (group_of_[k] != std::numeric_limits<std::size_t>::max())
        throw Error(ErrorKind::kConfig, "keypoint " + std::to_string(k) + " in two groups");
      group_of_[k] = h;
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    if (group_of_[k] == std::numeric_limits<std::size_t>::max())
      throw Error(ErrorKind::kConfig, "keypoint " + std::to_string(k) + " is in no group");
}

bool Grouping::is_refined_by(const Grouping& finer) const {
  if (finer.keypoints() != keypoints()) return false;
  for (const auto& g : finer.groups())
    for (std::size_t k : g)
      if (group_of(k) != group_of(g.front())) return false;
  return true;
}

Grouping grouping_from_sizes(const std::vector<std::size_t>& sizes) {
  std::vector<std::vector<std::size_t>> groups;
  std::size_t next = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw Error(ErrorKind::kConfig, "group sizes must be positive");
    auto& g = groups.emplace_back();
    for (std::size_t k = 0; k < s; ++k) g.push_back(next++);
  }
  return Grouping(std::move(groups), next);
}

Linkage parse_linkage(std::string_view name) {
  if (name == "single") return Linkage::kSingle;
  if (name == "average") return Linkage::kAverage;
  throw Error(ErrorKind::kConfig, "unknown linkage '" + std::string(name) + "'");
}

std::string_view linkage_name(Linkage linkage) {
  return linkage == Linkage::kSingle ? "single" : "average";
}

Grouping cluster(const SquareMatrix& similarity, std::size_t g, Linkage linkage) {
  const std::size_t n = similarity.size();
  if (g < 1 || g > n)
    throw Error(ErrorKind::kOutOfRange,
                "group count " + std::to_string(g) + " outside 1.." + std::to_string(n));
  for (double v : similarity.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::kNonFinite, "similarity matrix has non-finite entries");

  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};

  auto link = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    if (linkage == Linkage::kSingle) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i : a)
        for (std::size_t j : b) best = std::max(best, similarity(i, j));
      return best;
    }
    double sum = 0.0;
    for (std::size_t i : a)
      for (std::size_t j : b) sum += similarity(i, j);
    return sum / static_cast<double>(a.size() * b.size());
  };

  // Clusters stay ordered by smallest member, so scanning (a, b) in index
  // order and keeping the first maximum realizes the tie-break rule.
  while (clusters.size() > g) {
    std::size_t best_a = 0, best_b = 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < clusters.size(); ++a)
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        const double v = link(clusters[a], clusters[b]);
        if (v > best) {
          best = v;
          best_a = a;
          best_b = b;
        }
      }
    auto& merged = clusters[best_a];
    merged.insert(merged.end(), clusters[best_b].begin(), clusters[best_b].end());
    std::sort(merged.begin(), merged.end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
  }
  return Grouping(std::move(clusters), n);
}

std::string grouping_to_json(const Grouping& grouping, const KeypointSchema& schema) {
  if (grouping.keypoints() != schema.size())
    throw Error(ErrorKind::kSchemaMismatch, "grouping covers " + std::to_string(grouping.keypoints()) +
                                                " keypoints, schema has " + std::to_string(schema.size()));
  nlohmann::ordered_json doc;
  doc["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : grouping.groups()) {
    auto names = nlohmann::ordered_json::array();
    for (std::size_t k : g) names.push_back(schema.name(k));
    doc["groups"].push_back(std::move(names));
  }
  doc["g"] = grouping.size();
  return doc.dump(2) + "\n";
}

Grouping grouping_from_json(std::string_view text, const KeypointSchema& schema) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kMalformedInput, std::string("grouping is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("groups") || !doc["groups"].is_array())
    throw Error(ErrorKind::kMalformedInput, "grouping JSON needs a 'groups' array");
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& g : doc["groups"]) {
    if (!g.is_array()) throw Error(ErrorKind::kMalformedInput, "each group must be an array of names");
    auto& out = groups.emplace_back();
    for (const auto& name : g) {
      if (!name.is_string()) throw Error(ErrorKind::kMalformedInput, "group members must be names");
      out.push_back(schema.require_index(name.get<std::string>()));
    }
  }
  Grouping grouping(std::move(groups), schema.size());
  if (doc.contains("g") && (!doc["g"].is_number_integer() || doc["g"].get<std::size_t>() != grouping.size()))
    throw Error(ErrorKind::kMalformedInput, "'g' does not match the number of groups");
  return grouping;
}

}  // namespace keyshap
