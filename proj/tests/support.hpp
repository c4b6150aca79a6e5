#pragma once

// Shared fixtures and hand-rolled generators for the unit and acceptance suites.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "keyshap/grouping.hpp"
#include "keyshap/oracle.hpp"
#include "keyshap/rng.hpp"
#include "keyshap/skeleton.hpp"

namespace keyshap::testing {

inline std::filesystem::path source_dir() { return KEYSHAP_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "fixtures" / name; }

inline KeypointSchema letters(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("k" + std::to_string(i));
  return KeypointSchema(names);
}

// Random characteristic function over n players, v(0) arbitrary.
inline std::vector<double> random_game(std::size_t n, CounterRng& rng) {
  std::vector<double> v(std::size_t{1} << n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Noiseless synthetic model whose recovery weights live inside the blocks of `grouping`.
inline SyntheticModelConfig block_config(const Grouping& grouping, CounterRng& rng,
                                         double cross = 0.0) {
  const std::size_t n = grouping.keypoints();
  SyntheticModelConfig cfg;
  cfg.recovery = SquareMatrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    cfg.base.push_back(rng.uniform(0.3, 1.0));
    const auto& own = grouping.group(grouping.group_of(i));
    const double budget = cross > 0.0 ? 1.0 - cross : 1.0;
    std::vector<double> raw(n, 0.0);
    double total = 0.0;
    for (std::size_t j : own)
      if (j != i) total += raw[j] = rng.uniform(0.1, 1.0);
    for (std::size_t j : own)
      if (j != i) cfg.recovery(i, j) = budget * rng.uniform(0.2, 1.0) * raw[j] / total;
    if (cross > 0.0) {
      const std::size_t others = n - own.size();
      for (std::size_t j = 0; j < n; ++j)
        if (grouping.group_of(j) != grouping.group_of(i)) cfg.recovery(i, j) = cross / others;
    }
  }
  return cfg;
}

// Skeleton that chains the members of each group and nothing else.
inline Skeleton block_skeleton(const Grouping& grouping) {
  const auto schema = letters(grouping.keypoints());
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& g : grouping.groups())
    for (std::size_t k = 1; k < g.size(); ++k) edges.emplace_back(schema.name(g[k - 1]), schema.name(g[k]));
  return Skeleton(schema, edges);
}

inline std::vector<std::size_t> random_permutation(std::size_t n, CounterRng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

}  // namespace keyshap::testing
