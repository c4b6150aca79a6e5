#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "keyshap/grouping.hpp"
#include "keyshap/matrix.hpp"
#include "keyshap/oracle.hpp"

namespace keyshap {

// Brute-force enumeration is refused above this many players.
inline constexpr std::size_t kMaxExactPlayers = 20;

// Characteristic function over player bitmasks (bit k = player k present).
using GameValue = std::function<double(std::uint64_t)>;

// Shapley weight |S|! (n - |S| - 1)! / n! for a coalition of size s.
double shapley_weight(std::size_t n, std::size_t s);

// Exact Shapley values by full enumeration. `value` is called exactly once
// per coalition (2^n calls, ascending mask order).
std::vector<double> exact_shapley(std::size_t n, const GameValue& value);

// Same, from a precomputed table values[mask] of size 2^n.
std::vector<double> shapley_from_table(std::span<const double> values, std::size_t n);

// Monte Carlo baseline: average marginal contributions over `samples` random
// player orderings. Unbiased but not exact; offered for comparison only.
std::vector<double> permutation_shapley(std::size_t n, const GameValue& value,
                                        std::size_t samples, std::uint64_t seed);

struct ShapleyTable {
  std::size_t target = 0;             // keypoint index (intra) or group index (group level)
  std::vector<std::size_t> players;   // keypoint indices (intra) or group indices
  std::vector<double> phi;            // raw, same units as PerfVector
  double v_full = 0.0;                // value with every player present
  double v_empty = 0.0;               // value with no player present
};

enum class SplitMode {
  kUniform,       // sigma(i,j) = psi_i(G_h) / |G_h|
  kProportional,  // split psi_i(G_h) by each member's normalized intra self-value
};

SplitMode parse_split_mode(std::string_view name);
std::string_view split_mode_name(SplitMode mode);

struct GsvOptions {
  InstanceSet instances = InstanceSet::all();
  int trials = 1;          // values are averaged over trials seed, seed+1, ...
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  SplitMode split = SplitMode::kUniform;
};

// Intra-group game for every member of group h: v_i(S) = eval(S u (N \ G_h))[i]
// over players G_h, keypoints outside the group held visible. One table per
// member, in member order; 2^|G_h| coalitions queried once each per trial.
std::vector<ShapleyTable> intra_group_tables(const CoalitionValueOracle& oracle,
                                             const Grouping& grouping, std::size_t h,
                                             const GsvOptions& options = {});

ShapleyTable intra_group_shapley(const CoalitionValueOracle& oracle, const Grouping& grouping,
                                 std::size_t target, const GsvOptions& options = {});

// Group-level game, groups as players: v_h(C) = mean_{k in G_h} eval(u_{G in C} G)[k].
// One table per target group; 2^g coalitions queried once each per trial.
std::vector<ShapleyTable> group_tables(const CoalitionValueOracle& oracle, const Grouping& grouping,
                                       const GsvOptions& options = {});

ShapleyTable group_shapley(const CoalitionValueOracle& oracle, const Grouping& grouping,
                           std::size_t target_group, const GsvOptions& options = {});

// Clamp at zero and rescale to sum 1. Throws kDegenerateAttribution if nothing is positive.
std::vector<double> normalize_nonneg(std::span<const double> raw);

struct QueryBudget {
  std::uint64_t distinct_coalitions = 0;
  std::uint64_t oracle_calls = 0;
};

struct QueryCount {
  QueryBudget gsv;    // sum_k 2^|G_k| + 2^g
  QueryBudget exact;  // 2^n
};

// Counts saturate at UINT64_MAX.
QueryCount query_count(const Grouping& grouping, std::size_t n, std::uint64_t trials = 1);

struct AttributionReport {
  std::vector<std::string> names;
  Grouping grouping;
  SplitMode split = SplitMode::kUniform;
  std::vector<ShapleyTable> intra;  // one per keypoint, indexed by target
  std::vector<ShapleyTable> group;  // one per group, indexed by target group
  SquareMatrix attribution;         // row i = X(k_i); each row non-negative, sums to 1
  QueryBudget budget;
  GsvOptions options;
};

// Builds sigma rows from raw tables. Throws kIncompleteInput when a keypoint or
// group lacks its table.
SquareMatrix combined_attribution(const std::vector<ShapleyTable>& intra,
                                  const std::vector<ShapleyTable>& group,
                                  const Grouping& grouping, SplitMode split = SplitMode::kUniform);

// Full coarse-to-fine run: every intra-group table, every group table, combined rows.
AttributionReport run_gsv(const CoalitionValueOracle& oracle, const Grouping& grouping,
                          const GsvOptions& options = {});

std::string report_to_json(const AttributionReport& report);

// Percent tables in the published layout, one decimal:
//   "group.csv" (g x g normalized group rows), "intra_G<h>.csv" per group,
//   "attribution.csv" (n x n). Returned as (file name, contents) pairs.
std::vector<std::pair<std::string, std::string>> report_to_csv(const AttributionReport& report);

}  // namespace keyshap
