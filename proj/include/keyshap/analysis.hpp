#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "keyshap/grouping.hpp"
#include "keyshap/matrix.hpp"

namespace keyshap {

// One row per instance, one column per keypoint; nullopt marks an unlabeled keypoint.
struct ConfidenceTable {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> rows;

  void validate() const;
};

// CSV with a header of keypoint names; an empty cell is a missing value.
ConfidenceTable parse_confidence_csv(std::string_view text);
std::string write_confidence_csv(const ConfidenceTable& table);

struct CorrelationResult {
  SquareMatrix r;
  // Pairs where one column had zero variance over the shared rows; their
  // entry is the sentinel 0.
  std::vector<std::pair<std::size_t, std::size_t>> zero_variance_pairs;

  bool warning() const noexcept { return !zero_variance_pairs.empty(); }
};

// Pairwise-complete Pearson correlation. Diagonal is 1.
CorrelationResult confidence_correlation(const ConfidenceTable& table);

double pearson(std::span<const double> a, std::span<const double> b);

// Each group shares a latent factor; a keypoint's confidence is
// sigmoid(loading * z_group + noise * e). `missing_rate` blanks cells at random.
ConfidenceTable synthetic_confidence_table(const Grouping& grouping,
                                           const std::vector<std::string>& names, std::size_t rows,
                                           std::uint64_t seed, double loading = 2.0,
                                           double noise = 1.0, double missing_rate = 0.0);

struct HeatmapOptions {
  std::optional<double> vmin;  // default: min(0, smallest entry)
  std::optional<double> vmax;  // default: largest entry
  std::string title;
  int decimals = 2;
  int cell = 40;
};

// SVG 1.1 heatmap, white at vmin to dark red at vmax, with the ramp declared
// in a <desc> element and as data-* attributes on the root.
std::string render_heatmap(const SquareMatrix& matrix, const std::vector<std::string>& labels,
                           const HeatmapOptions& options = {});

}  // namespace keyshap
