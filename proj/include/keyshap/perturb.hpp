#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "keyshap/matrix.hpp"
#include "keyshap/oracle.hpp"

namespace keyshap {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Centered at `center` with `width` x `height` pixels before clipping;
// `rect` is the clipped region. Fill is always uniform noise.
struct MaskSpec {
  Point center;
  int width = 0;
  int height = 0;
  Rect rect;
  std::uint64_t fill_seed = 0;
};

struct MaskOptions {
  double area_min = 0.5;    // area factor range, times (base_scale * min(W, H))^2
  double area_max = 1.5;
  double aspect_min = 0.5;  // log-uniform w/h range
  double aspect_max = 2.0;
};

// Rectangle of w x h pixels centered on (x, y), clipped to [0, W) x [0, H).
Rect centered_rect(Point center, int w, int h, int image_w, int image_h);

std::vector<MaskSpec> gen_masks(Point keypoint, int m, double base_scale, int image_w,
                                int image_h, std::uint64_t seed, const MaskOptions& options = {});

std::string masks_to_json(const std::vector<MaskSpec>& masks, const MaskOptions& options);

// baseline[i]: performance with nothing perturbed. drops(i, j): clamped drop
// of keypoint i when keypoint j is perturbed. Fractions in memory.
struct DeltaMatrix {
  std::vector<std::string> names;
  std::vector<double> baseline;
  SquareMatrix drops;

  std::size_t size() const noexcept { return baseline.size(); }
};

struct DeltaOptions {
  int trials = 8;
  std::uint64_t seed = 0;  // trial t queries the oracle with trial id seed + t
  unsigned jobs = 1;
  InstanceSet instances = InstanceSet::all();
};

// Trial index passed to the oracle for the t-th repetition.
std::uint64_t delta_trial_id(std::uint64_t seed, int t) noexcept;

// baseline = mean over trials of eval(N); drops(i,j) = max(0, baseline[i] - mean_t eval(N \ {j})[i]).
DeltaMatrix delta_perf_matrix(const CoalitionValueOracle& oracle, const DeltaOptions& options);

// Table-2 style CSV, percent units: "keypoint,baseline,<names...>".
std::string write_delta_csv(const DeltaMatrix& delta);
DeltaMatrix parse_delta_csv(std::string_view csv);
DeltaMatrix load_delta_csv(const std::filesystem::path& path);

// Reorders rows and columns into schema order and renames them canonically.
// Every schema keypoint must appear (aliases allowed).
DeltaMatrix align_to_schema(const DeltaMatrix& delta, const KeypointSchema& schema);

// Rows whose largest drop is not caused by perturbing the keypoint itself.
std::vector<std::size_t> diagonal_dominance_violations(const DeltaMatrix& delta);
// Same question per column: perturbing j hurts j more than any other keypoint.
std::vector<std::size_t> column_dominance_violations(const DeltaMatrix& delta);
// Checks baseline[i] in [0,1] and 0 <= drops(i,j) <= baseline[i]; throws kMalformedInput.
void check_delta_ranges(const DeltaMatrix& delta);

// PI(i,j) = 1/2 (d_ij / sum_a d_ia + d_ji / sum_a d_ja); throws kDegenerateRow.
SquareMatrix perturbation_influence(const DeltaMatrix& delta);
SquareMatrix perturbation_influence(const SquareMatrix& drops);

}  // namespace keyshap
