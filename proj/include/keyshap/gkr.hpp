#pragma once

// Group-based keypoint removal: per image, each keypoint group independently
// loses at most one keypoint region to uniform noise.
//
// NOTE on the threshold convention: a group is erased when its draw
// u ~ U(0,1) satisfies u > p. p is therefore a KEEP probability and groups
// are erased with probability 1 - p. Most erasing augmentations use the
// opposite convention.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "keyshap/grouping.hpp"
#include "keyshap/image.hpp"
#include "keyshap/perturb.hpp"
#include "keyshap/skeleton.hpp"

namespace keyshap {

struct KeypointLabel {
  double x = 0.0;
  double y = 0.0;
  int v = 0;  // COCO visibility: 0 unlabeled, 1 labeled but occluded, 2 visible
};

struct PersonAnnotation {
  std::int64_t image_id = 0;
  std::int64_t annotation_id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
  std::vector<KeypointLabel> keypoints;
};

// COCO person_keypoints subset: images[id, width, height, file_name] and
// annotations[id, image_id, keypoints (3n values), num_keypoints].
std::vector<PersonAnnotation> parse_annotations(std::string_view json_text, std::size_t n = 17);

struct GkrConfig {
  double p = 0.5;              // keep threshold, see the note above
  std::vector<double> scales;  // per group, fraction of the image side
  std::uint64_t seed = 0;

  void validate(std::size_t groups) const;
};

// 0.05 for groups made only of face keypoints (nose, eyes, ears), 0.15 otherwise.
std::vector<double> default_gkr_scales(const Grouping& grouping, const KeypointSchema& schema);

inline constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

struct EraseRegion {
  std::size_t group = kNoIndex;     // kNoIndex for planners that ignore grouping
  std::size_t keypoint = kNoIndex;
  Rect rect;
  std::uint64_t fill_seed = 0;
};

struct ErasePlan {
  std::int64_t image_id = 0;
  std::int64_t annotation_id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
  std::string planner = "gkr";
  double p = 0.0;
  std::uint64_t seed = 0;
  std::vector<EraseRegion> regions;
};

// Algorithm: for each group draw u; if u > p pick one labeled (v > 0) member
// uniformly and erase a round(W s) x round(H s) rectangle centered on it,
// clipped to the image. Deterministic in cfg.seed.
ErasePlan plan_gkr(const PersonAnnotation& person, const Grouping& grouping, const GkrConfig& cfg);

struct RandomErasingOptions {
  double area_min = 0.02;  // fraction of W * H
  double area_max = 0.4;
  double aspect_min = 0.3;
  int attempts = 10;
};

// Grouping-blind baseline: one random rectangle anywhere, erased when u > p.
ErasePlan plan_random_erasing(const PersonAnnotation& person, const GkrConfig& cfg,
                              const RandomErasingOptions& options = {});

// Seed for one person in a dataset run.
std::uint64_t person_seed(std::uint64_t seed, std::int64_t image_id, std::int64_t annotation_id);

enum class Planner { kGkr, kRandomErasing };

std::vector<ErasePlan> plan_dataset(const std::vector<PersonAnnotation>& people,
                                    const Grouping& grouping, const GkrConfig& cfg,
                                    Planner planner = Planner::kGkr, unsigned jobs = 1);

// Pixels inside each region become independent uniform bytes derived from the
// region's fill seed; all other bytes are untouched.
Image apply_plan(const Image& image, const ErasePlan& plan);

std::string plan_to_json_line(const ErasePlan& plan);
ErasePlan plan_from_json_line(std::string_view line);
std::string plans_to_jsonl(const std::vector<ErasePlan>& plans);
std::vector<ErasePlan> plans_from_jsonl(std::string_view text);

// Fraction of a person set's keypoints that are not visible (v < 2).
double occlusion_ratio(const std::vector<const PersonAnnotation*>& people);

inline constexpr double kOcclusionBuckets[] = {0.0, 0.25, 0.5, 0.75};

// Largest bucket lower bound <= ratio.
double occlusion_bucket(double ratio);

struct OcclusionStats {
  struct ImageRatio {
    std::int64_t image_id = 0;
    std::size_t persons = 0;
    double ratio = 0.0;
    double bucket = 0.0;
  };
  std::vector<ImageRatio> images;  // ascending image_id
  std::vector<std::size_t> bucket_counts = std::vector<std::size_t>(4, 0);
};

OcclusionStats occlusion_stats(const std::vector<PersonAnnotation>& people);
std::string occlusion_stats_csv(const OcclusionStats& stats, bool per_image);

}  // namespace keyshap
