#include "keyshap/gkr.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "keyshap/error.hpp"
#include "keyshap/io.hpp"
#include "keyshap/parallel.hpp"
#include "keyshap/rng.hpp"

namespace keyshap {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<PersonAnnotation> parse_annotations(std::string_view json_text, std::size_t n) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kMalformedInput, std::string("annotation file is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("images") || !doc["images"].is_array() ||
      !doc.contains("annotations") || !doc["annotations"].is_array())
    throw Error(ErrorKind::kMalformedInput, "annotation file needs 'images' and 'annotations' arrays");

  struct ImageInfo {
    int width;
    int height;
    std::string file_name;
  };
  std::map<std::int64_t, ImageInfo> images;
  try {
    for (const auto& im : doc["images"]) {
      ImageInfo info{im.at("width").get<int>(), im.at("height").get<int>(), im.value("file_name", "")};
      if (info.width < 1 || info.height < 1)
        throw Error(ErrorKind::kMalformedInput, "image dimensions must be positive");
      images[im.at("id").get<std::int64_t>()] = std::move(info);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kMalformedInput, std::string("bad image entry: ") + e.what());
  }

  std::vector<PersonAnnotation> people;
  std::int64_t ordinal = 0;
  for (const auto& ann : doc["annotations"]) {
    PersonAnnotation p;
    std::vector<double> raw;
    try {
      p.image_id = ann.at("image_id").get<std::int64_t>();
      p.annotation_id = ann.contains("id") ? ann["id"].get<std::int64_t>() : ordinal;
      raw = ann.at("keypoints").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kMalformedInput, std::string("bad annotation entry: ") + e.what());
    }
    ++ordinal;
    if (raw.size() != 3 * n)
      throw Error(ErrorKind::kBadKeypointArray, "annotation " + std::to_string(p.annotation_id) +
                                                    " has " + std::to_string(raw.size()) +
                                                    " keypoint values, expected " + std::to_string(3 * n));
    const auto it = images.find(p.image_id);
    if (it == images.end())
      throw Error(ErrorKind::kDanglingImageId, "annotation " + std::to_string(p.annotation_id) +
                                                   " references unknown image " + std::to_string(p.image_id));
    p.width = it->second.width;
    p.height = it->second.height;
    p.file_name = it->second.file_name;
    for (std::size_t k = 0; k < n; ++k) {
      KeypointLabel kp{raw[3 * k], raw[3 * k + 1], static_cast<int>(raw[3 * k + 2])};
      if (kp.v < 0 || kp.v > 2)
        throw Error(ErrorKind::kMalformedInput, "visibility flag must be 0, 1 or 2");
      if (kp.v > 0 && !(kp.x >= 0 && kp.x < p.width && kp.y >= 0 && kp.y < p.height))
        throw Error(ErrorKind::kOutOfBounds, "keypoint " + std::to_string(k) + " of annotation " +
                                                 std::to_string(p.annotation_id) + " lies outside its image");
      p.keypoints.push_back(kp);
    }
    people.push_back(std::move(p));
  }
  return people;
}

void GkrConfig::validate(std::size_t groups) const {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::kConfig, "GKR p must lie in [0, 1]");
  if (scales.size() != groups)
    throw Error(ErrorKind::kConfig, "GKR needs one scale per group (" + std::to_string(groups) +
                                        "), got " + std::to_string(scales.size()));
  for (double s : scales)
    if (!(s > 0.0 && s < 1.0)) throw Error(ErrorKind::kConfig, "GKR scales must lie in (0, 1)");
}

std::vector<double> default_gkr_scales(const Grouping& grouping, const KeypointSchema& schema) {
  static const std::set<std::string_view> face{"nose", "l-eye", "r-eye", "l-ear", "r-ear"};
  std::vector<double> scales;
  for (const auto& g : grouping.groups()) {
    const bool head = std::all_of(g.begin(), g.end(), [&](std::size_t k) {
      return face.contains(canonical_keypoint_name(schema.name(k)));
    });
    scales.push_back(head ? 0.05 : 0.15);
  }
  return scales;
}

ErasePlan plan_gkr(const PersonAnnotation& person, const Grouping& grouping, const GkrConfig& cfg) {
  cfg.validate(grouping.size());
  if (person.keypoints.size() != grouping.keypoints())
    throw Error(ErrorKind::kSchemaMismatch, "annotation has " + std::to_string(person.keypoints.size()) +
                                                " keypoints, grouping covers " +
                                                std::to_string(grouping.keypoints()));
  ErasePlan plan;
  plan.image_id = person.image_id;
  plan.annotation_id = person.annotation_id;
  plan.width = person.width;
  plan.height = person.height;
  plan.file_name = person.file_name;
  plan.planner = "gkr";
  plan.p = cfg.p;
  plan.seed = cfg.seed;

  std::vector<std::size_t> labeled;
  for (std::size_t h = 0; h < grouping.size(); ++h) {
    // One stream per group: a group's labels never shift another group's draws.
    CounterRng rng(mix_key(cfg.seed, {fnv1a64("gkr.groups"), h}));
    const double u = rng.uniform();
    if (!(u > cfg.p)) continue;
    labeled.clear();
    for (std::size_t k : grouping.group(h))
      if (person.keypoints[k].v > 0) labeled.push_back(k);
    if (labeled.empty()) continue;
    const std::size_t k = labeled[rng.below(labeled.size())];
    const int w = static_cast<int>(std::lround(person.width * cfg.scales[h]));
    const int hgt = static_cast<int>(std::lround(person.height * cfg.scales[h]));
    EraseRegion region;
    region.group = h;
    region.keypoint = k;
    region.rect = centered_rect({person.keypoints[k].x, person.keypoints[k].y}, std::max(1, w),
                                std::max(1, hgt), person.width, person.height);
    region.fill_seed = mix_key(cfg.seed, {fnv1a64("gkr.fill"), h});
    plan.regions.push_back(region);
  }
  return plan;
}

ErasePlan plan_random_erasing(const PersonAnnotation& person, const GkrConfig& cfg,
                              const RandomErasingOptions& options) {
  if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) throw Error(ErrorKind::kConfig, "p must lie in [0, 1]");
  ErasePlan plan;
  plan.image_id = person.image_id;
  plan.annotation_id = person.annotation_id;
  plan.width = person.width;
  plan.height = person.height;
  plan.file_name = person.file_name;
  plan.planner = "re";
  plan.p = cfg.p;
  plan.seed = cfg.seed;

  CounterRng rng(derive_seed(cfg.seed, "re"));
  if (!(rng.uniform() > cfg.p)) return plan;
  const double area = static_cast<double>(person.width) * person.height;
  const double log_lo = std::log(options.aspect_min);
  for (int attempt = 0; attempt < options.attempts; ++attempt) {
    const double target = rng.uniform(options.area_min, options.area_max) * area;
    const double aspect = std::exp(rng.uniform(log_lo, -log_lo));
    const int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (w < 1 || h < 1 || w >= person.width || h >= person.height) continue;
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(person.width - w + 1)));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(person.height - h + 1)));
    EraseRegion region;
    region.rect = {x0, y0, x0 + w, y0 + h};
    region.fill_seed = mix_key(cfg.seed, {fnv1a64("re.fill")});
    plan.regions.push_back(region);
    break;
  }
  return plan;
}

std::uint64_t person_seed(std::uint64_t seed, std::int64_t image_id, std::int64_t annotation_id) {
  return mix_key(seed, {static_cast<std::uint64_t>(image_id), static_cast<std::uint64_t>(annotation_id)});
}

std::vector<ErasePlan> plan_dataset(const std::vector<PersonAnnotation>& people,
                                    const Grouping& grouping, const GkrConfig& cfg, Planner planner,
                                    unsigned jobs) {
  cfg.validate(grouping.size());
  std::vector<ErasePlan> plans(people.size());
  parallel_for(people.size(), jobs, [&](std::size_t i) {
    GkrConfig local = cfg;
    local.seed = person_seed(cfg.seed, people[i].image_id, people[i].annotation_id);
    plans[i] = planner == Planner::kGkr ? plan_gkr(people[i], grouping, local)
                                        : plan_random_erasing(people[i], local);
  });
  return plans;
}

Image apply_plan(const Image& image, const ErasePlan& plan) {
  if (image.width != plan.width || image.height != plan.height)
    throw Error(ErrorKind::kDimensionMismatch,
                "image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                    ", plan expects " + std::to_string(plan.width) + "x" + std::to_string(plan.height));
  Image out = image;
  for (const auto& region : plan.regions) {
    const Rect r = region.rect;
    if (r.x0 < 0 || r.y0 < 0 || r.x1 > image.width || r.y1 > image.height || r.x0 > r.x1 || r.y0 > r.y1)
      throw Error(ErrorKind::kOutOfBounds, "erase rectangle outside the image");
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) {
        const auto pixel = static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(image.width) +
                           static_cast<std::uint64_t>(x);
        const std::uint64_t bits = mix_key(region.fill_seed, {pixel});
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<std::uint8_t>(bits >> (8 * c));
      }
  }
  return out;
}

std::string plan_to_json_line(const ErasePlan& plan) {
  ordered_json doc;
  doc["image_id"] = plan.image_id;
  doc["annotation_id"] = plan.annotation_id;
  doc["width"] = plan.width;
  doc["height"] = plan.height;
  doc["file_name"] = plan.file_name;
  doc["planner"] = plan.planner;
  doc["p"] = plan.p;
  doc["seed"] = plan.seed;
  doc["rounding"] = "nearest";
  doc["regions"] = ordered_json::array();
  for (const auto& r : plan.regions) {
    ordered_json j;
    j["group"] = r.group == kNoIndex ? ordered_json(nullptr) : ordered_json(r.group);
    j["keypoint"] = r.keypoint == kNoIndex ? ordered_json(nullptr) : ordered_json(r.keypoint);
    j["rect"] = {r.rect.x0, r.rect.y0, r.rect.x1, r.rect.y1};
    j["fill_seed"] = r.fill_seed;
    doc["regions"].push_back(std::move(j));
  }
  return doc.dump();
}

ErasePlan plan_from_json_line(std::string_view line) {
  try {
    const auto doc = json::parse(line);
    ErasePlan plan;
    plan.image_id = doc.at("image_id").get<std::int64_t>();
    plan.annotation_id = doc.at("annotation_id").get<std::int64_t>();
    plan.width = doc.at("width").get<int>();
    plan.height = doc.at("height").get<int>();
    plan.file_name = doc.value("file_name", "");
    plan.planner = doc.value("planner", "gkr");
    plan.p = doc.value("p", 0.0);
    plan.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& r : doc.at("regions")) {
      EraseRegion region;
      region.group = r.at("group").is_null() ? kNoIndex : r["group"].get<std::size_t>();
      region.keypoint = r.at("keypoint").is_null() ? kNoIndex : r["keypoint"].get<std::size_t>();
      const auto rect = r.at("rect").get<std::vector<int>>();
      if (rect.size() != 4) throw Error(ErrorKind::kMalformedInput, "rect needs 4 values");
      region.rect = {rect[0], rect[1], rect[2], rect[3]};
      region.fill_seed = r.at("fill_seed").get<std::uint64_t>();
      plan.regions.push_back(region);
    }
    return plan;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kMalformedInput, std::string("bad erase plan line: ") + e.what());
  }
}

std::string plans_to_jsonl(const std::vector<ErasePlan>& plans) {
  std::string out;
  for (const auto& p : plans) out += plan_to_json_line(p) + "\n";
  return out;
}

std::vector<ErasePlan> plans_from_jsonl(std::string_view text) {
  std::vector<ErasePlan> plans;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = text.substr(pos, eol - pos);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) plans.push_back(plan_from_json_line(line));
    pos = eol + 1;
  }
  return plans;
}

double occlusion_ratio(const std::vector<const PersonAnnotation*>& people) {
  std::size_t hidden = 0, total = 0;
  for (const auto* p : people)
    for (const auto& kp : p->keypoints) {
      ++total;
      if (kp.v < 2) ++hidden;
    }
  return total == 0 ? 0.0 : static_cast<double>(hidden) / static_cast<double>(total);
}

double occlusion_bucket(double ratio) {
  double bucket = kOcclusionBuckets[0];
  for (double b : kOcclusionBuckets)
    if (ratio >= b) bucket = b;
  return bucket;
}

OcclusionStats occlusion_stats(const std::vector<PersonAnnotation>& people) {
  std::map<std::int64_t, std::vector<const PersonAnnotation*>> by_image;
  for (const auto& p : people) by_image[p.image_id].push_back(&p);
  OcclusionStats stats;
  for (const auto& [id, persons] : by_image) {
    OcclusionStats::ImageRatio r;
    r.image_id = id;
    r.persons = persons.size();
    r.ratio = occlusion_ratio(persons);
    r.bucket = occlusion_bucket(r.ratio);
    for (std::size_t b = 0; b < std::size(kOcclusionBuckets); ++b)
      if (r.bucket == kOcclusionBuckets[b]) ++stats.bucket_counts[b];
    stats.images.push_back(r);
  }
  return stats;
}

std::string occlusion_stats_csv(const OcclusionStats& stats, bool per_image) {
  std::string out;
  if (per_image) {
    out = "image_id,persons,ratio,bucket\n";
    for (const auto& r : stats.images)
      out += std::to_string(r.image_id) + "," + std::to_string(r.persons) + "," +
             format_number(r.ratio) + "," + format_number(r.bucket) + "\n";
    return out;
  }
  out = "bucket,images\n";
  for (std::size_t b = 0; b < std::size(kOcclusionBuckets); ++b)
    out += format_number(kOcclusionBuckets[b]) + "," + std::to_string(stats.bucket_counts[b]) + "\n";
  return out;
}

}  // namespace keyshap
