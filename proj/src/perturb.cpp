#include "keyshap/perturb.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "keyshap/error.hpp"
#include "keyshap/io.hpp"
#include "keyshap/parallel.hpp"
#include "keyshap/rng.hpp"

namespace keyshap {

Rect centered_rect(Point center, int w, int h, int image_w, int image_h) {
  Rect r;
  r.x0 = static_cast<int>(std::floor(center.x - w / 2.0));
  r.y0 = static_cast<int>(std::floor(center.y - h / 2.0));
  r.x1 = r.x0 + w;
  r.y1 = r.y0 + h;
  r.x0 = std::clamp(r.x0, 0, image_w);
  r.x1 = std::clamp(r.x1, 0, image_w);
  r.y0 = std::clamp(r.y0, 0, image_h);
  r.y1 = std::clamp(r.y1, 0, image_h);
  // Never collapse below the pixel holding the center.
  if (r.x1 <= r.x0) {
    r.x0 = std::clamp(static_cast<int>(std::floor(center.x)), 0, image_w - 1);
    r.x1 = r.x0 + 1;
  }
  if (r.y1 <= r.y0) {
    r.y0 = std::clamp(static_cast<int>(std::floor(center.y)), 0, image_h - 1);
    r.y1 = r.y0 + 1;
  }
  return r;
}

std::vector<MaskSpec> gen_masks(Point keypoint, int m, double base_scale, int image_w,
                                int image_h, std::uint64_t seed, const MaskOptions& options) {
  if (m < 1) throw Error(ErrorKind::kConfig, "mask count must be >= 1");
  if (!(base_scale > 0.0 && base_scale < 1.0))
    throw Error(ErrorKind::kConfig, "base_scale must lie in (0, 1)");
  if (image_w < 1 || image_h < 1) throw Error(ErrorKind::kConfig, "image bounds must be positive");
  if (!(options.area_min > 0.0 && options.area_min <= options.area_max) ||
      !(options.aspect_min > 0.0 && options.aspect_min <= options.aspect_max))
    throw Error(ErrorKind::kConfig, "mask area/aspect ranges must be positive and ordered");
  if (!(keypoint.x >= 0.0 && keypoint.x < image_w && keypoint.y >= 0.0 && keypoint.y < image_h))
    throw Error(ErrorKind::kOutOfBounds, "keypoint (" + format_number(keypoint.x) + ", " +
                                             format_number(keypoint.y) + ") outside image");
  const double side = base_scale * std::min(image_w, image_h);
  const double log_lo = std::log(options.aspect_min);
  const double log_hi = std::log(options.aspect_max);
  std::vector<MaskSpec> masks;
  masks.reserve(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    CounterRng rng(mix_key(seed, {static_cast<std::uint64_t>(k)}));
    const double area = rng.uniform(options.area_min, options.area_max) * side * side;
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    MaskSpec mask;
    mask.center = keypoint;
    mask.width = std::max(1, static_cast<int>(std::lround(std::sqrt(area * aspect))));
    mask.height = std::max(1, static_cast<int>(std::lround(std::sqrt(area / aspect))));
    mask.rect = centered_rect(keypoint, mask.width, mask.height, image_w, image_h);
    mask.fill_seed = mix_key(seed, {static_cast<std::uint64_t>(k), fnv1a64("fill")});
    masks.push_back(mask);
  }
  return masks;
}

std::string masks_to_json(const std::vector<MaskSpec>& masks, const MaskOptions& options) {
  nlohmann::ordered_json doc;
  doc["fill"] = "noise";
  doc["area_factor"] = {options.area_min, options.area_max};
  doc["aspect_log_uniform"] = {options.aspect_min, options.aspect_max};
  doc["masks"] = nlohmann::ordered_json::array();
  for (const auto& m : masks) {
    nlohmann::ordered_json j;
    j["center"] = {m.center.x, m.center.y};
    j["width"] = m.width;
    j["height"] = m.height;
    j["rect"] = {m.rect.x0, m.rect.y0, m.rect.x1, m.rect.y1};
    j["fill_seed"] = m.fill_seed;
    doc["masks"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::uint64_t delta_trial_id(std::uint64_t seed, int t) noexcept {
  return seed + static_cast<std::uint64_t>(t);
}

DeltaMatrix delta_perf_matrix(const CoalitionValueOracle& oracle, const DeltaOptions& options) {
  if (options.trials < 1) throw Error(ErrorKind::kConfig, "trials must be >= 1");
  const std::size_t n = oracle.size();
  const auto m = static_cast<std::size_t>(options.trials);
  // Slot (c, t): coalition c (0 = full, j + 1 = all but j) at trial t.
  std::vector<PerfVector> results((n + 1) * m);
  parallel_for(results.size(), options.jobs, [&](std::size_t slot) {
    const std::size_t c = slot / m;
    const int t = static_cast<int>(slot % m);
    const Coalition coalition = c == 0 ? Coalition::full(n) : Coalition::full(n).without(c - 1);
    results[slot] = oracle.eval(options.instances, coalition, delta_trial_id(options.seed, t));
  });
  auto mean_of = [&](std::size_t c, std::size_t i) {
    double sum = 0.0;
    for (std::size_t t = 0; t < m; ++t) sum += results[c * m + t][i];
    return sum / static_cast<double>(m);
  };
  DeltaMatrix delta;
  delta.names = oracle.schema().names();
  delta.baseline.resize(n);
  delta.drops = SquareMatrix(n);
  for (std::size_t i = 0; i < n; ++i) delta.baseline[i] = mean_of(0, i);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      delta.drops(i, j) = std::max(0.0, delta.baseline[i] - mean_of(j + 1, i));
  return delta;
}

std::string write_delta_csv(const DeltaMatrix& delta) {
  std::string out = "keypoint,baseline";
  for (const auto& n : delta.names) out += "," + csv_escape(n);
  out += "\n";
  for (std::size_t i = 0; i < delta.size(); ++i) {
    out += csv_escape(delta.names[i]) + "," + format_number(to_percent(delta.baseline[i]));
    for (std::size_t j = 0; j < delta.size(); ++j)
      out += "," + format_number(to_percent(delta.drops(i, j)));
    out += "\n";
  }
  return out;
}

DeltaMatrix parse_delta_csv(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty() || rows[0].size() < 3 || rows[0][1] != "baseline")
    throw Error(ErrorKind::kMalformedInput, "delta CSV needs a 'keypoint,baseline,...' header");
  DeltaMatrix d;
  d.names.assign(rows[0].begin() + 2, rows[0].end());
  const std::size_t n = d.names.size();
  if (rows.size() != n + 1)
    throw Error(ErrorKind::kDimensionMismatch, "delta CSV has " + std::to_string(rows.size() - 1) +
                                                   " rows for " + std::to_string(n) + " keypoints");
  d.baseline.resize(n);
  d.drops = SquareMatrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i + 1];
    if (r.size() != n + 2)
      throw Error(ErrorKind::kMalformedInput, "delta CSV row '" + r[0] + "' has " +
                                                  std::to_string(r.size()) + " fields");
    if (canonical_keypoint_name(r[0]) != canonical_keypoint_name(d.names[i]))
      throw Error(ErrorKind::kMalformedInput,
                  "delta CSV row '" + r[0] + "' does not match column '" + d.names[i] + "'");
    d.baseline[i] = from_percent(parse_double(r[1], "delta CSV baseline"));
    for (std::size_t j = 0; j < n; ++j)
      d.drops(i, j) = from_percent(parse_double(r[j + 2], "delta CSV"));
  }
  return d;
}

DeltaMatrix load_delta_csv(const std::filesystem::path& path) {
  return parse_delta_csv(read_text_file(path));
}

DeltaMatrix align_to_schema(const DeltaMatrix& delta, const KeypointSchema& schema) {
  const std::size_t n = schema.size();
  if (delta.size() != n)
    throw Error(ErrorKind::kSchemaMismatch, "delta matrix has " + std::to_string(delta.size()) +
                                                " keypoints, schema has " + std::to_string(n));
  std::vector<std::size_t> src(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t target = schema.require_index(delta.names[k]);
    if (src[target] != n)
      throw Error(ErrorKind::kSchemaMismatch, "keypoint '" + schema.name(target) + "' appears twice");
    src[target] = k;
  }
  DeltaMatrix out;
  out.names = schema.names();
  out.baseline.resize(n);
  out.drops = SquareMatrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.baseline[i] = delta.baseline[src[i]];
    for (std::size_t j = 0; j < n; ++j) out.drops(i, j) = delta.drops(src[i], src[j]);
  }
  return out;
}

std::vector<std::size_t> diagonal_dominance_violations(const DeltaMatrix& delta) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const auto r = delta.drops.row(i);
    if (static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin()) != i)
      bad.push_back(i);
  }
  return bad;
}

std::vector<std::size_t> column_dominance_violations(const DeltaMatrix& delta) {
  std::vector<std::size_t> bad;
  for (std::size_t j = 0; j < delta.size(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < delta.size(); ++i)
      if (delta.drops(i, j) > delta.drops(best, j)) best = i;
    if (best != j) bad.push_back(j);
  }
  return bad;
}

void check_delta_ranges(const DeltaMatrix& delta) {
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (!(delta.baseline[i] >= 0.0 && delta.baseline[i] <= 1.0))
      throw Error(ErrorKind::kMalformedInput, "baseline of '" + delta.names[i] + "' outside [0, 1]");
    for (std::size_t j = 0; j < delta.size(); ++j) {
      const double d = delta.drops(i, j);
      if (!(d >= 0.0 && d <= delta.baseline[i]))
        throw Error(ErrorKind::kMalformedInput, "drop (" + delta.names[i] + ", " + delta.names[j] +
                                                    ") outside [0, baseline]");
    }
  }
}

SquareMatrix perturbation_influence(const SquareMatrix& drops) {
  std::size_t bad = 0;
  auto pi = symmetric_row_normalized(drops, &bad);
  if (pi.size() != drops.size())
    throw Error(ErrorKind::kDegenerateRow, "performance-drop row " + std::to_string(bad) +
                                               " sums to zero");
  return pi;
}

SquareMatrix perturbation_influence(const DeltaMatrix& delta) {
  try {
    return perturbation_influence(delta.drops);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDegenerateRow) throw;
    for (std::size_t i = 0; i < delta.size(); ++i)
      if (!(delta.drops.row_sum(i) > 0.0))
        throw Error(ErrorKind::kDegenerateRow,
                    "performance-drop row " + std::to_string(i) + " ('" + delta.names[i] +
                        "') sums to zero");
    throw;
  }
}

}  // namespace keyshap
