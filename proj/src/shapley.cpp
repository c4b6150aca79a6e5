#include "keyshap/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "keyshap/error.hpp"
#include "keyshap/io.hpp"
#include "keyshap/parallel.hpp"
#include "keyshap/rng.hpp"

namespace keyshap {
namespace {

void require_players(std::size_t n, std::string_view what) {
  if (n == 0) throw Error(ErrorKind::kOutOfRange, std::string(what) + " has no players");
  if (n > kMaxExactPlayers)
    throw Error(ErrorKind::kTooManyPlayers, std::string(what) + " has " + std::to_string(n) +
                                                " players; exact enumeration is capped at " +
                                                std::to_string(kMaxExactPlayers));
}

std::uint64_t saturating_pow2(std::size_t k) {
  return k >= 64 ? std::numeric_limits<std::uint64_t>::max() : std::uint64_t{1} << k;
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return a > std::numeric_limits<std::uint64_t>::max() - b ? std::numeric_limits<std::uint64_t>::max()
                                                          : a + b;
}

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

// Evaluates the oracle at 2^players coalitions (mask -> keypoint coalition),
// averaging each over the configured trials. Every (coalition, trial) pair is
// queried exactly once; slots are reduced in trial order.
std::vector<PerfVector> evaluate_game(const CoalitionValueOracle& oracle, std::size_t players,
                                      const std::function<Coalition(std::uint64_t)>& to_coalition,
                                      const GsvOptions& options) {
  if (options.trials < 1) throw Error(ErrorKind::kConfig, "trials must be >= 1");
  const std::size_t masks = std::size_t{1} << players;
  const auto trials = static_cast<std::size_t>(options.trials);
  std::vector<PerfVector> slots(masks * trials);
  parallel_for(slots.size(), options.jobs, [&](std::size_t slot) {
    const std::uint64_t mask = slot / trials;
    const std::uint64_t trial = options.seed + slot % trials;
    slots[slot] = oracle.eval(options.instances, to_coalition(mask), trial);
  });
  std::vector<PerfVector> mean(masks, PerfVector(oracle.size(), 0.0));
  for (std::size_t mask = 0; mask < masks; ++mask) {
    for (std::size_t t = 0; t < trials; ++t)
      for (std::size_t i = 0; i < oracle.size(); ++i) mean[mask][i] += slots[mask * trials + t][i];
    for (auto& v : mean[mask]) v /= static_cast<double>(trials);
  }
  return mean;
}

ShapleyTable make_table(std::size_t target, std::vector<std::size_t> players,
                        const std::vector<double>& values) {
  ShapleyTable t;
  t.target = target;
  t.phi = shapley_from_table(values, players.size());
  t.players = std::move(players);
  t.v_full = values.back();
  t.v_empty = values.front();
  return t;
}

std::string percent_cell(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", to_percent(fraction) + 0.0);
  return std::string(buf) == "-0.0" ? "0.0" : buf;
}

std::string percent_table(const std::vector<std::string>& labels,
                          const std::vector<std::vector<double>>& rows) {
  std::string out = "value(%)";
  for (const auto& l : labels) out += "," + csv_escape(l);
  out += "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += csv_escape(labels[r]);
    for (double v : rows[r]) out += "," + percent_cell(v);
    out += "\n";
  }
  return out;
}

std::string group_label(std::size_t h) { return "G" + std::to_string(h + 1); }

}  // namespace

double shapley_weight(std::size_t n, std::size_t s) {
  // 1 / (n * C(n-1, s))
  double binom = 1.0;
  const std::size_t k = std::min(s, n - 1 - s);
  for (std::size_t i = 1; i <= k; ++i)
    binom = binom * static_cast<double>(n - 1 - k + i) / static_cast<double>(i);
  return 1.0 / (static_cast<double>(n) * binom);
}

std::vector<double> shapley_from_table(std::span<const double> values, std::size_t n) {
  require_players(n, "game");
  if (values.size() != (std::size_t{1} << n))
    throw Error(ErrorKind::kDimensionMismatch, "game table has " + std::to_string(values.size()) +
                                                   " entries, expected 2^" + std::to_string(n));
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) weight[s] = shapley_weight(n, s);
  std::vector<double> phi(n, 0.0);
  for (std::uint64_t mask = 0; mask < values.size(); ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (size == n) continue;
    const double w = weight[size];
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t bit = std::uint64_t{1} << j;
      if (mask & bit) continue;
      phi[j] += w * (values[mask | bit] - values[mask]);
    }
  }
  return phi;
}

std::vector<double> exact_shapley(std::size_t n, const GameValue& value) {
  require_players(n, "game");
  std::vector<double> values(std::size_t{1} << n);
  for (std::uint64_t mask = 0; mask < values.size(); ++mask) values[mask] = value(mask);
  return shapley_from_table(values, n);
}

std::vector<double> permutation_shapley(std::size_t n, const GameValue& value, std::size_t samples,
                                        std::uint64_t seed) {
  if (n == 0 || n > kMaxKeypoints) throw Error(ErrorKind::kOutOfRange, "bad player count");
  if (samples == 0) throw Error(ErrorKind::kConfig, "samples must be >= 1");
  std::vector<double> phi(n, 0.0);
  std::vector<std::size_t> order(n);
  const double empty = value(0);
  for (std::size_t s = 0; s < samples; ++s) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(mix_key(seed, {s}));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    std::uint64_t mask = 0;
    double prev = empty;
    for (std::size_t p : order) {
      mask |= std::uint64_t{1} << p;
      const double cur = value(mask);
      phi[p] += cur - prev;
      prev = cur;
    }
  }
  for (auto& v : phi) v /= static_cast<double>(samples);
  return phi;
}

SplitMode parse_split_mode(std::string_view name) {
  if (name == "uniform") return SplitMode::kUniform;
  if (name == "proportional") return SplitMode::kProportional;
  throw Error(ErrorKind::kConfig, "unknown split mode '" + std::string(name) + "'");
}

std::string_view split_mode_name(SplitMode mode) {
  return mode == SplitMode::kUniform ? "uniform" : "proportional";
}

std::vector<ShapleyTable> intra_group_tables(const CoalitionValueOracle& oracle,
                                             const Grouping& grouping, std::size_t h,
                                             const GsvOptions& options) {
  const std::size_t n = oracle.size();
  if (grouping.keypoints() != n)
    throw Error(ErrorKind::kSchemaMismatch, "grouping does not match the oracle schema");
  const auto& members = grouping.group(h);
  require_players(members.size(), "group " + group_label(h));
  std::uint64_t outside = full_mask(n);
  for (std::size_t k : members) outside &= ~(std::uint64_t{1} << k);

  const auto perf = evaluate_game(
      oracle, members.size(),
      [&](std::uint64_t mask) {
        std::uint64_t bits = outside;
        for (std::size_t p = 0; p < members.size(); ++p)
          if (mask >> p & 1U) bits |= std::uint64_t{1} << members[p];
        return Coalition(n, bits);
      },
      options);

  std::vector<ShapleyTable> tables;
  std::vector<double> values(perf.size());
  for (std::size_t target : members) {
    for (std::size_t mask = 0; mask < perf.size(); ++mask) values[mask] = perf[mask][target];
    tables.push_back(make_table(target, members, values));
  }
  return tables;
}

ShapleyTable intra_group_shapley(const CoalitionValueOracle& oracle, const Grouping& grouping,
                                 std::size_t target, const GsvOptions& options) {
  if (target >= grouping.keypoints())
    throw Error(ErrorKind::kOutOfRange, "target keypoint " + std::to_string(target) + " out of range");
  const std::size_t h = grouping.group_of(target);
  const auto& members = grouping.group(h);
  auto tables = intra_group_tables(oracle, grouping, h, options);
  const auto pos = std::find(members.begin(), members.end(), target) - members.begin();
  return std::move(tables[static_cast<std::size_t>(pos)]);
}

std::vector<ShapleyTable> group_tables(const CoalitionValueOracle& oracle, const Grouping& grouping,
                                       const GsvOptions& options) {
  const std::size_t n = oracle.size();
  if (grouping.keypoints() != n)
    throw Error(ErrorKind::kSchemaMismatch, "grouping does not match the oracle schema");
  const std::size_t g = grouping.size();
  require_players(g, "group-level game");
  std::vector<std::uint64_t> group_bits(g, 0);
  for (std::size_t h = 0; h < g; ++h)
    for (std::size_t k : grouping.group(h)) group_bits[h] |= std::uint64_t{1} << k;

  const auto perf = evaluate_game(
      oracle, g,
      [&](std::uint64_t mask) {
        std::uint64_t bits = 0;
        for (std::size_t h = 0; h < g; ++h)
          if (mask >> h & 1U) bits |= group_bits[h];
        return Coalition(n, bits);
      },
      options);

  std::vector<std::size_t> players(g);
  std::iota(players.begin(), players.end(), std::size_t{0});
  std::vector<ShapleyTable> tables;
  std::vector<double> values(perf.size());
  for (std::size_t h = 0; h < g; ++h) {
    const auto& members = grouping.group(h);
    for (std::size_t mask = 0; mask < perf.size(); ++mask) {
      double sum = 0.0;
      for (std::size_t k : members) sum += perf[mask][k];
      values[mask] = sum / static_cast<double>(members.size());
    }
    tables.push_back(make_table(h, players, values));
  }
  return tables;
}

ShapleyTable group_shapley(const CoalitionValueOracle& oracle, const Grouping& grouping,
                           std::size_t target_group, const GsvOptions& options) {
  if (target_group >= grouping.size())
    throw Error(ErrorKind::kOutOfRange, "target group " + std::to_string(target_group) + " out of range");
  auto tables = group_tables(oracle, grouping, options);
  return std::move(tables[target_group]);
}

std::vector<double> normalize_nonneg(std::span<const double> raw) {
  std::vector<double> out(raw.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = raw[i] > 0.0 ? raw[i] : 0.0;
    sum += out[i];
  }
  if (!(sum > 0.0) || !std::isfinite(sum))
    throw Error(ErrorKind::kDegenerateAttribution, "no positive contribution to normalize");
  for (auto& v : out) v /= sum;
  return out;
}

QueryCount query_count(const Grouping& grouping, std::size_t n, std::uint64_t trials) {
  if (grouping.keypoints() != n)
    throw Error(ErrorKind::kSchemaMismatch, "grouping covers " + std::to_string(grouping.keypoints()) +
                                                " keypoints, expected " + std::to_string(n));
  QueryCount q;
  for (const auto& g : grouping.groups())
    q.gsv.distinct_coalitions = saturating_add(q.gsv.distinct_coalitions, saturating_pow2(g.size()));
  q.gsv.distinct_coalitions = saturating_add(q.gsv.distinct_coalitions, saturating_pow2(grouping.size()));
  q.exact.distinct_coalitions = saturating_pow2(n);
  q.gsv.oracle_calls = saturating_mul(q.gsv.distinct_coalitions, trials);
  q.exact.oracle_calls = saturating_mul(q.exact.distinct_coalitions, trials);
  return q;
}

SquareMatrix combined_attribution(const std::vector<ShapleyTable>& intra,
                                  const std::vector<ShapleyTable>& group, const Grouping& grouping,
                                  SplitMode split) {
  const std::size_t n = grouping.keypoints();
  const std::size_t g = grouping.size();
  if (intra.size() != n)
    throw Error(ErrorKind::kIncompleteInput, "expected " + std::to_string(n) + " intra-group tables, got " +
                                                 std::to_string(intra.size()));
  if (group.size() != g)
    throw Error(ErrorKind::kIncompleteInput, "expected " + std::to_string(g) + " group tables, got " +
                                                 std::to_string(group.size()));
  for (std::size_t i = 0; i < n; ++i)
    if (intra[i].target != i || intra[i].players != grouping.group(grouping.group_of(i)) ||
        intra[i].phi.size() != intra[i].players.size())
      throw Error(ErrorKind::kIncompleteInput, "intra-group table for keypoint " + std::to_string(i) +
                                                   " is missing or inconsistent with the grouping");
  for (std::size_t h = 0; h < g; ++h)
    if (group[h].target != h || group[h].phi.size() != g)
      throw Error(ErrorKind::kIncompleteInput, "group table " + std::to_string(h) +
                                                   " is missing or inconsistent with the grouping");

  std::vector<std::vector<double>> intra_hat(n);
  for (std::size_t i = 0; i < n; ++i) intra_hat[i] = normalize_nonneg(intra[i].phi);

  // Proportional split weights: each member's normalized self-contribution.
  std::vector<double> self_value(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& players = intra[i].players;
    const auto pos = std::find(players.begin(), players.end(), i) - players.begin();
    self_value[i] = intra_hat[i][static_cast<std::size_t>(pos)];
  }

  SquareMatrix sigma(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = grouping.group_of(i);
    const auto psi = normalize_nonneg(group[own].phi);
    for (std::size_t h = 0; h < g; ++h) {
      const auto& members = grouping.group(h);
      if (h == own) {
        for (std::size_t p = 0; p < members.size(); ++p) sigma(i, members[p]) = psi[h] * intra_hat[i][p];
        continue;
      }
      double total = 0.0;
      for (std::size_t k : members) total += self_value[k];
      for (std::size_t k : members) {
        const double share = split == SplitMode::kProportional && total > 0.0
                                 ? self_value[k] / total
                                 : 1.0 / static_cast<double>(members.size());
        sigma(i, k) = psi[h] * share;
      }
    }
  }
  return sigma;
}

AttributionReport run_gsv(const CoalitionValueOracle& oracle, const Grouping& grouping,
                          const GsvOptions& options) {
  const std::size_t n = oracle.size();
  if (grouping.keypoints() != n)
    throw Error(ErrorKind::kSchemaMismatch, "grouping does not match the oracle schema");
  AttributionReport report;
  report.names = oracle.schema().names();
  report.grouping = grouping;
  report.split = options.split;
  report.options = options;
  report.intra.resize(n);
  for (std::size_t h = 0; h < grouping.size(); ++h)
    for (auto& t : intra_group_tables(oracle, grouping, h, options)) report.intra[t.target] = std::move(t);
  report.group = group_tables(oracle, grouping, options);
  report.attribution = combined_attribution(report.intra, report.group, grouping, options.split);
  report.budget = query_count(grouping, n, static_cast<std::uint64_t>(options.trials)).gsv;
  return report;
}

std::string report_to_json(const AttributionReport& report) {
  using nlohmann::ordered_json;
  const auto& names = report.names;
  ordered_json doc;
  doc["names"] = names;

  ordered_json groups = ordered_json::array();
  for (std::size_t h = 0; h < report.grouping.size(); ++h) {
    ordered_json members = ordered_json::array();
    for (std::size_t k : report.grouping.group(h)) members.push_back(names[k]);
    groups.push_back({{"label", group_label(h)}, {"members", members}});
  }
  doc["grouping"] = {{"groups", groups}, {"g", report.grouping.size()}};

  doc["settings"] = {{"weight", "shapley"},
                     {"out_of_group", "visible"},
                     {"group_value", "mean-over-target-group"},
                     {"normalization", "per-row clamp-and-rescale"},
                     {"split", split_mode_name(report.split)},
                     {"trials", report.options.trials},
                     {"seed", report.options.seed},
                     {"instances", report.options.instances.ids}};
  doc["budget"] = {{"distinct_coalitions", report.budget.distinct_coalitions},
                   {"oracle_calls", report.budget.oracle_calls}};

  ordered_json intra = ordered_json::array();
  for (const auto& t : report.intra) {
    ordered_json players = ordered_json::array();
    for (std::size_t k : t.players) players.push_back(names[k]);
    intra.push_back({{"target", names[t.target]},
                     {"players", players},
                     {"phi", t.phi},
                     {"v_full", t.v_full},
                     {"v_empty", t.v_empty},
                     {"normalized", normalize_nonneg(t.phi)}});
  }
  doc["intra"] = intra;

  ordered_json group = ordered_json::array();
  for (const auto& t : report.group) {
    ordered_json players = ordered_json::array();
    for (std::size_t h : t.players) players.push_back(group_label(h));
    group.push_back({{"target", group_label(t.target)},
                     {"players", players},
                     {"phi", t.phi},
                     {"v_full", t.v_full},
                     {"v_empty", t.v_empty},
                     {"normalized", normalize_nonneg(t.phi)}});
  }
  doc["group"] = group;

  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < report.attribution.size(); ++i) {
    const auto r = report.attribution.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  doc["attribution"] = rows;
  return doc.dump(2) + "\n";
}

std::vector<std::pair<std::string, std::string>> report_to_csv(const AttributionReport& report) {
  std::vector<std::pair<std::string, std::string>> files;
  const std::size_t g = report.grouping.size();

  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  for (std::size_t h = 0; h < g; ++h) {
    labels.push_back(group_label(h));
    rows.push_back(normalize_nonneg(report.group[h].phi));
  }
  files.emplace_back("group.csv", percent_table(labels, rows));

  for (std::size_t h = 0; h < g; ++h) {
    labels.clear();
    rows.clear();
    for (std::size_t k : report.grouping.group(h)) {
      labels.push_back(report.names[k]);
      rows.push_back(normalize_nonneg(report.intra[k].phi));
    }
    files.emplace_back("intra_" + group_label(h) + ".csv", percent_table(labels, rows));
  }

  rows.clear();
  for (std::size_t i = 0; i < report.attribution.size(); ++i) {
    const auto r = report.attribution.row(i);
    rows.emplace_back(r.begin(), r.end());
  }
  files.emplace_back("attribution.csv", percent_table(report.names, rows));
  return files;
}

}  // namespace keyshap
