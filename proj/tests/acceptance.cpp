// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance [--only N] [--cli PATH]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "cli.hpp"
#include "keyshap/error.hpp"
#include "keyshap/gkr.hpp"
#include "keyshap/grouping.hpp"
#include "keyshap/image.hpp"
#include "keyshap/io.hpp"
#include "keyshap/perturb.hpp"
#include "keyshap/shapley.hpp"
#include "keyshap/skeleton.hpp"
#include "support.hpp"

namespace keyshap {
namespace {

namespace fs = std::filesystem;
using testing::fixture;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::set<std::set<std::string>> as_name_sets(const Grouping& g, const KeypointSchema& schema) {
  std::set<std::set<std::string>> out;
  for (const auto& grp : g.groups()) {
    std::set<std::string> names;
    for (std::size_t k : grp) names.insert(schema.name(k));
    out.insert(names);
  }
  return out;
}

// 1. Efficiency, symmetry and dummy axioms on random games.
Outcome shapley_axioms() {
  const auto t0 = std::chrono::steady_clock::now();
  CounterRng rng(derive_seed(1, "acceptance.axioms"));
  double eff = 0, sym = 0, dum = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 10);
    auto v = testing::random_game(n, rng);
    const std::size_t dummy = rng.below(n);
    for (std::uint64_t m = 0; m < v.size(); ++m)
      if (m >> dummy & 1U) v[m] = v[m & ~(std::uint64_t{1} << dummy)];
    std::size_t a = n, b = n;
    if (n >= 3) {
      do {
        a = rng.below(n);
        b = rng.below(n);
      } while (a == b || a == dummy || b == dummy);
      for (std::uint64_t m = 0; m < v.size(); ++m)
        if ((m >> a & 1U) && !(m >> b & 1U)) v[m] = v[(m & ~(std::uint64_t{1} << a)) | (std::uint64_t{1} << b)];
    }
    const auto phi = exact_shapley(n, [&](std::uint64_t m) { return v[m]; });
    eff = std::max(eff, std::abs(std::accumulate(phi.begin(), phi.end(), 0.0) - (v.back() - v.front())));
    dum = std::max(dum, std::abs(phi[dummy]));
    if (a < n) sym = std::max(sym, std::abs(phi[a] - phi[b]));
  }
  const double secs = seconds_since(t0);
  const bool ok = eff <= 1e-9 && sym <= 1e-9 && dum <= 1e-9 && secs < 10.0;
  return {ok, "200 games n<=10: max |efficiency| " + fmt("%.2e", eff) + ", |symmetry| " + fmt("%.2e", sym) +
                  ", |dummy| " + fmt("%.2e", dum) + ", " + fmt("%.2f", secs) + " s (limit 10 s)"};
}

// 2. Intra-group Shapley equals brute force on block-separable synthetic oracles.
Outcome gsv_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  CounterRng rng(derive_seed(2, "acceptance.separable"));
  const auto schema = testing::letters(12);
  double intra_err = 0, off_diag = 0;
  for (int t = 0; t < 50; ++t) {
    const std::vector<std::size_t> sizes = t < 25 ? std::vector<std::size_t>{4, 4, 4} : std::vector<std::size_t>{5, 4, 3};
    const auto perm = testing::random_permutation(12, rng);
    std::vector<std::vector<std::size_t>> groups;
    std::size_t at = 0;
    for (std::size_t s : sizes) {
      groups.emplace_back(perm.begin() + at, perm.begin() + at + s);
      at += s;
    }
    const Grouping grouping(groups, 12);
    const SyntheticOracle oracle(testing::block_config(grouping, rng), schema);
    std::vector<PerfVector> all(std::size_t{1} << 12);
    for (std::uint64_t m = 0; m < all.size(); ++m) all[m] = oracle.eval(InstanceSet::all(), Coalition(12, m), 0);
    const auto report = run_gsv(oracle, grouping);
    for (std::size_t i = 0; i < 12; ++i) {
      const auto exact = exact_shapley(12, [&](std::uint64_t m) { return all[m][i]; });
      const auto& table = report.intra[i];
      for (std::size_t k = 0; k < table.players.size(); ++k)
        intra_err = std::max(intra_err, std::abs(table.phi[k] - exact[table.players[k]]));
    }
    for (const auto& table : report.group)
      for (std::size_t h = 0; h < table.phi.size(); ++h)
        if (h != table.target) off_diag = std::max(off_diag, std::abs(table.phi[h]));
  }
  const double secs = seconds_since(t0);
  const bool ok = intra_err <= 1e-9 && off_diag <= 1e-9 && secs < 30.0;
  return {ok, "50 oracles n=12 {4,4,4}/{5,4,3}: max intra error " + fmt("%.2e", intra_err) +
                  ", max off-diagonal group value " + fmt("%.2e", off_diag) + ", " + fmt("%.2f", secs) +
                  " s (limit 30 s)"};
}

// 3. Clustering the Table 2 interdependency recovers Table 1.
Outcome table1_recovery() {
  const auto& sk = default_skeleton();
  const auto delta = align_to_schema(load_delta_csv(fixture("table2.csv")), sk.schema());
  const auto s = interdependency(perturbation_influence(delta), keypoint_connectivity(sk));
  const auto expected = as_name_sets(grouping_from_json(read_text_file(fixture("table1_groups.json")), sk.schema()),
                                     sk.schema());
  const auto got = as_name_sets(cluster(s, 5, Linkage::kSingle), sk.schema());
  const bool average_ok = as_name_sets(cluster(s, 5, Linkage::kAverage), sk.schema()) == expected;
  std::string text;
  for (const auto& grp : got) {
    text += text.empty() ? "{" : " {";
    std::string names;
    for (const auto& n : grp) names += (names.empty() ? "" : ",") + n;
    text += names + "}";
  }
  return {got == expected, "single linkage, g=5: " + text + (average_ok ? "" : "; average linkage does not match")};
}

// 4. Fixture sanity for the published tables.
Outcome fixture_sanity() {
  std::vector<std::string> problems;
  const auto delta = load_delta_csv(fixture("table2.csv"));
  try {
    check_delta_ranges(delta);
  } catch (const Error& e) {
    problems.push_back(std::string("table2 ranges: ") + e.what());
  }
  for (std::size_t i : diagonal_dominance_violations(delta)) {
    const auto row = delta.drops.row(i);
    const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    problems.push_back("table2 row " + delta.names[i] + " argmax " + delta.names[arg] + " (" +
                       format_number(to_percent(row[arg]), 4) + " > self " + format_number(to_percent(row[i]), 4) + ")");
  }
  std::size_t rows = 0;
  for (const char* name : {"table3_group_shapley.csv", "table4_head_shapley.csv", "table5_left_arm_shapley.csv",
                           "table6_right_arm_shapley.csv", "table7_left_leg_shapley.csv",
                           "table8_right_leg_shapley.csv"}) {
    const auto m = parse_labeled_matrix(read_text_file(fixture(name)));
    for (std::size_t i = 0; i < m.labels.size(); ++i, ++rows) {
      const double sum = m.values.row_sum(i);
      if (std::abs(sum - 100.0) > 0.5)
        problems.push_back(std::string(name) + " row " + m.labels[i] + " sums to " + format_number(sum, 6));
    }
  }
  std::string detail = "table2 ranges + row argmax, " + std::to_string(rows) + " rows of tables 3-8 at 100 +/- 0.5";
  if (!problems.empty()) {
    detail += "; violations:";
    for (const auto& p : problems) detail += " [" + p + "]";
  }
  return {problems.empty(), detail};
}

// 5. Query accounting, predicted and observed.
Outcome cost_accounting() {
  const auto& sk = default_skeleton();
  const auto predicted = query_count(grouping_from_sizes({5, 3, 3, 3, 3}), 17);
  const auto grouping = grouping_from_json(read_text_file(fixture("table1_groups.json")), sk.schema());
  const SyntheticOracle oracle(SyntheticModelConfig::from_json(read_text_file(fixture("synthetic_coco.json"))),
                               sk.schema());
  CountingOracle counter(oracle);
  GsvOptions opt;
  opt.jobs = 4;
  run_gsv(counter, grouping, opt);
  const bool ok = predicted.gsv.distinct_coalitions == 96 && predicted.exact.distinct_coalitions == 131072 &&
                  counter.calls() == predicted.gsv.distinct_coalitions;
  return {ok, "predicted GSV " + std::to_string(predicted.gsv.distinct_coalitions) + " vs exact " +
                  std::to_string(predicted.exact.distinct_coalitions) + "; instrumented run queried " +
                  std::to_string(counter.calls()) + " coalitions (once per game; " +
                  std::to_string(counter.distinct_coalitions()) + " distinct across games)"};
}

// 6. GKR erase rates, group preservation and rectangle size.
Outcome gkr_statistics() {
  const auto& sk = default_skeleton();
  const auto grouping = grouping_from_json(read_text_file(fixture("table1_groups.json")), sk.schema());
  GkrConfig cfg;
  cfg.p = 0.5;
  cfg.scales = default_gkr_scales(grouping, sk.schema());
  PersonAnnotation person;
  person.width = 256;
  person.height = 192;
  CounterRng rng(derive_seed(6, "acceptance.person"));
  for (int k = 0; k < 17; ++k) person.keypoints.push_back({rng.uniform(0, 256), rng.uniform(0, 192), 2});
  constexpr int kTrials = 10000;
  std::vector<int> erased(grouping.size(), 0);
  bool preserved = true;
  for (int t = 0; t < kTrials; ++t) {
    cfg.seed = mix_key(derive_seed(6, "acceptance.gkr"), {static_cast<std::uint64_t>(t)});
    std::vector<int> per_group(grouping.size(), 0);
    for (const auto& r : plan_gkr(person, grouping, cfg).regions) {
      ++per_group[r.group];
      ++erased[r.group];
    }
    for (int c : per_group) preserved &= c <= 1;
  }
  bool rates_ok = true;
  std::string rates;
  for (int c : erased) {
    const double f = static_cast<double>(c) / kTrials;
    rates_ok &= std::abs(f - 0.5) <= 0.01;
    rates += (rates.empty() ? "" : " ") + fmt("%.4f", f);
  }
  PersonAnnotation centered = person;
  centered.keypoints.assign(17, {128, 96, 2});
  GkrConfig fixed{0.0, std::vector<double>(grouping.size(), 0.15), 1};
  bool dims_ok = true;
  for (const auto& r : plan_gkr(centered, grouping, fixed).regions)
    dims_ok &= r.rect.width() == 38 && r.rect.height() == 29;
  return {rates_ok && preserved && dims_ok, "erase frequency per group over 10000 trials: " + rates +
                                                " (0.5 +/- 0.01); <=1 per group: " + (preserved ? "yes" : "no") +
                                                "; 256x192 at s=0.15 -> " + (dims_ok ? "38x29" : "wrong size")};
}

struct CliRun {
  int code;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, err.str()};
}

// Writes a deterministic PPM for every image of the sample annotations.
void write_sample_images(const fs::path& dir) {
  const auto people = parse_annotations(read_text_file(fixture("coco_sample.json")));
  for (const auto& p : people) {
    Image img(p.width, p.height);
    CounterRng rng(static_cast<std::uint64_t>(p.image_id));
    for (auto& b : img.pixels) b = static_cast<std::uint8_t>(rng.below(256));
    write_ppm(dir / p.file_name, img);
  }
}

// Runs the whole pipeline into `dir` with the given job count.
std::string pipeline(const fs::path& dir, const std::string& jobs) {
  fs::create_directories(dir / "images");
  write_sample_images(dir / "images");
  const auto d = [&](const std::string& name) { return (dir / name).string(); };
  const std::vector<std::vector<std::string>> steps = {
      {"interdep", "--oracle", "synthetic:" + fixture("synthetic_coco.json").string(), "--trials", "4", "--seed",
       "13", "--jobs", jobs, "--out", d("delta.csv"), "--pi-out", d("pi.csv"), "--no-manifest"},
      {"cluster", "--delta", d("delta.csv"), "--g", "5", "--out", d("groups.json"), "--s-out", d("s.csv"),
       "--no-manifest"},
      {"shapley", "--oracle", "synthetic:" + fixture("synthetic_coco.json").string(), "--groups",
       fixture("table1_groups.json").string(), "--trials", "3", "--seed", "13", "--jobs", jobs, "--out",
       d("report.json"), "--csv-dir", d("tables"), "--no-manifest"},
      {"gkr", "plan", "--annotations", fixture("coco_sample.json").string(), "--groups",
       fixture("table1_groups.json").string(), "--p", "0.3", "--seed", "13", "--jobs", jobs, "--out",
       d("plans.jsonl"), "--no-manifest"},
      {"gkr", "apply", "--plans", d("plans.jsonl"), "--images-dir", d("images"), "--out-dir", d("erased"),
       "--no-manifest"},
      {"render", "--matrix", d("s.csv"), "--out", d("s.svg"), "--title", "interdependency", "--no-manifest"},
  };
  for (const auto& step : steps) {
    const auto r = run_cli(step);
    if (r.code != 0) return step[0] + " failed: " + r.err;
  }
  return {};
}

// 7. Byte-identical artifacts across --jobs 1 and --jobs 8.
Outcome determinism(const fs::path& work) {
  const auto a = work / "jobs1", b = work / "jobs8";
  for (const auto& [dir, jobs] : {std::pair{a, "1"}, std::pair{b, "8"}})
    if (auto failure = pipeline(dir, jobs); !failure.empty()) return {false, failure};
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    ++compared;
    if (!fs::exists(b / rel) || read_text_file(entry.path()) != read_text_file(b / rel))
      differing.push_back(rel.string());
  }
  std::string detail = std::to_string(compared) + " files (delta CSV, grouping JSON, report JSON/CSV, plan JSONL, PPM, SVG)";
  for (const auto& f : differing) detail += " DIFFERS:" + f;
  return {differing.empty() && compared >= 15, detail};
}

// 8. External wire protocol vs in-process synthetic oracle.
Outcome protocol_fidelity(const fs::path& work, const std::string& cli_path) {
  const auto cfg = fixture("synthetic_coco.json").string();
  const auto local = (work / "local.csv").string(), remote = (work / "remote.csv").string();
  const auto l = run_cli({"interdep", "--oracle", "synthetic:" + cfg, "--trials", "3", "--seed", "21", "--out", local,
                          "--no-manifest"});
  const auto r = run_cli({"interdep", "--oracle", "external", "--oracle-cmd",
                          cli_path + " oracle serve-synthetic --config " + cfg, "--trials", "3", "--seed", "21",
                          "--jobs", "4", "--out", remote, "--no-manifest"});
  if (l.code != 0 || r.code != 0) return {false, "interdep failed: " + l.err + r.err};
  const bool same = read_text_file(local) == read_text_file(remote);
  return {same, std::string("delta matrix over the line protocol ") + (same ? "is byte-identical" : "DIFFERS") +
                    " to the in-process oracle (seed 21, 3 trials)"};
}

}  // namespace
}  // namespace keyshap

int main(int argc, char** argv) {
  using namespace keyshap;
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  std::string cli_path = KEYSHAP_CLI_PATH;
  app.add_option("--only", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--cli", cli_path, "keyshap executable used as the external oracle child");
  CLI11_PARSE(app, argc, argv);

  const auto work = std::filesystem::temp_directory_path() / ("keyshap_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"shapley axioms", shapley_axioms},
      {"group Shapley equals exact on separable games", gsv_equivalence},
      {"table 1 group recovery", table1_recovery},
      {"fixture sanity", fixture_sanity},
      {"cost accounting", cost_accounting},
      {"GKR statistics", gkr_statistics},
      {"determinism across --jobs", [&] { return determinism(work / "determinism"); }},
      {"protocol fidelity", [&] { return protocol_fidelity(work, cli_path); }},
  };

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only != 0 && static_cast<std::size_t>(only) != k + 1) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
  }
  if (only == 0 || only == 9)
    std::printf("N/A  9 desk-scale reproduction: absolute AP values and training gains need trained models; "
                "covered by criteria 2-6 instead\n");
  std::filesystem::remove_all(work);
  return failures == 0 ? 0 : 1;
}
