#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "keyshap/analysis.hpp"
#include "keyshap/error.hpp"
#include "keyshap/gkr.hpp"
#include "keyshap/grouping.hpp"
#include "keyshap/image.hpp"
#include "keyshap/io.hpp"
#include "keyshap/manifest.hpp"
#include "keyshap/oracle.hpp"
#include "keyshap/perturb.hpp"
#include "keyshap/rng.hpp"
#include "keyshap/shapley.hpp"
#include "keyshap/skeleton.hpp"

namespace keyshap::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string schema;
  std::string manifest;
  bool no_manifest = false;
};

// Collects what a run read and wrote, then emits the manifest.
class Recorder {
 public:
  Recorder(std::string command, std::vector<std::string> argv, std::ostream& out)
      : out_(out) {
    manifest_.command = std::move(command);
    manifest_.argv = std::move(argv);
  }

  RunManifest& manifest() { return manifest_; }

  void input(const std::string& path) {
    if (!path.empty()) manifest_.inputs[path] = digest_file(path);
  }

  // Writes to `path`, or to stdout when the path is empty.
  void emit(const std::string& path, std::string_view bytes) {
    if (path.empty()) {
      out_ << bytes;
      return;
    }
    write_text_file(path, bytes);
    manifest_.outputs[path] = digest_bytes(bytes);
    if (first_output_.empty()) first_output_ = path;
  }

  void finish(const Common& common) {
    if (common.no_manifest || manifest_.outputs.empty()) return;
    const std::string path = common.manifest.empty() ? first_output_ + ".manifest.json" : common.manifest;
    write_text_file(path, manifest_.to_json());
  }

 private:
  std::ostream& out_;
  RunManifest manifest_;
  std::string first_output_;
};

void add_common(CLI::App* app, Common& c, bool seeded, bool parallel) {
  app->add_option("--schema", c.schema, "Skeleton JSON (default: built-in COCO 17)");
  if (seeded) app->add_option("--seed", c.seed, "Root seed; every random stream derives from it");
  if (parallel) app->add_option("--jobs", c.jobs, "Concurrent oracle evaluations")->check(CLI::PositiveNumber);
  app->add_option("--manifest", c.manifest, "Run manifest path (default: <first output>.manifest.json)");
  app->add_flag("--no-manifest", c.no_manifest, "Do not write a run manifest");
}

Skeleton load_skeleton(const Common& c, Recorder& rec) {
  Skeleton sk = c.schema.empty() ? default_skeleton() : load_schema_file(c.schema);
  rec.input(c.schema);
  rec.manifest().schema_hash = sk.hash();
  return sk;
}

struct OracleArgs {
  std::string spec;
  std::string command;
  int timeout_ms = 0;
  std::string instances = "all";
};

void add_oracle_options(CLI::App* app, OracleArgs& o) {
  app->add_option("--oracle", o.spec, "tabular:PATH | synthetic:PATH | external")->required();
  app->add_option("--oracle-cmd", o.command, "Child command for the external oracle (env KEYSHAP_ORACLE_CMD)");
  app->add_option("--oracle-timeout", o.timeout_ms, "External oracle timeout in ms (env KEYSHAP_ORACLE_TIMEOUT_MS)");
  app->add_option("--instances", o.instances, "Comma-separated instance ids, or 'all'");
}

InstanceSet parse_instances(const std::string& text) {
  InstanceSet set;
  std::stringstream ss(text);
  std::string id;
  while (std::getline(ss, id, ','))
    if (!id.empty()) set.ids.push_back(id);
  if (set.ids.empty()) throw Error(ErrorKind::kConfig, "no instances given");
  return set;
}

std::unique_ptr<CoalitionValueOracle> make_oracle(const OracleArgs& args, const Skeleton& sk,
                                                  Recorder& rec) {
  std::unique_ptr<CoalitionValueOracle> oracle;
  if (args.spec.starts_with("tabular:")) {
    const std::string path = args.spec.substr(8);
    rec.input(path);
    oracle = std::make_unique<TabularOracle>(load_tabular_oracle(path, sk.schema()));
  } else if (args.spec.starts_with("synthetic:")) {
    const std::string path = args.spec.substr(10);
    rec.input(path);
    oracle = make_synthetic_oracle(SyntheticModelConfig::from_json(read_text_file(path)), sk.schema());
  } else if (args.spec == "external") {
    std::string command = args.command;
    if (command.empty())
      if (const char* env = std::getenv("KEYSHAP_ORACLE_CMD")) command = env;
    if (command.empty())
      throw Error(ErrorKind::kConfig, "external oracle needs --oracle-cmd or KEYSHAP_ORACLE_CMD");
    int timeout = args.timeout_ms;
    if (timeout <= 0)
      if (const char* env = std::getenv("KEYSHAP_ORACLE_TIMEOUT_MS")) timeout = std::atoi(env);
    if (timeout <= 0) timeout = 30000;
    oracle = std::make_unique<ExternalOracle>(command, sk.schema(), timeout);
  } else {
    throw Error(ErrorKind::kConfig, "unknown oracle spec '" + args.spec + "'");
  }
  rec.manifest().oracle = oracle->identity();
  return oracle;
}

std::string fixed_decimals(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

LabeledMatrix align_matrix(const LabeledMatrix& m, const KeypointSchema& schema) {
  const std::size_t n = schema.size();
  if (m.labels.size() != n)
    throw Error(ErrorKind::kSchemaMismatch, "matrix has " + std::to_string(m.labels.size()) +
                                                " labels, schema has " + std::to_string(n));
  std::vector<std::size_t> src(n);
  for (std::size_t k = 0; k < n; ++k) src[schema.require_index(m.labels[k])] = k;
  LabeledMatrix out{schema.names(), SquareMatrix(n)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.values(i, j) = m.values(src[i], src[j]);
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Group Shapley attribution for multi-keypoint predictors", "keyshap"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  // interdep ---------------------------------------------------------------
  Common interdep_c;
  OracleArgs interdep_o;
  int interdep_trials = 8;
  std::string interdep_out, interdep_pi_out;
  auto* interdep = app.add_subcommand("interdep", "Oracle -> performance-drop matrix and perturbation influence");
  add_common(interdep, interdep_c, true, true);
  add_oracle_options(interdep, interdep_o);
  interdep->add_option("--trials,-m", interdep_trials, "Trials averaged per perturbed coalition")->check(CLI::PositiveNumber);
  interdep->add_option("--out", interdep_out, "Delta matrix CSV (percent)");
  interdep->add_option("--pi-out", interdep_pi_out, "Perturbation influence CSV");

  // cluster ----------------------------------------------------------------
  Common cluster_c;
  std::string cluster_delta, cluster_pi, cluster_out, cluster_s_out, cluster_linkage = "single";
  std::size_t cluster_g = 5;
  auto* cluster_cmd = app.add_subcommand("cluster", "PI + KC -> keypoint grouping");
  add_common(cluster_cmd, cluster_c, false, false);
  auto* delta_opt = cluster_cmd->add_option("--delta", cluster_delta, "Delta matrix CSV (percent)");
  auto* pi_opt = cluster_cmd->add_option("--pi", cluster_pi, "Perturbation influence CSV");
  delta_opt->excludes(pi_opt);
  cluster_cmd->add_option("--g", cluster_g, "Number of groups");
  cluster_cmd->add_option("--linkage", cluster_linkage, "single | average");
  cluster_cmd->add_option("--out", cluster_out, "Grouping JSON");
  cluster_cmd->add_option("--s-out", cluster_s_out, "Interdependency matrix CSV");

  // shapley ----------------------------------------------------------------
  Common shapley_c;
  OracleArgs shapley_o;
  std::string shapley_groups, shapley_out, shapley_csv_dir, shapley_split = "uniform";
  int shapley_trials = 1;
  bool shapley_count = false;
  auto* shapley = app.add_subcommand("shapley", "Oracle + grouping -> attribution report");
  add_common(shapley, shapley_c, true, true);
  add_oracle_options(shapley, shapley_o);
  shapley->add_option("--groups", shapley_groups, "Grouping JSON")->required();
  shapley->add_option("--trials", shapley_trials, "Trials averaged per coalition")->check(CLI::PositiveNumber);
  shapley->add_option("--split", shapley_split, "Cross-group split: uniform | proportional");
  shapley->add_option("--out", shapley_out, "Report JSON");
  shapley->add_option("--csv-dir", shapley_csv_dir, "Directory for percent CSV tables");
  shapley->add_flag("--count", shapley_count, "Report the oracle queries actually made");

  // exact ------------------------------------------------------------------
  Common exact_c;
  std::string exact_game, exact_out;
  std::size_t exact_sampled = 0;
  int exact_digits = 4;
  auto* exact = app.add_subcommand("exact", "Brute-force Shapley values of a small tabulated game");
  add_common(exact, exact_c, true, false);
  exact->add_option("--game", exact_game, "CSV coalition_hex,value covering all 2^n coalitions")->required();
  exact->add_option("--sampled", exact_sampled, "Also estimate by permutation sampling with this many orderings");
  exact->add_option("--digits", exact_digits, "Decimals in the output");
  exact->add_option("--out", exact_out, "Output CSV");

  // cost -------------------------------------------------------------------
  Common cost_c;
  std::vector<std::size_t> cost_sizes;
  std::string cost_grouping, cost_out;
  std::size_t cost_n = 0;
  std::uint64_t cost_trials = 1;
  auto* cost = app.add_subcommand("cost", "Distinct coalitions: group Shapley vs full enumeration");
  add_common(cost, cost_c, false, false);
  auto* sizes_opt = cost->add_option("--groups", cost_sizes, "Group sizes, e.g. 5,3,3,3,3")->delimiter(',');
  auto* grouping_opt = cost->add_option("--grouping", cost_grouping, "Grouping JSON");
  sizes_opt->excludes(grouping_opt);
  cost->add_option("--n", cost_n, "Keypoint count (checked against the groups)");
  cost->add_option("--trials", cost_trials, "Trials per coalition");
  cost->add_option("--out", cost_out, "Output CSV");

  // gkr --------------------------------------------------------------------
  auto* gkr = app.add_subcommand("gkr", "Group-based keypoint removal");
  gkr->require_subcommand(1);
  Common plan_c;
  std::string plan_annotations, plan_groups, plan_out, plan_planner = "gkr";
  double plan_p = 0.5;
  std::vector<double> plan_scales;
  auto* plan = gkr->add_subcommand("plan", "Annotations + grouping -> erase plans (JSONL)");
  add_common(plan, plan_c, true, true);
  plan->add_option("--annotations", plan_annotations, "COCO person_keypoints JSON")->required();
  plan->add_option("--groups", plan_groups, "Grouping JSON")->required();
  plan->add_option("--p", plan_p, "Keep threshold: a group is erased when its draw exceeds p");
  plan->add_option("--scales", plan_scales, "Per-group erase scale (default 0.05 head, 0.15 other)")->delimiter(',');
  plan->add_option("--planner", plan_planner, "gkr | re (grouping-blind random erasing)");
  plan->add_option("--out", plan_out, "Erase plans JSONL");

  Common apply_c;
  std::string apply_image, apply_plans, apply_out, apply_images_dir, apply_out_dir;
  std::optional<std::int64_t> apply_image_id;
  auto* apply = gkr->add_subcommand("apply", "Apply erase plans to PPM images");
  add_common(apply, apply_c, false, false);
  apply->add_option("--plans", apply_plans, "Erase plans JSONL")->required();
  apply->add_option("--image", apply_image, "Input PPM (single-image mode)");
  apply->add_option("--image-id", apply_image_id, "Image id whose plans to apply (single-image mode)");
  apply->add_option("--out", apply_out, "Output PPM (single-image mode)");
  apply->add_option("--images-dir", apply_images_dir, "Directory holding each plan's file_name (batch mode)");
  apply->add_option("--out-dir", apply_out_dir, "Output directory (batch mode)");

  Common stats_c;
  std::string stats_annotations, stats_out;
  bool stats_per_image = false;
  auto* stats = gkr->add_subcommand("stats", "Occlusion-ratio buckets of an annotation file");
  add_common(stats, stats_c, false, false);
  stats->add_option("--annotations", stats_annotations, "COCO person_keypoints JSON")->required();
  stats->add_flag("--per-image", stats_per_image, "List every image instead of bucket totals");
  stats->add_option("--out", stats_out, "Output CSV");

  // corr -------------------------------------------------------------------
  Common corr_c;
  std::string corr_table, corr_out, corr_svg;
  auto* corr = app.add_subcommand("corr", "Pairwise-complete Pearson correlation of confidence scores");
  add_common(corr, corr_c, false, false);
  corr->add_option("--table", corr_table, "Confidence CSV (header of names, empty = missing)")->required();
  corr->add_option("--out", corr_out, "Correlation matrix CSV");
  corr->add_option("--svg", corr_svg, "Also render a heatmap");

  // render -----------------------------------------------------------------
  Common render_c;
  std::string render_matrix, render_out, render_title;
  std::optional<double> render_vmin, render_vmax;
  int render_decimals = 2;
  auto* render = app.add_subcommand("render", "Matrix CSV -> SVG heatmap");
  add_common(render, render_c, false, false);
  render->add_option("--matrix", render_matrix, "Labeled square matrix CSV")->required();
  render->add_option("--out", render_out, "Output SVG");
  render->add_option("--title", render_title, "Title text");
  render->add_option("--vmin", render_vmin, "Ramp minimum");
  render->add_option("--vmax", render_vmax, "Ramp maximum");
  render->add_option("--decimals", render_decimals, "Decimals in cell labels");

  // masks ------------------------------------------------------------------
  Common masks_c;
  double masks_x = 0, masks_y = 0, masks_scale = 0.1;
  int masks_m = 8, masks_w = 0, masks_h = 0;
  MaskOptions mask_options;
  std::string masks_out;
  auto* masks = app.add_subcommand("masks", "Random perturbation masks around a keypoint");
  add_common(masks, masks_c, true, false);
  masks->add_option("--x", masks_x, "Keypoint x")->required();
  masks->add_option("--y", masks_y, "Keypoint y")->required();
  masks->add_option("--width", masks_w, "Image width")->required();
  masks->add_option("--height", masks_h, "Image height")->required();
  masks->add_option("--m", masks_m, "Number of masks");
  masks->add_option("--scale", masks_scale, "Base scale as a fraction of min(W, H)");
  masks->add_option("--area-min", mask_options.area_min);
  masks->add_option("--area-max", mask_options.area_max);
  masks->add_option("--aspect-min", mask_options.aspect_min);
  masks->add_option("--aspect-max", mask_options.aspect_max);
  masks->add_option("--out", masks_out, "Output JSON");

  // oracle serve-synthetic -------------------------------------------------
  auto* oracle_cmd = app.add_subcommand("oracle", "Oracle utilities");
  oracle_cmd->require_subcommand(1);
  Common serve_c;
  std::string serve_config;
  auto* serve = oracle_cmd->add_subcommand("serve-synthetic", "Serve a synthetic oracle over the line protocol on stdin/stdout");
  serve->add_option("--schema", serve_c.schema, "Skeleton JSON");
  serve->add_option("--config", serve_config, "Synthetic model config JSON")->required();

  // replay -----------------------------------------------------------------
  std::string replay_manifest;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and verify byte-identical outputs");
  replay->add_option("manifest", replay_manifest, "Run manifest JSON")->required();

  std::vector<std::string> argv_storage{"keyshap"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (interdep->parsed()) {
      Recorder rec("interdep", args, out);
      const auto sk = load_skeleton(interdep_c, rec);
      const auto oracle = make_oracle(interdep_o, sk, rec);
      DeltaOptions opts;
      opts.trials = interdep_trials;
      opts.seed = derive_seed(interdep_c.seed, "interdep.trials");
      opts.jobs = interdep_c.jobs;
      opts.instances = parse_instances(interdep_o.instances);
      rec.manifest().seeds["root"] = interdep_c.seed;
      rec.manifest().seeds["interdep.trials"] = opts.seed;
      rec.manifest().config["trials"] = std::to_string(opts.trials);
      rec.manifest().config["instances"] = interdep_o.instances;
      const auto delta = delta_perf_matrix(*oracle, opts);
      rec.emit(interdep_out, write_delta_csv(delta));
      if (!interdep_pi_out.empty())
        rec.emit(interdep_pi_out, write_labeled_matrix({delta.names, perturbation_influence(delta)}));
      rec.finish(interdep_c);
    } else if (cluster_cmd->parsed()) {
      Recorder rec("cluster", args, out);
      const auto sk = load_skeleton(cluster_c, rec);
      SquareMatrix pi;
      if (!cluster_delta.empty()) {
        rec.input(cluster_delta);
        pi = perturbation_influence(align_to_schema(load_delta_csv(cluster_delta), sk.schema()));
      } else if (!cluster_pi.empty()) {
        rec.input(cluster_pi);
        pi = align_matrix(parse_labeled_matrix(read_text_file(cluster_pi)), sk.schema()).values;
      } else {
        throw CLI::RequiredError("--delta or --pi");
      }
      const auto linkage = parse_linkage(cluster_linkage);
      rec.manifest().config["g"] = std::to_string(cluster_g);
      rec.manifest().config["linkage"] = std::string(linkage_name(linkage));
      const auto s = interdependency(pi, keypoint_connectivity(sk));
      const auto grouping = cluster(s, cluster_g, linkage);
      if (!cluster_s_out.empty()) rec.emit(cluster_s_out, write_labeled_matrix({sk.schema().names(), s}));
      rec.emit(cluster_out, grouping_to_json(grouping, sk.schema()));
      rec.finish(cluster_c);
    } else if (shapley->parsed()) {
      Recorder rec("shapley", args, out);
      const auto sk = load_skeleton(shapley_c, rec);
      const auto oracle = make_oracle(shapley_o, sk, rec);
      rec.input(shapley_groups);
      const auto grouping = grouping_from_json(read_text_file(shapley_groups), sk.schema());
      GsvOptions opts;
      opts.instances = parse_instances(shapley_o.instances);
      opts.trials = shapley_trials;
      opts.seed = derive_seed(shapley_c.seed, "shapley.trials");
      opts.jobs = shapley_c.jobs;
      opts.split = parse_split_mode(shapley_split);
      rec.manifest().seeds["root"] = shapley_c.seed;
      rec.manifest().seeds["shapley.trials"] = opts.seed;
      rec.manifest().config["trials"] = std::to_string(opts.trials);
      rec.manifest().config["split"] = std::string(split_mode_name(opts.split));
      rec.manifest().config["out_of_group"] = "visible";
      CountingOracle counter(*oracle);
      const auto report = run_gsv(counter, grouping, opts);
      rec.emit(shapley_out, report_to_json(report));
      if (!shapley_csv_dir.empty())
        for (const auto& [name, csv] : report_to_csv(report))
          rec.emit((fs::path(shapley_csv_dir) / name).string(), csv);
      if (shapley_count)
        err << "oracle calls: " << counter.calls() << " (predicted " << report.budget.oracle_calls
            << "), distinct coalitions across games: " << counter.distinct_coalitions() << "\n";
      rec.finish(shapley_c);
    } else if (exact->parsed()) {
      Recorder rec("exact", args, out);
      rec.input(exact_game);
      const auto rows = parse_csv(read_text_file(exact_game));
      std::map<std::uint64_t, double> table;
      std::size_t start = !rows.empty() && !rows[0].empty() && rows[0][0] == "coalition_hex" ? 1 : 0;
      for (std::size_t r = start; r < rows.size(); ++r) {
        if (rows[r].size() != 2)
          throw Error(ErrorKind::kMalformedInput, "game rows need coalition_hex,value");
        const auto c = Coalition::parse_hex(rows[r][0], kMaxKeypoints);
        if (!table.emplace(c.bits(), parse_double(rows[r][1], "game CSV")).second)
          throw Error(ErrorKind::kMalformedInput, "duplicate game row " + c.hex());
      }
      std::size_t n = 0;
      while ((std::size_t{1} << n) < table.size()) ++n;
      if (table.empty() || (std::size_t{1} << n) != table.size() || table.rbegin()->first != full_mask(n))
        throw Error(ErrorKind::kIncompleteInput, "game must list all 2^n coalitions");
      const auto value = [&](std::uint64_t mask) { return table.at(mask); };
      const auto phi = exact_shapley(n, value);
      std::vector<double> sampled;
      const std::uint64_t sample_seed = derive_seed(exact_c.seed, "exact.sampled");
      if (exact_sampled > 0) {
        sampled = permutation_shapley(n, value, exact_sampled, sample_seed);
        rec.manifest().seeds["exact.sampled"] = sample_seed;
      }
      std::string csv = exact_sampled > 0 ? "player,phi,phi_sampled\n" : "player,phi\n";
      for (std::size_t j = 0; j < n; ++j) {
        csv += std::to_string(j) + "," + fixed_decimals(phi[j], exact_digits);
        if (exact_sampled > 0) csv += "," + fixed_decimals(sampled[j], exact_digits);
        csv += "\n";
      }
      rec.emit(exact_out, csv);
      rec.finish(exact_c);
    } else if (cost->parsed()) {
      Recorder rec("cost", args, out);
      Grouping grouping;
      if (!cost_sizes.empty()) {
        grouping = grouping_from_sizes(cost_sizes);
      } else if (!cost_grouping.empty()) {
        const auto sk = load_skeleton(cost_c, rec);
        rec.input(cost_grouping);
        grouping = grouping_from_json(read_text_file(cost_grouping), sk.schema());
      } else {
        throw CLI::RequiredError("--groups or --grouping");
      }
      const std::size_t n = cost_n == 0 ? grouping.keypoints() : cost_n;
      const auto q = query_count(grouping, n, cost_trials);
      std::string csv = "method,distinct_coalitions,oracle_calls\n";
      csv += "gsv," + std::to_string(q.gsv.distinct_coalitions) + "," + std::to_string(q.gsv.oracle_calls) + "\n";
      csv += "exact," + std::to_string(q.exact.distinct_coalitions) + "," +
             std::to_string(q.exact.oracle_calls) + "\n";
      rec.emit(cost_out, csv);
      rec.finish(cost_c);
    } else if (plan->parsed()) {
      Recorder rec("gkr plan", args, out);
      const auto sk = load_skeleton(plan_c, rec);
      rec.input(plan_annotations);
      rec.input(plan_groups);
      const auto people = parse_annotations(read_text_file(plan_annotations), sk.size());
      const auto grouping = grouping_from_json(read_text_file(plan_groups), sk.schema());
      GkrConfig cfg;
      cfg.p = plan_p;
      cfg.scales = plan_scales.empty() ? default_gkr_scales(grouping, sk.schema()) : plan_scales;
      cfg.seed = derive_seed(plan_c.seed, "gkr.plan");
      Planner planner = Planner::kGkr;
      if (plan_planner == "re") planner = Planner::kRandomErasing;
      else if (plan_planner != "gkr") throw Error(ErrorKind::kConfig, "unknown planner '" + plan_planner + "'");
      rec.manifest().seeds["root"] = plan_c.seed;
      rec.manifest().seeds["gkr.plan"] = cfg.seed;
      rec.manifest().config["p"] = format_number(cfg.p);
      rec.manifest().config["planner"] = plan_planner;
      rec.manifest().config["rounding"] = "nearest";
      std::string scales;
      for (double s : cfg.scales) scales += (scales.empty() ? "" : ",") + format_number(s);
      rec.manifest().config["scales"] = scales;
      rec.emit(plan_out, plans_to_jsonl(plan_dataset(people, grouping, cfg, planner, plan_c.jobs)));
      rec.finish(plan_c);
    } else if (apply->parsed()) {
      Recorder rec("gkr apply", args, out);
      rec.input(apply_plans);
      const auto plans = plans_from_jsonl(read_text_file(apply_plans));
      if (!apply_image.empty()) {
        if (apply_out.empty()) throw CLI::RequiredError("--out");
        rec.input(apply_image);
        Image img = read_ppm(apply_image);
        for (const auto& p : plans)
          if (!apply_image_id || p.image_id == *apply_image_id) img = apply_plan(img, p);
        rec.emit(apply_out, encode_ppm(img));
      } else if (!apply_images_dir.empty() && !apply_out_dir.empty()) {
        std::map<std::string, std::vector<const ErasePlan*>> by_file;
        for (const auto& p : plans) by_file[p.file_name].push_back(&p);
        for (const auto& [file, list] : by_file) {
          if (file.empty()) throw Error(ErrorKind::kMalformedInput, "plan has no file_name for batch mode");
          const auto src = (fs::path(apply_images_dir) / file).string();
          rec.input(src);
          Image img = read_ppm(src);
          for (const auto* p : list) img = apply_plan(img, *p);
          rec.emit((fs::path(apply_out_dir) / file).string(), encode_ppm(img));
        }
      } else {
        throw CLI::RequiredError("--image/--out or --images-dir/--out-dir");
      }
      rec.finish(apply_c);
    } else if (stats->parsed()) {
      Recorder rec("gkr stats", args, out);
      const auto sk = load_skeleton(stats_c, rec);
      rec.input(stats_annotations);
      const auto people = parse_annotations(read_text_file(stats_annotations), sk.size());
      rec.emit(stats_out, occlusion_stats_csv(occlusion_stats(people), stats_per_image));
      rec.finish(stats_c);
    } else if (corr->parsed()) {
      Recorder rec("corr", args, out);
      rec.input(corr_table);
      const auto table = parse_confidence_csv(read_text_file(corr_table));
      const auto result = confidence_correlation(table);
      for (const auto& [i, j] : result.zero_variance_pairs)
        err << "warning: zero variance for (" << table.names[i] << ", " << table.names[j]
            << "); correlation set to 0\n";
      rec.emit(corr_out, write_labeled_matrix({table.names, result.r}));
      if (!corr_svg.empty()) {
        HeatmapOptions opts;
        opts.vmin = -1.0;
        opts.vmax = 1.0;
        opts.title = "confidence correlation";
        rec.emit(corr_svg, render_heatmap(result.r, table.names, opts));
      }
      rec.finish(corr_c);
    } else if (render->parsed()) {
      Recorder rec("render", args, out);
      rec.input(render_matrix);
      const auto m = parse_labeled_matrix(read_text_file(render_matrix));
      HeatmapOptions opts;
      opts.vmin = render_vmin;
      opts.vmax = render_vmax;
      opts.title = render_title;
      opts.decimals = render_decimals;
      rec.emit(render_out, render_heatmap(m.values, m.labels, opts));
      rec.finish(render_c);
    } else if (masks->parsed()) {
      Recorder rec("masks", args, out);
      const auto seed = derive_seed(masks_c.seed, "masks");
      rec.manifest().seeds["root"] = masks_c.seed;
      rec.manifest().seeds["masks"] = seed;
      const auto list = gen_masks({masks_x, masks_y}, masks_m, masks_scale, masks_w, masks_h, seed, mask_options);
      rec.emit(masks_out, masks_to_json(list, mask_options));
      rec.finish(masks_c);
    } else if (serve->parsed()) {
      const auto sk = serve_c.schema.empty() ? default_skeleton() : load_schema_file(serve_c.schema);
      SyntheticOracle oracle(SyntheticModelConfig::from_json(read_text_file(serve_config)), sk.schema());
      serve_oracle(oracle, std::cin, out);
    } else if (replay->parsed()) {
      const auto manifest = RunManifest::from_json(read_text_file(replay_manifest));
      if (manifest.argv.empty() || manifest.argv[0] == "replay")
        throw Error(ErrorKind::kMalformedInput, "manifest has no replayable command");
      std::ostringstream sink;
      const int code = run(manifest.argv, sink, err);
      if (code != kExitOk) return code;
      int mismatches = 0;
      for (const auto& [path, digest] : manifest.outputs) {
        const auto now = digest_file(path);
        const bool same = now == digest;
        if (!same) ++mismatches;
        out << (same ? "identical " : "DIFFERS   ") << path << "\n";
      }
      if (mismatches > 0) {
        err << "keyshap: replay produced " << mismatches << " differing output(s)\n";
        return kExitData;
      }
    }
  } catch (const CLI::Error& e) {
    err << "keyshap: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "keyshap: " << e.what() << "\n";
    if (!e.payload().empty()) err << "  payload: " << e.payload() << "\n";
    return is_oracle_error(e.kind()) ? kExitOracle : kExitData;
  } catch (const std::exception& e) {
    err << "keyshap: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace keyshap::cli
