// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "snp/errors.hpp"
#include "snp/evaluator.hpp"
#include "snp/importance.hpp"
#include "snp/model_io.hpp"
#include "snp/parallel.hpp"
#include "snp/pruner.hpp"
#include "snp/synth.hpp"

namespace snp::cli {

using nlohmann::json;

namespace {

struct Options {
  std::string manifest;

  // synth / calib
  std::string preset = "tiny-desk";
  std::uint64_t seed = 0;
  float std = 0.02f;
  std::size_t count = kDefaultCalibImages;

  // shared paths
  std::string model;
  std::string calib;
  std::string out;

  // analyze
  std::string criterion = "snp";
  std::size_t rank = 0;
  std::size_t images = kDefaultCalibImages;

  // prune
  std::string importance;
  std::string plan_out;
  double qk = 0.0, v = 0.0, ffn = 0.0, embed = 0.0;
  std::optional<double> heads;
  std::vector<std::string> block_overrides;

  // validate
  std::string original;
  std::string pruned;
  std::string plan;
  double tolerance = 1e-4;

  // bench
  std::size_t runs = 1000;
  std::size_t warmup = 200;
  std::size_t batch = 1;
  bool samples = false;

  // flops
  bool text = false;

  // attmap
  std::size_t index = 0;
};

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

json load_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

/// Records how an output was produced. `args` is the command line, so a
/// manifest can be replayed.
void emit_manifest(const Options& o, const std::string& default_path, const std::string& command,
                   const std::vector<std::string>& args, json inputs, json params,
                   const std::string& fp, json outputs) {
  std::string path = o.manifest;
  if (path.empty()) path = default_path.empty() ? "" : default_path + ".manifest.json";
  if (path.empty()) return;
  json m = {{"command", command},          {"tool_version", SNP_VERSION},
            {"inputs", std::move(inputs)}, {"parameters", std::move(params)},
            {"fingerprint", fp},           {"outputs", std::move(outputs)},
            {"args", args}};
  write_json(path, m);
}

void check_images(const CalibrationSet& set, const ModelConfig& c) {
  if (set.channels != c.in_channels || set.height != c.image_size || set.width != c.image_size) {
    throw ArgumentError("calibration images are " + std::to_string(set.channels) + "x" +
                        std::to_string(set.height) + "x" + std::to_string(set.width) +
                        ", model expects " + std::to_string(c.in_channels) + "x" +
                        std::to_string(c.image_size) + "x" + std::to_string(c.image_size));
  }
}

std::map<std::size_t, BlockRatios> parse_overrides(const std::vector<std::string>& specs) {
  std::map<std::size_t, BlockRatios> out;
  for (const auto& s : specs) {
    // BLOCK=QK,V,FFN
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ArgumentError("block override '" + s + "' is not BLOCK=QK,V,FFN");
    BlockRatios r;
    char c1 = 0, c2 = 0;
    std::istringstream is(s.substr(eq + 1));
    std::size_t block = 0;
    try {
      block = std::stoul(s.substr(0, eq));
    } catch (const std::exception&) {
      throw ArgumentError("block override '" + s + "' has a bad block index");
    }
    if (!(is >> r.qk >> c1 >> r.v >> c2 >> r.ffn) || c1 != ',' || c2 != ',' || !is.eof()) {
      throw ArgumentError("block override '" + s + "' is not BLOCK=QK,V,FFN");
    }
    out[block] = r;
  }
  return out;
}

int cmd_synth(const Options& o, const std::vector<std::string>& args) {
  const ModelBundle m = synth_model(preset_config(o.preset), o.seed, o.std);
  save_model(m, o.out);
  const std::string fp = fingerprint(m);
  const CostReport cost = count_costs(m.config);
  print({{"model", o.out}, {"preset", o.preset}, {"seed", o.seed}, {"fingerprint", fp},
         {"params", cost.params}, {"flops", cost.flops}});
  emit_manifest(o, o.out, "synth", args, json::object(),
                {{"preset", o.preset}, {"seed", o.seed}, {"std", o.std}}, fp, {{"model", o.out}});
  return kExitOk;
}

int cmd_calib(const Options& o, const std::vector<std::string>& args) {
  const ModelConfig c = o.model.empty() ? preset_config(o.preset) : load_model(o.model).config;
  const CalibrationSet set = synth_calibration(c, o.count, o.seed);
  save_calibration(set, o.out);
  print({{"calib", o.out}, {"images", set.images.size()}, {"channels", set.channels},
         {"height", set.height}, {"width", set.width}});
  json inputs = o.model.empty() ? json::object() : json{{"model", o.model}};
  emit_manifest(o, o.out, "calib", args, inputs,
                {{"preset", o.model.empty() ? json(o.preset) : json(nullptr)}, {"count", o.count}, {"seed", o.seed}},
                "", {{"calib", o.out}});
  return kExitOk;
}

int cmd_analyze(const Options& o, const std::vector<std::string>& args) {
  const Criterion criterion = criterion_from_string(o.criterion);
  const ModelBundle m = load_model(o.model);
  std::vector<Tensor> images;
  const bool needs_images = criterion == Criterion::kSnp || criterion == Criterion::kReverseSnp;
  if (needs_images) {
    if (o.calib.empty()) throw ArgumentError("--calib is required for criterion " + o.criterion);
    if (o.images == 0) throw ArgumentError("--images must be at least 1");
    CalibrationSet set = load_calibration(o.calib);
    check_images(set, m.config);
    if (set.images.size() < o.images) {
      throw ArgumentError("calibration set has " + std::to_string(set.images.size()) +
                          " images, --images asks for " + std::to_string(o.images));
    }
    set.images.resize(o.images);
    images = std::move(set.images);
  }
  const ImportanceTable table = compute_importance(criterion, m, images, o.rank, worker_count());
  const json j = table_to_json(table);
  if (o.out.empty()) {
    print(j);
  } else {
    write_json(o.out, j);
    print({{"importance", o.out}, {"criterion", o.criterion}, {"fingerprint", table.fingerprint},
           {"r", j["r"]}, {"images", table.images}, {"groups", table.groups.size()}});
  }
  json inputs = {{"model", o.model}};
  if (needs_images) inputs["calib"] = o.calib;
  emit_manifest(o, o.out, "analyze", args, inputs,
                {{"criterion", o.criterion}, {"r", j["r"]}, {"images", table.images}},
                table.fingerprint, {{"importance", o.out}});
  return kExitOk;
}

int cmd_prune(const Options& o, const std::vector<std::string>& args) {
  const ModelBundle m = load_model(o.model);
  const std::string fp = fingerprint(m);
  const ImportanceTable table = table_from_json(load_json(o.importance));
  if (table.fingerprint != fp) {
    throw StalePlanError("importance table fingerprint " + table.fingerprint +
                         " does not match model " + fp);
  }
  RatioSpec ratios{o.qk, o.v, o.ffn, o.embed, parse_overrides(o.block_overrides), o.heads};
  for (const auto& [b, r] : ratios.overrides) {
    if (b >= m.config.depth()) throw ArgumentError("block override for missing block " + std::to_string(b));
  }

  std::optional<HeadKeep> head_keep;
  ModelConfig topo = m.config;
  if (ratios.heads) {
    std::vector<std::vector<double>> scores;
    for (std::size_t b = 0; b < m.config.depth(); ++b) scores.push_back(head_importance(m, b));
    head_keep = select_heads(scores, *ratios.heads);
    for (std::size_t b = 0; b < topo.depth(); ++b) topo.blocks[b].heads = (*head_keep)[b].size();
  }
  const auto groups = build_groups(topo);
  const PrunePlan plan = make_plan(table, ratios, groups, head_keep);
  const ModelBundle pruned = apply_plan(m, plan);
  save_model(pruned, o.out);
  if (!o.plan_out.empty()) write_json(o.plan_out, plan_to_json(plan));

  const CostReport before = count_costs(m.config), after = count_costs(pruned.config);
  json report = {{"model", o.out},
                 {"plan", o.plan_out.empty() ? json(nullptr) : json(o.plan_out)},
                 {"fingerprint", fingerprint(pruned)},
                 {"flops", {{"original", before.flops}, {"pruned", after.flops}}},
                 {"params", {{"original", before.params}, {"pruned", after.params}}},
                 {"ratios", ratio_to_json(ratio_report(topo, pruned.config))}};
  if (head_keep) report["head_keep"] = *head_keep;
  print(report);

  json overrides = json::object();
  for (const auto& [b, r] : ratios.overrides) overrides[std::to_string(b)] = {r.qk, r.v, r.ffn};
  emit_manifest(o, o.out, "prune", args, {{"model", o.model}, {"importance", o.importance}},
                {{"criterion", to_string(table.criterion)},
                 {"r", table.rank ? json(*table.rank) : json(nullptr)},
                 {"images", table.images},
                 {"qk", o.qk}, {"v", o.v}, {"ffn", o.ffn}, {"embed", o.embed},
                 {"heads", o.heads ? json(*o.heads) : json(nullptr)},
                 {"block_overrides", overrides}},
                fp, {{"model", o.out}, {"plan", o.plan_out}});
  return kExitOk;
}

int cmd_validate(const Options& o, const std::vector<std::string>& args) {
  const ModelBundle original = load_model(o.original);
  const ModelBundle pruned = load_model(o.pruned);
  const PrunePlan plan = plan_from_json(load_json(o.plan));
  const std::string fp = fingerprint(original);

  const auto violations = validate_plan(plan, original);
  json report = {{"original", o.original}, {"pruned", o.pruned}, {"plan", o.plan}};
  json problems = json::array();
  for (const auto& v : violations) problems.push_back(v.message);
  bool pass = violations.empty();

  if (pass) {
    const ModelBundle expected = apply_plan(original, plan);
    bool shapes_ok = expected.config == pruned.config && expected.tensors.size() == pruned.tensors.size();
    bool weights_ok = shapes_ok;
    if (shapes_ok) {
      for (const auto& [name, t] : expected.tensors) {
        auto it = pruned.tensors.find(name);
        if (it == pruned.tensors.end() || it->second.shape() != t.shape()) {
          shapes_ok = weights_ok = false;
          break;
        }
        weights_ok = weights_ok && it->second.bit_equal(t);
      }
    }
    report["shapes_match"] = shapes_ok;
    report["weights_match"] = weights_ok;
    if (!shapes_ok) problems.push_back("pruned model shapes differ from the plan applied to the original");
    if (shapes_ok && !weights_ok) problems.push_back("pruned model weights differ from the plan applied to the original");

    CalibrationSet set = load_calibration(o.calib);
    check_images(set, original.config);
    if (o.images > 0 && set.images.size() > o.images) set.images.resize(o.images);
    const ModelBundle masked = apply_mask(original, plan);
    double max_diff = 0.0;
    std::vector<AttentionCapture> orig_caps, mask_caps;
    for (const auto& img : set.images) {
      auto r_orig = forward(original, img, {.capture = true});
      auto r_mask = forward(masked, img, {.capture = true});
      if (shapes_ok) max_diff = std::max(max_diff, max_abs_diff(forward(pruned, img).logits, r_mask.logits));
      orig_caps.push_back(std::move(*r_orig.capture));
      mask_caps.push_back(std::move(*r_mask.capture));
    }
    const SimilarityReport sim = attention_similarity(orig_caps, mask_caps);
    report["images"] = set.images.size();
    report["max_logit_diff"] = max_diff;
    report["tolerance"] = o.tolerance;
    report["attention_similarity"] = sim.mean;
    if (max_diff > o.tolerance) problems.push_back("pruned and masked logits differ beyond tolerance");
    pass = pass && shapes_ok && weights_ok && max_diff <= o.tolerance;
  }
  pass = pass && problems.empty();
  report["pass"] = pass;
  report["problems"] = problems;
  print(report);
  if (!pass) std::cerr << "validation failed\n";
  emit_manifest(o, "", "validate", args,
                {{"original", o.original}, {"pruned", o.pruned}, {"plan", o.plan}, {"calib", o.calib}},
                {{"tolerance", o.tolerance}, {"images", o.images}}, fp, json::object());
  return pass ? kExitOk : kExitValidation;
}

int cmd_flops(const Options& o, const std::vector<std::string>& args) {
  const ModelBundle m = load_model(o.model);
  const CostReport cost = count_costs(m.config);
  if (o.text) {
    std::cout << cost_to_text(cost);
  } else {
    print(cost_to_json(cost));
  }
  emit_manifest(o, "", "flops", args, {{"model", o.model}}, json::object(), fingerprint(m), json::object());
  return kExitOk;
}

int cmd_bench(const Options& o, const std::vector<std::string>& args) {
  const ModelBundle m = load_model(o.model);
  const BenchReport r = bench(m, o.runs, o.warmup, o.batch, o.seed);
  json j = bench_to_json(r, o.samples);
  j["model"] = o.model;
  print(j);
  emit_manifest(o, "", "bench", args, {{"model", o.model}},
                {{"runs", o.runs}, {"warmup", o.warmup}, {"batch", o.batch}, {"seed", o.seed}},
                fingerprint(m), json::object());
  return kExitOk;
}

int cmd_attmap(const Options& o, const std::vector<std::string>& args) {
  const ModelBundle m = load_model(o.model);
  const CalibrationSet set = load_calibration(o.calib);
  check_images(set, m.config);
  if (o.index >= set.images.size()) {
    throw ArgumentError("--index " + std::to_string(o.index) + " but calibration set has " +
                        std::to_string(set.images.size()) + " images");
  }
  const auto result = forward(m, set.images[o.index], {.capture = true});
  const Tensor rollout = attention_rollout(*result.capture);
  // Class-token row over the patch grid.
  const std::size_t g = m.config.grid();
  Tensor cls({g, g});
  for (std::size_t p = 0; p < g * g; ++p) cls[p] = rollout(0, p + 1);

  const std::string full_pgm = o.out + ".pgm", full_csv = o.out + ".csv";
  const std::string cls_pgm = o.out + ".cls.pgm", cls_csv = o.out + ".cls.csv";
  write_pgm(full_pgm, rollout);
  write_csv(full_csv, rollout);
  write_pgm(cls_pgm, cls);
  write_csv(cls_csv, cls);
  const json outputs = {{"rollout_pgm", full_pgm}, {"rollout_csv", full_csv},
                        {"cls_pgm", cls_pgm}, {"cls_csv", cls_csv}};
  print({{"index", o.index}, {"tokens", rollout.rows()}, {"outputs", outputs}});
  emit_manifest(o, o.out, "attmap", args, {{"model", o.model}, {"calib", o.calib}},
                {{"index", o.index}}, fingerprint(m), outputs);
  return kExitOk;
}

int cmd_replay(const std::string& manifest) {
  const json m = load_json(manifest);
  std::vector<std::string> args;
  try {
    args = m.at("args").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(manifest + ": " + e.what());
  }
  if (args.empty() || args.front() == "replay") throw FormatError(manifest + ": nothing to replay");
  return run(args);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Structured neuron-level pruning for vision transformers", "snp"};
  app.set_version_flag("--version", std::string(SNP_VERSION));
  app.require_subcommand(1);
  Options o;
  std::string replay_manifest;

  auto ratio = [](CLI::Option* opt) { return opt->check(CLI::Range(0.0, 0.999999999)); };
  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "Where to write the run manifest");
  };

  auto* synth = app.add_subcommand("synth", "Generate a random-weight model from a preset");
  synth->add_option("--preset", o.preset, "tiny-desk, deit-tiny, deit-small or deit-base")->required();
  synth->add_option("--seed", o.seed, "Generator seed");
  synth->add_option("--std", o.std, "Weight standard deviation");
  synth->add_option("--out", o.out, "Output .snpm")->required();
  add_manifest(synth);

  auto* calib = app.add_subcommand("calib", "Generate a random calibration set");
  auto* calib_model = calib->add_option("--model", o.model, "Model whose input shape to use");
  calib->add_option("--preset", o.preset, "Preset whose input shape to use")->excludes(calib_model);
  calib->add_option("--count", o.count, "Number of images")->check(CLI::PositiveNumber);
  calib->add_option("--seed", o.seed, "Generator seed");
  calib->add_option("--out", o.out, "Output .snpc")->required();
  add_manifest(calib);

  auto* analyze = app.add_subcommand("analyze", "Score every prunable filter");
  analyze->add_option("--model", o.model)->required();
  analyze->add_option("--calib", o.calib);
  analyze->add_option("--criterion", o.criterion, "snp, l2, gm or reverse");
  analyze->add_option("--rank", o.rank, "Singular triplets per head (0 = all tokens)");
  analyze->add_option("--images", o.images, "Calibration images to use");
  analyze->add_option("--out", o.out, "Importance table JSON (stdout if omitted)");
  add_manifest(analyze);

  auto* prune = app.add_subcommand("prune", "Build a plan and slice the model");
  prune->add_option("--model", o.model)->required();
  prune->add_option("--importance", o.importance)->required();
  ratio(prune->add_option("--qk", o.qk, "QK pair drop ratio"));
  ratio(prune->add_option("--v", o.v, "Value filter drop ratio"));
  ratio(prune->add_option("--ffn", o.ffn, "FFN hidden drop ratio"));
  ratio(prune->add_option("--embed", o.embed, "Residual channel drop ratio"));
  ratio(prune->add_option("--heads", o.heads, "Fraction of heads removed per block"));
  prune->add_option("--block", o.block_overrides, "Per-block ratios BLOCK=QK,V,FFN");
  prune->add_option("--plan", o.plan_out, "Write the plan JSON here");
  prune->add_option("--out", o.out, "Pruned .snpm")->required();
  add_manifest(prune);

  auto* validate = app.add_subcommand("validate", "Check a pruned model against its masked twin");
  validate->add_option("--original", o.original)->required();
  validate->add_option("--pruned", o.pruned)->required();
  validate->add_option("--plan", o.plan)->required();
  validate->add_option("--calib", o.calib)->required();
  o.images = 0;
  validate->add_option("--images", o.images, "Images to compare (0 = all)");
  validate->add_option("--tol", o.tolerance, "Max elementwise logit difference");
  add_manifest(validate);

  auto* flops = app.add_subcommand("flops", "Closed-form FLOPs and parameter count");
  flops->add_option("--model", o.model)->required();
  flops->add_flag("--text", o.text, "Aligned plain-text table instead of JSON");
  add_manifest(flops);

  auto* benchc = app.add_subcommand("bench", "Single-threaded latency benchmark");
  benchc->add_option("--model", o.model)->required();
  benchc->add_option("--runs", o.runs)->check(CLI::PositiveNumber);
  benchc->add_option("--warmup", o.warmup);
  benchc->add_option("--batch", o.batch)->check(CLI::PositiveNumber);
  benchc->add_option("--seed", o.seed);
  benchc->add_flag("--samples", o.samples, "Include every run time");
  add_manifest(benchc);

  auto* attmap = app.add_subcommand("attmap", "Attention rollout map of one image");
  attmap->add_option("--model", o.model)->required();
  attmap->add_option("--calib", o.calib)->required();
  attmap->add_option("--index", o.index);
  attmap->add_option("--out", o.out, "Output prefix")->required();
  add_manifest(attmap);

  auto* replay = app.add_subcommand("replay", "Rerun a command from its manifest");
  replay->add_option("manifest", replay_manifest)->required();

  try {
    // CLI11 consumes a reversed argument vector.
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitArgument;
  }
  // analyze keeps the calibration default of 64 images.
  if (analyze->parsed() && analyze->count("--images") == 0) o.images = kDefaultCalibImages;

  if (synth->parsed()) return cmd_synth(o, args);
  if (calib->parsed()) return cmd_calib(o, args);
  if (analyze->parsed()) return cmd_analyze(o, args);
  if (prune->parsed()) return cmd_prune(o, args);
  if (validate->parsed()) return cmd_validate(o, args);
  if (flops->parsed()) return cmd_flops(o, args);
  if (benchc->parsed()) return cmd_bench(o, args);
  if (attmap->parsed()) return cmd_attmap(o, args);
  if (replay->parsed()) return cmd_replay(replay_manifest);
  return kExitArgument;
}

}  // namespace snp::cli
