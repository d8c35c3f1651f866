// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "snp/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "snp/errors.hpp"
#include "snp/linalg.hpp"
#include "snp/synth.hpp"

namespace snp {

using nlohmann::json;

namespace {

std::string block_prefix(std::size_t b) { return "blocks." + std::to_string(b) + "."; }

// Breakdown entry a tensor's parameters belong to.
std::string owner_of(const std::string& tensor) {
  if (tensor.rfind("blocks.", 0) == 0) {
    const auto dot = tensor.find('.', 7);
    const std::string prefix = tensor.substr(0, dot + 1);
    const std::string rest = tensor.substr(dot + 1);
    if (rest.rfind("ln1.", 0) == 0 || rest.rfind("attn.", 0) == 0) return prefix + "attn";
    return prefix + "mlp";
  }
  if (tensor.rfind("norm.", 0) == 0 || tensor.rfind("head.", 0) == 0) return "head";
  return "patch_embed";
}

}  // namespace

CostReport count_costs(const ModelConfig& c) {
  validate_config(c);
  using U = std::uint64_t;
  const U n = c.num_tokens(), d = c.embed_dim;
  CostReport r;
  r.breakdown.push_back({"patch_embed", U{c.num_patches()} * c.patch_dim() * d, 0});
  for (std::size_t b = 0; b < c.depth(); ++b) {
    const BlockConfig& bc = c.blocks[b];
    U attn = 0;
    for (std::size_t h = 0; h < bc.heads; ++h) {
      attn += n * d * (2 * bc.qk_dim + bc.v_dim) + n * n * (bc.qk_dim + bc.v_dim);
    }
    attn += n * bc.heads * bc.v_dim * d;
    r.breakdown.push_back({block_prefix(b) + "attn", attn, 0});
    r.breakdown.push_back({block_prefix(b) + "mlp", 2 * n * d * bc.ffn_hidden, 0});
    r.auxiliary.push_back({block_prefix(b) + "softmax", n * n * bc.heads, 0});
    r.auxiliary.push_back({block_prefix(b) + "layernorm", 2 * n * d, 0});
    r.auxiliary.push_back({block_prefix(b) + "gelu", n * bc.ffn_hidden, 0});
  }
  r.breakdown.push_back({"head", d * c.num_classes, 0});
  r.auxiliary.push_back({"norm.layernorm", n * d, 0});

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < r.breakdown.size(); ++i) index[r.breakdown[i].name] = i;
  for (const auto& [name, shape] : expected_shapes(c)) {
    r.breakdown[index.at(owner_of(name))].params += shape_numel(shape);
  }
  for (const auto& e : r.breakdown) {
    r.flops += e.flops;
    r.params += e.params;
  }
  return r;
}

json cost_to_json(const CostReport& r) {
  auto entries = [](const std::vector<CostEntry>& v) {
    json a = json::array();
    for (const auto& e : v) a.push_back({{"name", e.name}, {"flops", e.flops}, {"params", e.params}});
    return a;
  };
  return {{"flops", r.flops},
          {"gflops", static_cast<double>(r.flops) / 1e9},
          {"params", r.params},
          {"mparams", static_cast<double>(r.params) / 1e6},
          {"breakdown", entries(r.breakdown)},
          {"auxiliary", entries(r.auxiliary)}};
}

std::string cost_to_text(const CostReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %16s %14s\n", "layer", "flops", "params");
  os << line;
  for (const auto& e : r.breakdown) {
    std::snprintf(line, sizeof line, "%-24s %16llu %14llu\n", e.name.c_str(),
                  static_cast<unsigned long long>(e.flops), static_cast<unsigned long long>(e.params));
    os << line;
  }
  std::snprintf(line, sizeof line, "%-24s %16llu %14llu\n", "total",
                static_cast<unsigned long long>(r.flops), static_cast<unsigned long long>(r.params));
  os << line;
  std::snprintf(line, sizeof line, "%-24s %16.3f %14.3f\n", "total (G / M)",
                static_cast<double>(r.flops) / 1e9, static_cast<double>(r.params) / 1e6);
  os << line;
  return os.str();
}

SimilarityReport attention_similarity(std::span<const AttentionCapture> original,
                                      std::span<const AttentionCapture> other) {
  if (original.size() != other.size() || original.empty()) {
    throw DimensionError("attention_similarity needs equal, non-empty capture lists");
  }
  SimilarityReport rep;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const auto& a = original[i];
    const auto& b = other[i];
    if (a.tokens != b.tokens || a.depth() != b.depth()) {
      throw DimensionError("attention captures differ in token count or depth");
    }
    if (i == 0) rep.per_head.resize(a.depth());
    for (std::size_t blk = 0; blk < a.depth(); ++blk) {
      if (a.heads[blk].size() != b.heads[blk].size()) {
        throw DimensionError("attention captures differ in head count at block " + std::to_string(blk));
      }
      if (i == 0) rep.per_head[blk].assign(a.heads[blk].size(), 0.0);
      if (rep.per_head[blk].size() != a.heads[blk].size()) {
        throw DimensionError("attention captures differ in head count across images");
      }
      for (std::size_t h = 0; h < a.heads[blk].size(); ++h) {
        const double c = std::abs(cosine_flat(a.heads[blk][h].probs, b.heads[blk][h].probs));
        rep.per_head[blk][h] += c;
        total += c;
        ++count;
      }
    }
  }
  for (auto& row : rep.per_head) {
    for (double& v : row) v /= static_cast<double>(original.size());
  }
  rep.mean = total / static_cast<double>(count);
  return rep;
}

SimilarityReport attention_similarity(const AttentionCapture& original, const AttentionCapture& other) {
  return attention_similarity(std::span<const AttentionCapture>(&original, 1),
                              std::span<const AttentionCapture>(&other, 1));
}

json similarity_to_json(const SimilarityReport& r) {
  return {{"mean", r.mean}, {"per_head", r.per_head}};
}

void summarize(BenchReport& r) {
  const auto& s = r.samples_ms;
  r.runs = s.size();
  if (s.empty()) return;
  double sum = 0.0;
  for (double v : s) sum += v;
  r.mean_ms = sum / static_cast<double>(s.size());
  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size() / 2;
  r.median_ms = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  double ss = 0.0;
  for (double v : s) ss += (v - r.mean_ms) * (v - r.mean_ms);
  r.stddev_ms = s.size() > 1 ? std::sqrt(ss / static_cast<double>(s.size() - 1)) : 0.0;
}

BenchReport bench(const ModelBundle& model, std::size_t runs, std::size_t warmup, std::size_t batch,
                  std::uint64_t seed) {
  if (runs < 1) throw ArgumentError("bench needs at least one measured run");
  if (batch < 1) throw ArgumentError("bench batch must be at least 1");
  const auto inputs = synth_calibration(model.config, batch, seed).images;
  float sink = 0.0f;
  auto pass = [&] {
    for (const auto& img : inputs) sink += forward(model, img).logits[0];
  };
  for (std::size_t i = 0; i < warmup; ++i) pass();
  BenchReport r;
  r.warmup = warmup;
  r.batch = batch;
  r.samples_ms.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    pass();
    const auto t1 = std::chrono::steady_clock::now();
    r.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  volatile float keep = sink;
  (void)keep;
  summarize(r);
  return r;
}

json bench_to_json(const BenchReport& r, bool include_samples) {
  json j = {{"warmup", r.warmup},       {"runs", r.runs},         {"batch", r.batch},
            {"mean_ms", r.mean_ms},     {"median_ms", r.median_ms}, {"stddev_ms", r.stddev_ms}};
  if (include_samples) j["samples_ms"] = r.samples_ms;
  return j;
}

RatioReport ratio_report(const ModelConfig& original, const ModelConfig& pruned) {
  if (original.depth() != pruned.depth()) {
    throw DimensionError("ratio_report: depth " + std::to_string(original.depth()) + " vs " +
                         std::to_string(pruned.depth()));
  }
  for (std::size_t b = 0; b < original.depth(); ++b) {
    if (original.blocks[b].heads != pruned.blocks[b].heads) {
      throw DimensionError("ratio_report: head count differs at block " + std::to_string(b));
    }
  }
  const auto og = build_groups(original);
  const auto pg = build_groups(pruned);
  RatioReport rep;
  struct Acc {
    double removed = 0.0, total = 0.0;
    double value() const { return total > 0.0 ? removed / total : 0.0; }
  } qk, val, ffn, embed;
  for (std::size_t i = 0; i < og.size(); ++i) {
    RatioEntry e{og[i].id, og[i].width, pg[i].width, 0.0};
    if (e.pruned > e.original) throw DimensionError("ratio_report: " + describe(e.id) + " grew");
    e.ratio = 1.0 - static_cast<double>(e.pruned) / static_cast<double>(e.original);
    Acc* acc = &embed;
    switch (e.id.kind) {
      case GroupKind::kQkPair: acc = &qk; break;
      case GroupKind::kValue: acc = &val; break;
      case GroupKind::kFfnHidden: acc = &ffn; break;
      case GroupKind::kEmbedResidual: break;
    }
    acc->removed += static_cast<double>(e.original - e.pruned);
    acc->total += static_cast<double>(e.original);
    rep.groups.push_back(e);
  }
  rep.qk = qk.value();
  rep.value = val.value();
  rep.msa = Acc{qk.removed + val.removed, qk.total + val.total}.value();
  rep.ffn = ffn.value();
  rep.embed = embed.value();
  return rep;
}

json ratio_to_json(const RatioReport& r) {
  json groups = json::array();
  for (const auto& e : r.groups) {
    json g = group_id_to_json(e.id);
    g["original"] = e.original;
    g["pruned"] = e.pruned;
    g["ratio"] = e.ratio;
    groups.push_back(std::move(g));
  }
  return {{"groups", groups},
          {"aggregates", {{"qk", r.qk}, {"value", r.value}, {"msa", r.msa}, {"ffn", r.ffn}, {"embed", r.embed}}}};
}

std::string ratio_to_text(const RatioReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-32s %9s %9s %8s\n", "group", "original", "pruned", "ratio");
  os << line;
  for (const auto& e : r.groups) {
    std::snprintf(line, sizeof line, "%-32s %9zu %9zu %8.4f\n", describe(e.id).c_str(), e.original,
                  e.pruned, e.ratio);
    os << line;
  }
  for (const auto& [name, v] : {std::pair{"qk", r.qk}, {"value", r.value}, {"msa", r.msa},
                                {"ffn", r.ffn}, {"embed", r.embed}}) {
    std::snprintf(line, sizeof line, "%-32s %9s %9s %8.4f\n", name, "", "", v);
    os << line;
  }
  return os.str();
}

void write_pgm(const std::filesystem::path& path, const Tensor& map) {
  if (map.rank() != 2) throw DimensionError("write_pgm expects a rank-2 map");
  const auto [lo, hi] = std::minmax_element(map.data().begin(), map.data().end());
  const double range = static_cast<double>(*hi) - *lo;
  std::string bytes = "P5\n" + std::to_string(map.cols()) + " " + std::to_string(map.rows()) + "\n255\n";
  for (float v : map.data()) {
    const double t = range > 0.0 ? (v - *lo) / range : 0.0;
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_csv(const std::filesystem::path& path, const Tensor& map) {
  if (map.rank() != 2) throw DimensionError("write_csv expects a rank-2 map");
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  char buf[32];
  for (std::size_t r = 0; r < map.rows(); ++r) {
    for (std::size_t c = 0; c < map.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(map(r, c)));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace snp
