// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_EVALUATOR_HPP
#define SNP_EVALUATOR_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "snp/model.hpp"
#include "snp/prune_graph.hpp"

namespace snp {

struct CostEntry {
  std::string name;
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
};

/// Closed-form cost of one forward pass. One multiply-accumulate counts as
/// one FLOP. `auxiliary` lists softmax, LayerNorm and GELU element counts,
/// which are not part of the totals.
struct CostReport {
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
  std::vector<CostEntry> breakdown;
  std::vector<CostEntry> auxiliary;
};

CostReport count_costs(const ModelConfig& config);

nlohmann::json cost_to_json(const CostReport& report);
std::string cost_to_text(const CostReport& report);

struct SimilarityReport {
  std::vector<std::vector<double>> per_head;  // [block][head], mean over images
  double mean = 0.0;                          // over all heads and images
};

/// Mean |cosine| between post-softmax attention maps of two runs on the
/// same images. Throws DimensionError when the captures are not comparable.
SimilarityReport attention_similarity(std::span<const AttentionCapture> original,
                                      std::span<const AttentionCapture> other);
SimilarityReport attention_similarity(const AttentionCapture& original,
                                      const AttentionCapture& other);

nlohmann::json similarity_to_json(const SimilarityReport& report);

struct BenchReport {
  std::size_t warmup = 0;
  std::size_t runs = 0;
  std::size_t batch = 1;
  std::vector<double> samples_ms;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double stddev_ms = 0.0;
};

/// Times `runs` forward passes of `batch` images each, after `warmup`
/// untimed passes, on the calling thread only. Inputs are fixed random
/// images drawn from `seed`.
BenchReport bench(const ModelBundle& model, std::size_t runs = 1000, std::size_t warmup = 200,
                  std::size_t batch = 1, std::uint64_t seed = 0);

// Mean, median and sample standard deviation of the given samples.
void summarize(BenchReport& report);

nlohmann::json bench_to_json(const BenchReport& report, bool include_samples = false);

struct RatioEntry {
  GroupId id;
  std::size_t original = 0;
  std::size_t pruned = 0;
  double ratio = 0.0;
};

/// Per-group pruning ratios 1 − pruned/original. The aggregates are means
/// weighted by original width (msa covers qk and value groups).
struct RatioReport {
  std::vector<RatioEntry> groups;
  double qk = 0.0;
  double value = 0.0;
  double msa = 0.0;
  double ffn = 0.0;
  double embed = 0.0;
};

RatioReport ratio_report(const ModelConfig& original, const ModelConfig& pruned);

nlohmann::json ratio_to_json(const RatioReport& report);
std::string ratio_to_text(const RatioReport& report);

// 8-bit binary PGM with min-max normalization of a rank-2 map.
void write_pgm(const std::filesystem::path& path, const Tensor& map);
void write_csv(const std::filesystem::path& path, const Tensor& map);

}  // namespace snp

#endif  // SNP_EVALUATOR_HPP
