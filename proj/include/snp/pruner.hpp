// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_PRUNER_HPP
#define SNP_PRUNER_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "snp/importance.hpp"
#include "snp/model.hpp"
#include "snp/prune_graph.hpp"

namespace snp {

struct BlockRatios {
  double qk = 0.0;
  double v = 0.0;
  double ffn = 0.0;
};

/// Fractions of filters to drop per group kind, each in [0, 1).
struct RatioSpec {
  double qk = 0.0;
  double v = 0.0;
  double ffn = 0.0;
  double embed = 0.0;
  std::map<std::size_t, BlockRatios> overrides;  // per block, replaces qk/v/ffn
  std::optional<double> heads;                   // fraction of heads removed per block

  BlockRatios for_block(std::size_t block) const;
};

// floor(ratio·width), capped so at least one filter survives. Throws
// ArgumentError unless 0 <= ratio < 1.
std::size_t drop_count(double ratio, std::size_t width);

/// Indices kept after dropping the `drop` lowest scores. Among equal scores
/// the higher index goes first, so the lower index survives.
std::vector<std::size_t> select_keep(std::span<const double> scores, std::size_t drop);

using HeadKeep = std::vector<std::vector<std::size_t>>;

/// Plan over `groups` from table scores. With `head_keep`, `groups` describe
/// the head-reduced topology and head h of block b reads the table scores of
/// source head head_keep[b][h].
PrunePlan make_plan(const ImportanceTable& table, const RatioSpec& ratios,
                    std::span<const PruneGroup> groups,
                    const std::optional<HeadKeep>& head_keep = std::nullopt);

// Surviving heads per block: drop floor(ratio·H) lowest head scores.
HeadKeep select_heads(std::span<const std::vector<double>> head_scores, double ratio);

// Deletes every head not listed (q/k/v tensors and the matching out-proj columns).
ModelBundle remove_heads(const ModelBundle& model, const HeadKeep& head_keep);

ModelBundle head_prune(const ModelBundle& model, std::span<const std::vector<double>> head_scores,
                       double ratio);

/// Physically slices every group member by its keep-set and shrinks the
/// config. attn_scale is left as is. Throws InvalidPlanError or
/// StalePlanError when the plan does not apply.
ModelBundle apply_plan(const ModelBundle& model, const PrunePlan& plan);

/// Same semantics as apply_plan at the original shapes: dropped filters are
/// zeroed (weights and biases), removed heads get zero value weights, and
/// dropped residual channels leave the LayerNorm active set.
ModelBundle apply_mask(const ModelBundle& model, const PrunePlan& plan);

/// `second` is a plan for apply_plan(model, first); the result applies both
/// to the original model in one step.
PrunePlan compose_plans(const PrunePlan& first, const PrunePlan& second);

}  // namespace snp

#endif  // SNP_PRUNER_HPP
