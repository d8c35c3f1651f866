// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_IMPORTANCE_HPP
#define SNP_IMPORTANCE_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "snp/model.hpp"
#include "snp/prune_graph.hpp"

namespace snp {

enum class Criterion { kSnp, kL2, kGm, kReverseSnp };

std::string_view to_string(Criterion c);
// Accepts "snp", "l2", "gm", "reverse". Throws ArgumentError otherwise.
Criterion criterion_from_string(std::string_view s);

struct GroupScores {
  GroupId id;
  std::vector<double> scores;  // one per filter index
};

/// Per-group filter scores. Lower scores are pruned first.
struct ImportanceTable {
  std::string fingerprint;
  Criterion criterion = Criterion::kSnp;
  std::optional<std::size_t> rank;  // r used for QK scoring; unset for weight-only criteria
  std::size_t images = 0;
  std::string reduction = "mean";
  std::vector<GroupScores> groups;

  const GroupScores* find(const GroupId& id) const;
};

/// Attention-preservation score of every QK filter pair of one head for a
/// single captured image: SVD the captured scores, then sum over the first
/// `rank` singular triplets the |cosine| between the filter's rank-1
/// contribution and σ_j·u_j·v_jᵀ.
std::vector<double> qk_importance_single(const AttentionCapture& capture, std::size_t block,
                                         std::size_t head, std::size_t rank);

// Mean of qk_importance_single over captures, reduced in the given order.
std::vector<double> qk_importance(std::span<const AttentionCapture> captures, std::size_t block,
                                  std::size_t head, std::size_t rank);

/// Inter-head redundancy of value filters in one block. Entry [h][i] sums
/// 1 − |cos| between row i of head h's value weight and every other value
/// row of the block (all heads). Biases are excluded.
std::vector<std::vector<double>> value_importance(const ModelBundle& model, std::size_t block);

// Σ_l (1 − |cos(W_i, W_l)|) over the rows of one layer; the self term is 0.
std::vector<double> layer_diversity_importance(const Tensor& w);

// Elementwise sum of per-producer score vectors, all of equal length.
std::vector<double> residual_aggregate(std::span<const std::vector<double>> producers);

// Sum of a head's value_importance scores, one per head.
std::vector<double> head_importance(const ModelBundle& model, std::size_t block);

std::vector<double> row_l2_norms(const Tensor& w);

// Residual-stream producers: patch embedding, every out-projection and every fc2.
std::vector<const Tensor*> residual_producers(const ModelBundle& model);

/// Full table under `criterion`. Calibration images are needed for snp and
/// reverse; `rank` = 0 selects the full rank N. Per-image scoring runs on up
/// to `workers` threads; the mean is always reduced in image order.
ImportanceTable compute_importance(Criterion criterion, const ModelBundle& model,
                                   std::span<const Tensor> images, std::size_t rank = 0,
                                   std::size_t workers = 1);

nlohmann::json table_to_json(const ImportanceTable& table);
ImportanceTable table_from_json(const nlohmann::json& j);

}  // namespace snp

#endif  // SNP_IMPORTANCE_HPP
