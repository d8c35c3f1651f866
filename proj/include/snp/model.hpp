// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_MODEL_HPP
#define SNP_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "snp/tensor.hpp"

namespace snp {

/// Per-block attention and FFN widths. All heads of a block share the same
/// query/key width and the same value width.
struct BlockConfig {
  std::size_t heads = 0;
  std::size_t qk_dim = 0;
  std::size_t v_dim = 0;
  std::size_t ffn_hidden = 0;
  // Frozen at 1/sqrt(original qk_dim); pruning never recomputes it.
  float attn_scale = 0.0f;

  bool operator==(const BlockConfig&) const = default;
};

struct ModelConfig {
  std::size_t image_size = 0;
  std::size_t patch_size = 0;
  std::size_t in_channels = 0;
  std::size_t embed_dim = 0;
  std::size_t num_classes = 0;
  std::vector<BlockConfig> blocks;
  // Residual channels that stay live in a mask-simulated model. Every
  // LayerNorm normalizes over these only. Unset means all channels.
  std::optional<std::vector<std::size_t>> active_channels;

  std::size_t depth() const { return blocks.size(); }
  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t num_tokens() const { return num_patches() + 1; }
  std::size_t patch_dim() const { return patch_size * patch_size * in_channels; }

  bool operator==(const ModelConfig&) const = default;
};

/// Uniform ViT config: every block gets the same head count and widths, and
/// attn_scale = 1/sqrt(head_dim).
ModelConfig make_config(std::size_t image_size, std::size_t patch_size, std::size_t in_channels,
                        std::size_t embed_dim, std::size_t depth, std::size_t heads,
                        std::size_t head_dim, std::size_t ffn_hidden, std::size_t num_classes);

// Throws ShapeError on any structural inconsistency.
void validate_config(const ModelConfig& config);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

namespace names {
std::string patch_weight();
std::string patch_bias();
std::string cls_token();
std::string pos_embed();
std::string ln1_weight(std::size_t b);
std::string ln1_bias(std::size_t b);
std::string q_weight(std::size_t b, std::size_t h);
std::string q_bias(std::size_t b, std::size_t h);
std::string k_weight(std::size_t b, std::size_t h);
std::string k_bias(std::size_t b, std::size_t h);
std::string v_weight(std::size_t b, std::size_t h);
std::string v_bias(std::size_t b, std::size_t h);
std::string proj_weight(std::size_t b);
std::string proj_bias(std::size_t b);
std::string ln2_weight(std::size_t b);
std::string ln2_bias(std::size_t b);
std::string fc1_weight(std::size_t b);
std::string fc1_bias(std::size_t b);
std::string fc2_weight(std::size_t b);
std::string fc2_bias(std::size_t b);
std::string norm_weight();
std::string norm_bias();
std::string head_weight();
std::string head_bias();
}  // namespace names

// Every tensor the config implies, with its shape. Weights are [out×in].
std::map<std::string, Shape> expected_shapes(const ModelConfig& config);

struct ModelBundle {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t param_count() const;
};

// Checks the config and that the tensor set matches expected_shapes exactly.
void validate_bundle(const ModelBundle& model);

/// Hex FNV-1a-64 digest of the canonical header (config plus tensor
/// index of names and shapes). Weights do not enter the digest.
std::string fingerprint(const ModelBundle& model);

struct HeadCapture {
  Tensor query;   // [N×qk_dim], bias included
  Tensor key;     // [N×qk_dim]
  Tensor scores;  // pre-softmax, attn_scale·Q·Kᵀ
  Tensor probs;   // softmax(scores)
};

/// Per-(block, head) attention captured during one forward pass.
struct AttentionCapture {
  std::size_t tokens = 0;
  std::vector<float> scales;                    // per block
  std::vector<std::vector<HeadCapture>> heads;  // [block][head]

  const HeadCapture& at(std::size_t block, std::size_t head) const;
  std::size_t depth() const { return heads.size(); }
};

struct ForwardOptions {
  bool capture = false;
  // When set, receives the multiply-accumulate count of every matmul run.
  std::uint64_t* mac_counter = nullptr;
};

struct ForwardResult {
  Tensor logits;  // [num_classes]
  std::optional<AttentionCapture> capture;
};

/// Pre-norm ViT forward pass on one image [C×H×W]. Throws DimensionError on
/// shape mismatch and NumericError naming the block where a non-finite value
/// first appears.
ForwardResult forward(const ModelBundle& model, const Tensor& image,
                      const ForwardOptions& options = {});

// scale·Q_i·K_iᵀ, the i-th rank-1 term of the captured scores.
Tensor qk_filter_contribution(const AttentionCapture& capture, std::size_t block,
                              std::size_t head, std::size_t filter);

/// Attention rollout: per block, head-averaged probabilities plus identity,
/// rows renormalized, multiplied from the first block to the last.
Tensor attention_rollout(const AttentionCapture& capture);

}  // namespace snp

#endif  // SNP_MODEL_HPP
