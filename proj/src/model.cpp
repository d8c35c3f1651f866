// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "snp/model.hpp"

#include <cmath>
#include <numeric>

#include "snp/errors.hpp"

namespace snp {

using nlohmann::json;

ModelConfig make_config(std::size_t image_size, std::size_t patch_size, std::size_t in_channels,
                        std::size_t embed_dim, std::size_t depth, std::size_t heads,
                        std::size_t head_dim, std::size_t ffn_hidden, std::size_t num_classes) {
  ModelConfig c;
  c.image_size = image_size;
  c.patch_size = patch_size;
  c.in_channels = in_channels;
  c.embed_dim = embed_dim;
  c.num_classes = num_classes;
  const float scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(head_dim)));
  c.blocks.assign(depth, BlockConfig{heads, head_dim, head_dim, ffn_hidden, scale});
  validate_config(c);
  return c;
}

void validate_config(const ModelConfig& c) {
  auto fail = [](const std::string& msg) { throw ShapeError("invalid model config: " + msg); };
  if (c.image_size == 0 || c.patch_size == 0 || c.in_channels == 0 || c.embed_dim == 0 ||
      c.num_classes == 0) {
    fail("all extents must be positive");
  }
  if (c.image_size % c.patch_size != 0) fail("image_size must be divisible by patch_size");
  if (c.blocks.empty()) fail("depth must be at least 1");
  for (std::size_t b = 0; b < c.blocks.size(); ++b) {
    const BlockConfig& bc = c.blocks[b];
    if (bc.heads == 0 || bc.qk_dim == 0 || bc.v_dim == 0 || bc.ffn_hidden == 0) {
      fail("block " + std::to_string(b) + " has a zero width");
    }
    if (!std::isfinite(bc.attn_scale) || bc.attn_scale <= 0.0f) {
      fail("block " + std::to_string(b) + " attn_scale must be positive");
    }
  }
  if (c.active_channels) {
    const auto& a = *c.active_channels;
    if (a.empty()) fail("active_channels is empty");
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] >= c.embed_dim || (i && a[i] <= a[i - 1])) {
        fail("active_channels must be strictly increasing within [0, embed_dim)");
      }
    }
  }
}

json config_to_json(const ModelConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.blocks) {
    blocks.push_back({{"heads", b.heads},
                      {"qk_dim", b.qk_dim},
                      {"v_dim", b.v_dim},
                      {"ffn_hidden", b.ffn_hidden},
                      {"attn_scale", static_cast<double>(b.attn_scale)}});
  }
  json j = {{"image_size", c.image_size}, {"patch_size", c.patch_size},
            {"in_channels", c.in_channels}, {"embed_dim", c.embed_dim},
            {"num_classes", c.num_classes}, {"depth", c.blocks.size()},
            {"blocks", blocks}};
  if (c.active_channels) j["active_channels"] = *c.active_channels;
  return j;
}

ModelConfig config_from_json(const json& j) {
  try {
    ModelConfig c;
    c.image_size = j.at("image_size").get<std::size_t>();
    c.patch_size = j.at("patch_size").get<std::size_t>();
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    for (const auto& b : j.at("blocks")) {
      c.blocks.push_back(BlockConfig{b.at("heads").get<std::size_t>(),
                                     b.at("qk_dim").get<std::size_t>(),
                                     b.at("v_dim").get<std::size_t>(),
                                     b.at("ffn_hidden").get<std::size_t>(),
                                     static_cast<float>(b.at("attn_scale").get<double>())});
    }
    if (j.at("depth").get<std::size_t>() != c.blocks.size()) {
      throw ShapeError("invalid model config: depth does not match block list");
    }
    if (j.contains("active_channels")) {
      c.active_channels = j.at("active_channels").get<std::vector<std::size_t>>();
    }
    validate_config(c);
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model config: ") + e.what());
  }
}

namespace names {
namespace {
std::string blk(std::size_t b) { return "blocks." + std::to_string(b) + "."; }
std::string hd(std::size_t b, std::size_t h) {
  return blk(b) + "attn.heads." + std::to_string(h) + ".";
}
}  // namespace

std::string patch_weight() { return "patch_embed.weight"; }
std::string patch_bias() { return "patch_embed.bias"; }
std::string cls_token() { return "cls_token"; }
std::string pos_embed() { return "pos_embed"; }
std::string ln1_weight(std::size_t b) { return blk(b) + "ln1.weight"; }
std::string ln1_bias(std::size_t b) { return blk(b) + "ln1.bias"; }
std::string q_weight(std::size_t b, std::size_t h) { return hd(b, h) + "q.weight"; }
std::string q_bias(std::size_t b, std::size_t h) { return hd(b, h) + "q.bias"; }
std::string k_weight(std::size_t b, std::size_t h) { return hd(b, h) + "k.weight"; }
std::string k_bias(std::size_t b, std::size_t h) { return hd(b, h) + "k.bias"; }
std::string v_weight(std::size_t b, std::size_t h) { return hd(b, h) + "v.weight"; }
std::string v_bias(std::size_t b, std::size_t h) { return hd(b, h) + "v.bias"; }
std::string proj_weight(std::size_t b) { return blk(b) + "attn.proj.weight"; }
std::string proj_bias(std::size_t b) { return blk(b) + "attn.proj.bias"; }
std::string ln2_weight(std::size_t b) { return blk(b) + "ln2.weight"; }
std::string ln2_bias(std::size_t b) { return blk(b) + "ln2.bias"; }
std::string fc1_weight(std::size_t b) { return blk(b) + "mlp.fc1.weight"; }
std::string fc1_bias(std::size_t b) { return blk(b) + "mlp.fc1.bias"; }
std::string fc2_weight(std::size_t b) { return blk(b) + "mlp.fc2.weight"; }
std::string fc2_bias(std::size_t b) { return blk(b) + "mlp.fc2.bias"; }
std::string norm_weight() { return "norm.weight"; }
std::string norm_bias() { return "norm.bias"; }
std::string head_weight() { return "head.weight"; }
std::string head_bias() { return "head.bias"; }
}  // namespace names

std::map<std::string, Shape> expected_shapes(const ModelConfig& c) {
  const std::size_t d = c.embed_dim;
  std::map<std::string, Shape> s;
  s[names::patch_weight()] = {d, c.patch_dim()};
  s[names::patch_bias()] = {d};
  s[names::cls_token()] = {d};
  s[names::pos_embed()] = {c.num_tokens(), d};
  for (std::size_t b = 0; b < c.depth(); ++b) {
    const BlockConfig& bc = c.blocks[b];
    s[names::ln1_weight(b)] = {d};
    s[names::ln1_bias(b)] = {d};
    for (std::size_t h = 0; h < bc.heads; ++h) {
      s[names::q_weight(b, h)] = {bc.qk_dim, d};
      s[names::q_bias(b, h)] = {bc.qk_dim};
      s[names::k_weight(b, h)] = {bc.qk_dim, d};
      s[names::k_bias(b, h)] = {bc.qk_dim};
      s[names::v_weight(b, h)] = {bc.v_dim, d};
      s[names::v_bias(b, h)] = {bc.v_dim};
    }
    s[names::proj_weight(b)] = {d, bc.heads * bc.v_dim};
    s[names::proj_bias(b)] = {d};
    s[names::ln2_weight(b)] = {d};
    s[names::ln2_bias(b)] = {d};
    s[names::fc1_weight(b)] = {bc.ffn_hidden, d};
    s[names::fc1_bias(b)] = {bc.ffn_hidden};
    s[names::fc2_weight(b)] = {d, bc.ffn_hidden};
    s[names::fc2_bias(b)] = {d};
  }
  s[names::norm_weight()] = {d};
  s[names::norm_bias()] = {d};
  s[names::head_weight()] = {c.num_classes, d};
  s[names::head_bias()] = {c.num_classes};
  return s;
}

const Tensor& ModelBundle::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ShapeError("model has no tensor '" + name + "'");
  return it->second;
}

Tensor& ModelBundle::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ShapeError("model has no tensor '" + name + "'");
  return it->second;
}

std::size_t ModelBundle::param_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.numel();
  return n;
}

void validate_bundle(const ModelBundle& model) {
  validate_config(model.config);
  const auto expected = expected_shapes(model.config);
  if (expected.size() != model.tensors.size()) {
    throw ShapeError("model has " + std::to_string(model.tensors.size()) +
                     " tensors, config implies " + std::to_string(expected.size()));
  }
  for (const auto& [name, shape] : expected) {
    auto it = model.tensors.find(name);
    if (it == model.tensors.end()) throw ShapeError("missing tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw ShapeError("tensor '" + name + "' has shape " + shape_str(it->second.shape()) +
                       ", config implies " + shape_str(shape));
    }
  }
}

std::string fingerprint(const ModelBundle& model) {
  json index = json::array();
  for (const auto& [name, t] : model.tensors) index.push_back({{"name", name}, {"shape", t.shape()}});
  const std::string text = json{{"config", config_to_json(model.config)}, {"tensors", index}}.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

const HeadCapture& AttentionCapture::at(std::size_t block, std::size_t head) const {
  if (block >= heads.size() || head >= heads[block].size()) {
    throw DimensionError("capture has no block " + std::to_string(block) + " head " +
                         std::to_string(head));
  }
  return heads[block][head];
}

namespace {

Tensor patchify(const ModelConfig& c, const Tensor& image) {
  const std::size_t p = c.patch_size, g = c.grid(), hw = c.image_size;
  Tensor patches({c.num_patches(), c.patch_dim()});
  for (std::size_t gy = 0; gy < g; ++gy) {
    for (std::size_t gx = 0; gx < g; ++gx) {
      auto row = patches.row(gy * g + gx);
      std::size_t k = 0;
      for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
        for (std::size_t iy = 0; iy < p; ++iy) {
          for (std::size_t ix = 0; ix < p; ++ix) {
            row[k++] = image[(ch * hw + gy * p + iy) * hw + gx * p + ix];
          }
        }
      }
    }
  }
  return patches;
}

void check_finite(const Tensor& t, std::size_t block, const char* where) {
  if (!all_finite(t)) {
    throw NumericError("non-finite value in block " + std::to_string(block) + " (" + where + ")");
  }
}

}  // namespace

ForwardResult forward(const ModelBundle& model, const Tensor& image, const ForwardOptions& opt) {
  const ModelConfig& c = model.config;
  const Shape want{c.in_channels, c.image_size, c.image_size};
  if (image.shape() != want) {
    throw DimensionError("image shape " + shape_str(image.shape()) + " does not match model input " +
                         shape_str(want));
  }
  const std::size_t n = c.num_tokens(), d = c.embed_dim;
  std::uint64_t macs = 0;

  std::vector<std::size_t> active;
  if (c.active_channels) {
    active = *c.active_channels;
  } else {
    active.resize(d);
    std::iota(active.begin(), active.end(), std::size_t{0});
  }

  Tensor x({n, d});
  {
    Tensor emb = linear(patchify(c, image), model.at(names::patch_weight()),
                        model.at(names::patch_bias()));
    macs += static_cast<std::uint64_t>(c.num_patches()) * c.patch_dim() * d;
    const Tensor& cls = model.at(names::cls_token());
    const Tensor& pos = model.at(names::pos_embed());
    for (std::size_t j = 0; j < d; ++j) x(0, j) = cls[j] + pos(0, j);
    for (std::size_t t = 1; t < n; ++t) {
      for (std::size_t j = 0; j < d; ++j) x(t, j) = emb(t - 1, j) + pos(t, j);
    }
  }

  ForwardResult result;
  if (opt.capture) {
    result.capture.emplace();
    result.capture->tokens = n;
  }

  for (std::size_t b = 0; b < c.depth(); ++b) {
    const BlockConfig& bc = c.blocks[b];
    Tensor h1 = layer_norm(x, model.at(names::ln1_weight(b)), model.at(names::ln1_bias(b)), active);
    Tensor concat({n, bc.heads * bc.v_dim});
    std::vector<HeadCapture> captured;
    for (std::size_t h = 0; h < bc.heads; ++h) {
      Tensor q = linear(h1, model.at(names::q_weight(b, h)), model.at(names::q_bias(b, h)));
      Tensor k = linear(h1, model.at(names::k_weight(b, h)), model.at(names::k_bias(b, h)));
      Tensor v = linear(h1, model.at(names::v_weight(b, h)), model.at(names::v_bias(b, h)));
      Tensor scores = scaled(matmul_transposed(q, k), bc.attn_scale);
      Tensor probs = softmax_rows(scores);
      Tensor ctx = matmul(probs, v);
      macs += static_cast<std::uint64_t>(n) * d * (2 * bc.qk_dim + bc.v_dim);
      macs += static_cast<std::uint64_t>(n) * n * (bc.qk_dim + bc.v_dim);
      for (std::size_t t = 0; t < n; ++t) {
        auto src = ctx.row(t);
        std::copy(src.begin(), src.end(), concat.row(t).begin() + h * bc.v_dim);
      }
      if (opt.capture) {
        captured.push_back(HeadCapture{std::move(q), std::move(k), std::move(scores), std::move(probs)});
      }
    }
    Tensor attn = linear(concat, model.at(names::proj_weight(b)), model.at(names::proj_bias(b)));
    macs += static_cast<std::uint64_t>(n) * bc.heads * bc.v_dim * d;
    add_inplace(x, attn);
    check_finite(x, b, "attention");

    Tensor h2 = layer_norm(x, model.at(names::ln2_weight(b)), model.at(names::ln2_bias(b)), active);
    Tensor hidden = gelu(linear(h2, model.at(names::fc1_weight(b)), model.at(names::fc1_bias(b))));
    Tensor mlp = linear(hidden, model.at(names::fc2_weight(b)), model.at(names::fc2_bias(b)));
    macs += 2ULL * n * d * bc.ffn_hidden;
    add_inplace(x, mlp);
    check_finite(x, b, "mlp");

    if (opt.capture) {
      result.capture->scales.push_back(bc.attn_scale);
      result.capture->heads.push_back(std::move(captured));
    }
  }

  Tensor xn = layer_norm(x, model.at(names::norm_weight()), model.at(names::norm_bias()), active);
  Tensor cls_row({1, d});
  std::copy(xn.row(0).begin(), xn.row(0).end(), cls_row.data().begin());
  result.logits = linear(cls_row, model.at(names::head_weight()), model.at(names::head_bias()))
                      .reshaped({c.num_classes});
  macs += static_cast<std::uint64_t>(d) * c.num_classes;
  if (!all_finite(result.logits)) throw NumericError("non-finite value in classifier head");
  if (opt.mac_counter) *opt.mac_counter += macs;
  return result;
}

Tensor qk_filter_contribution(const AttentionCapture& capture, std::size_t block,
                              std::size_t head, std::size_t filter) {
  const HeadCapture& hc = capture.at(block, head);
  if (filter >= hc.query.cols()) {
    throw DimensionError("filter index " + std::to_string(filter) + " out of range for qk width " +
                         std::to_string(hc.query.cols()));
  }
  const std::size_t n = hc.query.rows();
  const double scale = capture.scales.at(block);
  Tensor out({n, n});
  for (std::size_t r = 0; r < n; ++r) {
    const double qs = scale * hc.query(r, filter);
    for (std::size_t c = 0; c < n; ++c) out(r, c) = static_cast<float>(qs * hc.key(c, filter));
  }
  return out;
}

Tensor attention_rollout(const AttentionCapture& capture) {
  const std::size_t n = capture.tokens;
  if (capture.depth() == 0) throw DimensionError("attention_rollout: empty capture");
  std::vector<double> joint;
  std::vector<double> layer(n * n);
  for (std::size_t b = 0; b < capture.depth(); ++b) {
    const auto& heads = capture.heads[b];
    std::fill(layer.begin(), layer.end(), 0.0);
    for (const auto& hc : heads) {
      for (std::size_t i = 0; i < n * n; ++i) layer[i] += hc.probs[i];
    }
    for (std::size_t r = 0; r < n; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        double& v = layer[r * n + c];
        v /= static_cast<double>(heads.size());
        if (r == c) v += 1.0;
        sum += v;
      }
      for (std::size_t c = 0; c < n; ++c) layer[r * n + c] /= sum;
    }
    if (b == 0) {
      joint = layer;
      continue;
    }
    std::vector<double> next(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < n; ++k) {
        const double a = layer[r * n + k];
        for (std::size_t c = 0; c < n; ++c) next[r * n + c] += a * joint[k * n + c];
      }
    }
    joint.swap(next);
  }
  Tensor out({n, n});
  for (std::size_t i = 0; i < n * n; ++i) out[i] = static_cast<float>(joint[i]);
  return out;
}

}  // namespace snp
