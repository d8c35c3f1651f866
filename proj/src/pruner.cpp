// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "snp/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snp/errors.hpp"

namespace snp {

BlockRatios RatioSpec::for_block(std::size_t block) const {
  auto it = overrides.find(block);
  if (it != overrides.end()) return it->second;
  return {qk, v, ffn};
}

std::size_t drop_count(double ratio, std::size_t width) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ArgumentError("pruning ratio " + std::to_string(ratio) + " outside [0, 1)");
  }
  if (width == 0) return 0;
  const auto drop = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(width) + 1e-9));
  return std::min(drop, width - 1);
}

std::vector<std::size_t> select_keep(std::span<const double> scores, std::size_t drop) {
  if (drop >= scores.size() && !scores.empty()) {
    throw InvalidPlanError("cannot drop " + std::to_string(drop) + " of " +
                           std::to_string(scores.size()) + " filters");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw NumericError("importance score is NaN");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a > b;
  });
  std::vector<std::size_t> keep(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
  std::sort(keep.begin(), keep.end());
  return keep;
}

PrunePlan make_plan(const ImportanceTable& table, const RatioSpec& ratios,
                    std::span<const PruneGroup> groups, const std::optional<HeadKeep>& head_keep) {
  PrunePlan plan{table.fingerprint, std::string(to_string(table.criterion)), head_keep, {}};
  for (const auto& g : groups) {
    GroupId source = g.id;
    if (head_keep && g.id.head) {
      const auto& hk = head_keep->at(*g.id.block);
      if (*g.id.head >= hk.size()) throw InvalidPlanError("head survivors do not cover " + describe(g.id));
      source.head = hk[*g.id.head];
    }
    const GroupScores* scores = table.find(source);
    if (!scores) throw InvalidPlanError("importance table has no entry for " + describe(source));
    if (scores->scores.size() != g.width) {
      throw InvalidPlanError("importance table width " + std::to_string(scores->scores.size()) +
                             " differs from group width " + std::to_string(g.width) + " for " +
                             describe(g.id));
    }
    double ratio = ratios.embed;
    if (g.id.block) {
      const BlockRatios br = ratios.for_block(*g.id.block);
      switch (g.id.kind) {
        case GroupKind::kQkPair: ratio = br.qk; break;
        case GroupKind::kValue: ratio = br.v; break;
        case GroupKind::kFfnHidden: ratio = br.ffn; break;
        case GroupKind::kEmbedResidual: break;
      }
    }
    plan.groups.push_back({g.id, select_keep(scores->scores, drop_count(ratio, g.width))});
  }
  return plan;
}

HeadKeep select_heads(std::span<const std::vector<double>> head_scores, double ratio) {
  HeadKeep out;
  for (const auto& scores : head_scores) {
    if (scores.empty()) throw InvalidPlanError("block without heads");
    out.push_back(select_keep(scores, drop_count(ratio, scores.size())));
  }
  return out;
}

ModelBundle remove_heads(const ModelBundle& model, const HeadKeep& head_keep) {
  const ModelConfig& c = model.config;
  if (head_keep.size() != c.depth()) {
    throw InvalidPlanError("head survivors listed for " + std::to_string(head_keep.size()) +
                           " blocks, model has " + std::to_string(c.depth()));
  }
  ModelBundle out = model;
  for (std::size_t b = 0; b < c.depth(); ++b) {
    const BlockConfig& bc = c.blocks[b];
    const auto& keep = head_keep[b];
    if (keep.empty()) throw InvalidPlanError("block " + std::to_string(b) + " would lose every head");
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (keep[i] >= bc.heads || (i && keep[i] <= keep[i - 1])) {
        throw InvalidPlanError("block " + std::to_string(b) + " head list invalid");
      }
    }
    for (std::size_t h = 0; h < bc.heads; ++h) {
      for (const auto& n : {names::q_weight(b, h), names::q_bias(b, h), names::k_weight(b, h),
                            names::k_bias(b, h), names::v_weight(b, h), names::v_bias(b, h)}) {
        out.tensors.erase(n);
      }
    }
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const std::size_t h = keep[i];
      out.tensors.insert_or_assign(names::q_weight(b, i), model.at(names::q_weight(b, h)));
      out.tensors.insert_or_assign(names::q_bias(b, i), model.at(names::q_bias(b, h)));
      out.tensors.insert_or_assign(names::k_weight(b, i), model.at(names::k_weight(b, h)));
      out.tensors.insert_or_assign(names::k_bias(b, i), model.at(names::k_bias(b, h)));
      out.tensors.insert_or_assign(names::v_weight(b, i), model.at(names::v_weight(b, h)));
      out.tensors.insert_or_assign(names::v_bias(b, i), model.at(names::v_bias(b, h)));
      for (std::size_t j = 0; j < bc.v_dim; ++j) cols.push_back(h * bc.v_dim + j);
    }
    if (keep.size() != bc.heads) {
      out.at(names::proj_weight(b)) = take(model.at(names::proj_weight(b)), 1, cols);
    }
    out.config.blocks[b].heads = keep.size();
  }
  validate_bundle(out);
  return out;
}

ModelBundle head_prune(const ModelBundle& model, std::span<const std::vector<double>> head_scores,
                       double ratio) {
  if (head_scores.size() != model.config.depth()) {
    throw DimensionError("head scores for " + std::to_string(head_scores.size()) +
                         " blocks, model has " + std::to_string(model.config.depth()));
  }
  for (std::size_t b = 0; b < head_scores.size(); ++b) {
    if (head_scores[b].size() != model.config.blocks[b].heads) {
      throw DimensionError("head score count mismatch in block " + std::to_string(b));
    }
  }
  return remove_heads(model, select_heads(head_scores, ratio));
}

namespace {

std::vector<std::size_t> complement(const std::vector<std::size_t>& keep, std::size_t width) {
  std::vector<std::size_t> out;
  std::size_t k = 0;
  for (std::size_t i = 0; i < width; ++i) {
    if (k < keep.size() && keep[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace

ModelBundle apply_plan(const ModelBundle& model, const PrunePlan& plan) {
  require_valid(plan, model);
  ModelBundle out = plan.head_keep ? remove_heads(model, *plan.head_keep) : model;
  ModelConfig& c = out.config;

  // tensor -> axis -> dropped flags
  std::map<std::string, std::map<std::size_t, std::vector<bool>>> dropped;
  for (const auto& g : build_groups(c)) {
    const auto& keep = plan.find(g.id)->keep;
    const std::size_t kept = keep.size();
    switch (g.id.kind) {
      case GroupKind::kQkPair: c.blocks[*g.id.block].qk_dim = kept; break;
      case GroupKind::kValue: c.blocks[*g.id.block].v_dim = kept; break;
      case GroupKind::kFfnHidden: c.blocks[*g.id.block].ffn_hidden = kept; break;
      case GroupKind::kEmbedResidual: c.embed_dim = kept; break;
    }
    if (kept == g.width) continue;
    const auto drops = complement(keep, g.width);
    for (const auto& m : g.members) {
      auto& flags = dropped[m.tensor][m.axis];
      if (flags.empty()) flags.assign(out.at(m.tensor).dim(m.axis), false);
      for (std::size_t i : drops) flags.at(m.offset + i) = true;
    }
  }
  for (const auto& [name, axes] : dropped) {
    Tensor t = out.at(name);
    for (const auto& [axis, flags] : axes) {
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < flags.size(); ++i) {
        if (!flags[i]) keep.push_back(i);
      }
      t = take(t, axis, keep);
    }
    out.at(name) = std::move(t);
  }
  if (c.active_channels) {
    // Surviving residual channels are renumbered densely.
    const auto& keep = plan.find({GroupKind::kEmbedResidual, std::nullopt, std::nullopt})->keep;
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (std::binary_search(c.active_channels->begin(), c.active_channels->end(), keep[i])) {
        active.push_back(i);
      }
    }
    if (active.size() == c.embed_dim) {
      c.active_channels.reset();
    } else {
      c.active_channels = std::move(active);
    }
  }
  validate_bundle(out);
  return out;
}

namespace {

void zero_row(Tensor& t, std::size_t r) {
  if (t.rank() == 1) {
    t[r] = 0.0f;
  } else {
    auto row = t.row(r);
    std::fill(row.begin(), row.end(), 0.0f);
  }
}

void zero_column(Tensor& t, std::size_t col) {
  for (std::size_t r = 0; r < t.rows(); ++r) t(r, col) = 0.0f;
}

}  // namespace

ModelBundle apply_mask(const ModelBundle& model, const PrunePlan& plan) {
  require_valid(plan, model);
  ModelBundle out = model;
  const ModelConfig& src = model.config;
  const ModelConfig topo = plan_topology(src, plan);

  auto source_head = [&](std::size_t b, std::size_t h) {
    return plan.head_keep ? (*plan.head_keep)[b][h] : h;
  };
  if (plan.head_keep) {
    for (std::size_t b = 0; b < src.depth(); ++b) {
      for (std::size_t h : complement((*plan.head_keep)[b], src.blocks[b].heads)) {
        for (float& v : out.at(names::v_weight(b, h)).data()) v = 0.0f;
        for (float& v : out.at(names::v_bias(b, h)).data()) v = 0.0f;
      }
    }
  }

  for (const auto& g : build_groups(topo)) {
    const auto& keep = plan.find(g.id)->keep;
    if (keep.size() == g.width) continue;
    const auto drops = complement(keep, g.width);
    switch (g.id.kind) {
      case GroupKind::kQkPair: {
        const std::size_t b = *g.id.block, h = source_head(b, *g.id.head);
        for (std::size_t i : drops) {
          zero_row(out.at(names::q_weight(b, h)), i);
          zero_row(out.at(names::q_bias(b, h)), i);
          zero_row(out.at(names::k_weight(b, h)), i);
          zero_row(out.at(names::k_bias(b, h)), i);
        }
        break;
      }
      case GroupKind::kValue: {
        const std::size_t b = *g.id.block, h = source_head(b, *g.id.head);
        for (std::size_t i : drops) {
          zero_row(out.at(names::v_weight(b, h)), i);
          zero_row(out.at(names::v_bias(b, h)), i);
        }
        break;
      }
      case GroupKind::kFfnHidden: {
        const std::size_t b = *g.id.block;
        for (std::size_t i : drops) {
          zero_row(out.at(names::fc1_weight(b)), i);
          zero_row(out.at(names::fc1_bias(b)), i);
        }
        break;
      }
      case GroupKind::kEmbedResidual: {
        std::vector<std::string> producers{names::patch_weight(), names::patch_bias(), names::cls_token()};
        for (std::size_t b = 0; b < src.depth(); ++b) {
          for (const auto& n : {names::proj_weight(b), names::proj_bias(b), names::fc2_weight(b),
                                names::fc2_bias(b)}) {
            producers.push_back(n);
          }
        }
        for (std::size_t i : drops) {
          for (const auto& n : producers) zero_row(out.at(n), i);
          zero_column(out.at(names::pos_embed()), i);
        }
        std::vector<std::size_t> active;
        const auto& prev = src.active_channels;
        for (std::size_t k : keep) {
          if (!prev || std::binary_search(prev->begin(), prev->end(), k)) active.push_back(k);
        }
        out.config.active_channels = std::move(active);
        break;
      }
    }
  }
  validate_bundle(out);
  return out;
}

PrunePlan compose_plans(const PrunePlan& first, const PrunePlan& second) {
  PrunePlan out{first.fingerprint, second.criterion, std::nullopt, {}};
  std::optional<HeadKeep> hk1 = first.head_keep, hk2 = second.head_keep;
  auto mid_head = [&](std::size_t b, std::size_t h) { return hk2 ? hk2->at(b).at(h) : h; };
  if (hk1 || hk2) {
    const std::size_t depth = hk1 ? hk1->size() : hk2->size();
    HeadKeep heads(depth);
    for (std::size_t b = 0; b < depth; ++b) {
      const std::size_t count = hk2 ? hk2->at(b).size() : hk1->at(b).size();
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t mid = mid_head(b, j);
        heads[b].push_back(hk1 ? hk1->at(b).at(mid) : mid);
      }
    }
    out.head_keep = std::move(heads);
  }
  for (const auto& g : second.groups) {
    GroupId mid = g.id;
    if (g.id.head) mid.head = mid_head(*g.id.block, *g.id.head);
    const GroupKeep* f = first.find(mid);
    if (!f) throw InvalidPlanError("first plan has no entry for " + describe(mid));
    std::vector<std::size_t> keep;
    for (std::size_t k : g.keep) {
      if (k >= f->keep.size()) {
        throw InvalidPlanError("second plan keeps index " + std::to_string(k) + " beyond " +
                               describe(mid));
      }
      keep.push_back(f->keep[k]);
    }
    out.groups.push_back({g.id, std::move(keep)});
  }
  return out;
}

}  // namespace snp
