// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "snp/prune_graph.hpp"

#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "snp/errors.hpp"

namespace snp {

using nlohmann::json;

std::string_view to_string(GroupKind kind) {
  switch (kind) {
    case GroupKind::kQkPair: return "qk_pair";
    case GroupKind::kValue: return "value";
    case GroupKind::kFfnHidden: return "ffn_hidden";
    case GroupKind::kEmbedResidual: return "embed_residual";
  }
  return "unknown";
}

GroupKind group_kind_from_string(std::string_view s) {
  if (s == "qk_pair") return GroupKind::kQkPair;
  if (s == "value") return GroupKind::kValue;
  if (s == "ffn_hidden") return GroupKind::kFfnHidden;
  if (s == "embed_residual") return GroupKind::kEmbedResidual;
  throw FormatError("unknown group kind '" + std::string(s) + "'");
}

std::string_view to_string(MemberRole role) {
  switch (role) {
    case MemberRole::kProducer: return "producer";
    case MemberRole::kBias: return "bias";
    case MemberRole::kConsumer: return "consumer";
    case MemberRole::kChannel: return "channel";
  }
  return "unknown";
}

std::string describe(const GroupId& id) {
  std::ostringstream os;
  os << to_string(id.kind);
  if (id.block) os << " block " << *id.block;
  if (id.head) os << " head " << *id.head;
  return os.str();
}

std::vector<PruneGroup> build_groups(const ModelConfig& c) {
  using R = MemberRole;
  std::vector<PruneGroup> groups;
  PruneGroup embed{{GroupKind::kEmbedResidual, std::nullopt, std::nullopt}, c.embed_dim, {}};
  auto& em = embed.members;
  em.push_back({names::patch_weight(), 0, 0, R::kProducer});
  em.push_back({names::patch_bias(), 0, 0, R::kBias});
  em.push_back({names::cls_token(), 0, 0, R::kChannel});
  em.push_back({names::pos_embed(), 1, 0, R::kChannel});

  for (std::size_t b = 0; b < c.depth(); ++b) {
    const BlockConfig& bc = c.blocks[b];
    for (std::size_t h = 0; h < bc.heads; ++h) {
      groups.push_back({{GroupKind::kQkPair, b, h},
                        bc.qk_dim,
                        {{names::q_weight(b, h), 0, 0, R::kProducer},
                         {names::q_bias(b, h), 0, 0, R::kBias},
                         {names::k_weight(b, h), 0, 0, R::kProducer},
                         {names::k_bias(b, h), 0, 0, R::kBias}}});
    }
    for (std::size_t h = 0; h < bc.heads; ++h) {
      groups.push_back({{GroupKind::kValue, b, h},
                        bc.v_dim,
                        {{names::v_weight(b, h), 0, 0, R::kProducer},
                         {names::v_bias(b, h), 0, 0, R::kBias},
                         {names::proj_weight(b), 1, h * bc.v_dim, R::kConsumer}}});
    }
    groups.push_back({{GroupKind::kFfnHidden, b, std::nullopt},
                      bc.ffn_hidden,
                      {{names::fc1_weight(b), 0, 0, R::kProducer},
                       {names::fc1_bias(b), 0, 0, R::kBias},
                       {names::fc2_weight(b), 1, 0, R::kConsumer}}});

    em.push_back({names::ln1_weight(b), 0, 0, R::kChannel});
    em.push_back({names::ln1_bias(b), 0, 0, R::kChannel});
    for (std::size_t h = 0; h < bc.heads; ++h) {
      em.push_back({names::q_weight(b, h), 1, 0, R::kConsumer});
      em.push_back({names::k_weight(b, h), 1, 0, R::kConsumer});
      em.push_back({names::v_weight(b, h), 1, 0, R::kConsumer});
    }
    em.push_back({names::proj_weight(b), 0, 0, R::kProducer});
    em.push_back({names::proj_bias(b), 0, 0, R::kBias});
    em.push_back({names::ln2_weight(b), 0, 0, R::kChannel});
    em.push_back({names::ln2_bias(b), 0, 0, R::kChannel});
    em.push_back({names::fc1_weight(b), 1, 0, R::kConsumer});
    em.push_back({names::fc2_weight(b), 0, 0, R::kProducer});
    em.push_back({names::fc2_bias(b), 0, 0, R::kBias});
  }
  em.push_back({names::norm_weight(), 0, 0, R::kChannel});
  em.push_back({names::norm_bias(), 0, 0, R::kChannel});
  em.push_back({names::head_weight(), 1, 0, R::kConsumer});
  groups.push_back(std::move(embed));
  return groups;
}

const GroupKeep* PrunePlan::find(const GroupId& id) const {
  for (const auto& g : groups) {
    if (g.id == id) return &g;
  }
  return nullptr;
}

PrunePlan keep_all_plan(std::span<const PruneGroup> groups, std::string fingerprint,
                        std::string criterion) {
  PrunePlan plan{std::move(fingerprint), std::move(criterion), std::nullopt, {}};
  for (const auto& g : groups) {
    std::vector<std::size_t> keep(g.width);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    plan.groups.push_back({g.id, std::move(keep)});
  }
  return plan;
}

ModelConfig plan_topology(const ModelConfig& source, const PrunePlan& plan) {
  ModelConfig c = source;
  if (!plan.head_keep) return c;
  if (plan.head_keep->size() != c.depth()) {
    throw InvalidPlanError("plan lists head survivors for " + std::to_string(plan.head_keep->size()) +
                           " blocks, model has " + std::to_string(c.depth()));
  }
  for (std::size_t b = 0; b < c.depth(); ++b) c.blocks[b].heads = (*plan.head_keep)[b].size();
  return c;
}

namespace {

bool strictly_increasing(const std::vector<std::size_t>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] <= v[i - 1]) return false;
  }
  return true;
}

}  // namespace

std::vector<Violation> validate_plan(const PrunePlan& plan, std::span<const PruneGroup> groups,
                                     const ModelConfig& source, std::string_view fp) {
  using C = Violation::Code;
  if (plan.fingerprint != fp) {
    throw StalePlanError("plan fingerprint " + plan.fingerprint + " does not match model " +
                         std::string(fp));
  }
  std::vector<Violation> out;
  if (plan.head_keep) {
    const auto& hk = *plan.head_keep;
    if (hk.size() != source.depth()) {
      out.push_back({C::kBadHeads, "head survivors listed for " + std::to_string(hk.size()) +
                                       " blocks, model has " + std::to_string(source.depth())});
    } else {
      for (std::size_t b = 0; b < hk.size(); ++b) {
        const auto& keep = hk[b];
        if (keep.empty()) out.push_back({C::kBadHeads, "block " + std::to_string(b) + " removes every head"});
        if (!strictly_increasing(keep)) {
          out.push_back({C::kBadHeads, "block " + std::to_string(b) + " head list not strictly increasing"});
        }
        if (!keep.empty() && keep.back() >= source.blocks[b].heads) {
          out.push_back({C::kBadHeads, "block " + std::to_string(b) + " keeps a head out of range"});
        }
      }
    }
  }

  std::map<GroupId, const PruneGroup*> known;
  for (const auto& g : groups) known[g.id] = &g;
  std::set<GroupId> seen;
  // (kind, block) -> keep counts per head
  std::map<std::pair<GroupKind, std::size_t>, std::set<std::size_t>> head_counts;

  for (const auto& gk : plan.groups) {
    const std::string name = describe(gk.id);
    auto it = known.find(gk.id);
    if (it == known.end()) {
      out.push_back({C::kUnknownGroup, name + " is not a group of this model"});
      continue;
    }
    if (!seen.insert(gk.id).second) {
      out.push_back({C::kDuplicateGroup, name + " appears more than once"});
      continue;
    }
    const std::size_t width = it->second->width;
    if (gk.keep.empty()) out.push_back({C::kEmpty, name + " keeps no filters"});
    if (!strictly_increasing(gk.keep)) {
      out.push_back({C::kNotIncreasing, name + " keep indices are not strictly increasing"});
    }
    for (std::size_t k : gk.keep) {
      if (k >= width) {
        out.push_back({C::kOutOfBounds, name + " keeps index " + std::to_string(k) +
                                            " but width is " + std::to_string(width)});
        break;
      }
    }
    if (gk.id.kind == GroupKind::kQkPair || gk.id.kind == GroupKind::kValue) {
      head_counts[{gk.id.kind, *gk.id.block}].insert(gk.keep.size());
    }
  }
  for (const auto& g : groups) {
    if (!seen.count(g.id)) out.push_back({C::kMissingGroup, describe(g.id) + " is missing from the plan"});
  }
  for (const auto& [key, counts] : head_counts) {
    if (counts.size() > 1) {
      out.push_back({C::kNonUniform, std::string(to_string(key.first)) + " keep counts differ across heads of block " +
                                         std::to_string(key.second)});
    }
  }
  return out;
}

std::vector<Violation> validate_plan(const PrunePlan& plan, const ModelBundle& model) {
  const std::string fp = fingerprint(model);
  if (plan.fingerprint != fp) {
    throw StalePlanError("plan fingerprint " + plan.fingerprint + " does not match model " + fp);
  }
  ModelConfig topo;
  try {
    topo = plan_topology(model.config, plan);
  } catch (const InvalidPlanError& e) {
    return {{Violation::Code::kBadHeads, e.what()}};
  }
  const auto groups = build_groups(topo);
  return validate_plan(plan, groups, model.config, fp);
}

void require_valid(const PrunePlan& plan, const ModelBundle& model) {
  const auto violations = validate_plan(plan, model);
  if (violations.empty()) return;
  std::string msg = "plan is not applicable:";
  for (const auto& v : violations) msg += "\n  " + v.message;
  throw InvalidPlanError(msg);
}

json group_id_to_json(const GroupId& id) {
  json j = {{"kind", to_string(id.kind)}, {"block", nullptr}, {"head", nullptr}};
  if (id.block) j["block"] = *id.block;
  if (id.head) j["head"] = *id.head;
  return j;
}

GroupId group_id_from_json(const json& j) {
  GroupId id;
  id.kind = group_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("block") && !j.at("block").is_null()) id.block = j.at("block").get<std::size_t>();
  if (j.contains("head") && !j.at("head").is_null()) id.head = j.at("head").get<std::size_t>();
  return id;
}

json plan_to_json(const PrunePlan& plan) {
  json groups = json::array();
  for (const auto& g : plan.groups) {
    json e = group_id_to_json(g.id);
    e["keep"] = g.keep;
    groups.push_back(std::move(e));
  }
  json j = {{"fingerprint", plan.fingerprint}, {"criterion", plan.criterion}, {"groups", groups}};
  if (plan.head_keep) j["head_keep"] = *plan.head_keep;
  return j;
}

PrunePlan plan_from_json(const json& j) {
  try {
    PrunePlan plan;
    plan.fingerprint = j.at("fingerprint").get<std::string>();
    plan.criterion = j.at("criterion").get<std::string>();
    if (j.contains("head_keep")) {
      plan.head_keep = j.at("head_keep").get<std::vector<std::vector<std::size_t>>>();
    }
    for (const auto& g : j.at("groups")) {
      plan.groups.push_back({group_id_from_json(g), g.at("keep").get<std::vector<std::size_t>>()});
    }
    return plan;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed prune plan: ") + e.what());
  }
}

}  // namespace snp
