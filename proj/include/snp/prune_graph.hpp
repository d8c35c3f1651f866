// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_PRUNE_GRAPH_HPP
#define SNP_PRUNE_GRAPH_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "snp/model.hpp"

namespace snp {

enum class GroupKind { kQkPair, kValue, kFfnHidden, kEmbedResidual };

std::string_view to_string(GroupKind kind);
GroupKind group_kind_from_string(std::string_view s);

// How a member tensor axis relates to the group's filters.
enum class MemberRole {
  kProducer,  // output rows of a weight
  kBias,      // bias entries of a producer
  kConsumer,  // input columns of a weight
  kChannel,   // per-channel vector (LN affine, class token, positional columns)
};

std::string_view to_string(MemberRole role);

/// One tensor axis sliced with a group. Filter i of the group maps to index
/// `offset + i` along `axis`.
struct GroupMember {
  std::string tensor;
  std::size_t axis = 0;
  std::size_t offset = 0;
  MemberRole role = MemberRole::kProducer;
};

/// Identity of a group inside a model: QK_PAIR/VALUE carry block and head,
/// FFN_HIDDEN a block, EMBED_RESIDUAL neither.
struct GroupId {
  GroupKind kind = GroupKind::kQkPair;
  std::optional<std::size_t> block;
  std::optional<std::size_t> head;

  auto operator<=>(const GroupId&) const = default;
};

std::string describe(const GroupId& id);

struct PruneGroup {
  GroupId id;
  std::size_t width = 0;
  std::vector<GroupMember> members;
};

/// All prunable groups of a model in canonical order: per block, QK pairs
/// then values per head, then the FFN group; the residual group last.
std::vector<PruneGroup> build_groups(const ModelConfig& config);

struct GroupKeep {
  GroupId id;
  std::vector<std::size_t> keep;  // strictly increasing
};

/// A graph-consistent pruning decision for one model.
///
/// `head_keep`, when present, lists the surviving heads of every block in
/// the source model's numbering; the groups then describe the model after
/// those heads are removed, with heads renumbered densely.
struct PrunePlan {
  std::string fingerprint;
  std::string criterion;
  std::optional<std::vector<std::vector<std::size_t>>> head_keep;
  std::vector<GroupKeep> groups;

  const GroupKeep* find(const GroupId& id) const;
};

// Keep-all plan over the given groups.
PrunePlan keep_all_plan(std::span<const PruneGroup> groups, std::string fingerprint,
                        std::string criterion = "none");

// Config after removing heads per `head_keep` (the identity when absent).
ModelConfig plan_topology(const ModelConfig& source, const PrunePlan& plan);

struct Violation {
  enum class Code { kNonUniform, kOutOfBounds, kNotIncreasing, kEmpty, kMissingGroup,
                    kUnknownGroup, kDuplicateGroup, kBadHeads };
  Code code;
  std::string message;
};

/// Checks a plan against the groups of `plan_topology(source, plan)`.
/// Returns every violated invariant; empty means the plan is applicable.
/// Throws StalePlanError if the plan fingerprint differs from `fingerprint`.
std::vector<Violation> validate_plan(const PrunePlan& plan, std::span<const PruneGroup> groups,
                                     const ModelConfig& source, std::string_view fingerprint);
std::vector<Violation> validate_plan(const PrunePlan& plan, const ModelBundle& model);

// Throws InvalidPlanError listing the violations, if any.
void require_valid(const PrunePlan& plan, const ModelBundle& model);

nlohmann::json group_id_to_json(const GroupId& id);
GroupId group_id_from_json(const nlohmann::json& j);

nlohmann::json plan_to_json(const PrunePlan& plan);
PrunePlan plan_from_json(const nlohmann::json& j);

}  // namespace snp

#endif  // SNP_PRUNE_GRAPH_HPP
