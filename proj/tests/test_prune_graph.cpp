// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "snp/errors.hpp"
#include "snp/prune_graph.hpp"
#include "test_util.hpp"

namespace snp {
namespace {

bool has_code(const std::vector<Violation>& v, Violation::Code code) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

TEST(Groups, CanonicalOrderAndWidths) {
  const ModelConfig c = preset_config("tiny-desk");
  const auto groups = build_groups(c);
  // Per block: 3 QK, 3 VALUE, 1 FFN; one residual group.
  ASSERT_EQ(groups.size(), 4u * 7u + 1u);
  EXPECT_EQ(groups[0].id, (GroupId{GroupKind::kQkPair, 0, 0}));
  EXPECT_EQ(groups[3].id, (GroupId{GroupKind::kValue, 0, 0}));
  EXPECT_EQ(groups[6].id, (GroupId{GroupKind::kFfnHidden, 0, std::nullopt}));
  EXPECT_EQ(groups.back().id.kind, GroupKind::kEmbedResidual);
  EXPECT_EQ(groups[0].width, 16u);
  EXPECT_EQ(groups[6].width, 96u);
  EXPECT_EQ(groups.back().width, 48u);
}

TEST(Groups, MembersCoverTheGraph) {
  const ModelConfig c = preset_config("tiny-desk");
  const auto groups = build_groups(c);
  EXPECT_EQ(groups.back().members.size(), 7u + c.depth() * (9u + 3u * 3u));
  const auto& value = groups[4];  // block 0, head 1
  ASSERT_EQ(value.members.size(), 3u);
  EXPECT_EQ(value.members[2].tensor, names::proj_weight(0));
  EXPECT_EQ(value.members[2].axis, 1u);
  EXPECT_EQ(value.members[2].offset, 16u);
  // Every member axis has the group's width (the proj consumer covers a slice).
  const auto shapes = expected_shapes(c);
  for (const auto& g : groups) {
    for (const auto& m : g.members) {
      const std::size_t extent = shapes.at(m.tensor).at(m.axis);
      EXPECT_LE(m.offset + g.width, extent) << m.tensor;
      if (m.offset == 0 && m.role != MemberRole::kConsumer) EXPECT_EQ(extent, g.width) << m.tensor;
    }
  }
}

TEST(Validate, KeepAllPasses) {
  const ModelBundle m = testutil::small_model(1);
  const auto plan = keep_all_plan(build_groups(m.config), fingerprint(m));
  EXPECT_TRUE(validate_plan(plan, m).empty());
  EXPECT_NO_THROW(require_valid(plan, m));
}

TEST(Validate, StaleFingerprint) {
  const ModelBundle m = testutil::small_model(1);
  auto plan = keep_all_plan(build_groups(m.config), "0000000000000000");
  EXPECT_THROW(validate_plan(plan, m), StalePlanError);
}

TEST(Validate, DetectsEveryViolationKind) {
  const ModelBundle m = testutil::small_model(1);
  const auto groups = build_groups(m.config);
  const auto base = keep_all_plan(groups, fingerprint(m));
  using C = Violation::Code;

  auto plan = base;
  plan.groups[0].keep = {0, 1, 2};  // head 0 keeps 3, heads 1 and 2 keep 16
  EXPECT_TRUE(has_code(validate_plan(plan, m), C::kNonUniform));
  EXPECT_THROW(require_valid(plan, m), InvalidPlanError);

  plan = base;
  plan.groups[6].keep = {5, 3};
  EXPECT_TRUE(has_code(validate_plan(plan, m), C::kNotIncreasing));

  plan = base;
  plan.groups[6].keep = {0, 96};
  EXPECT_TRUE(has_code(validate_plan(plan, m), C::kOutOfBounds));

  plan = base;
  plan.groups[6].keep.clear();
  EXPECT_TRUE(has_code(validate_plan(plan, m), C::kEmpty));

  plan = base;
  plan.groups.pop_back();
  EXPECT_TRUE(has_code(validate_plan(plan, m), C::kMissingGroup));

  plan = base;
  plan.groups.push_back({{GroupKind::kQkPair, 9, 0}, {0}});
  EXPECT_TRUE(has_code(validate_plan(plan, m), C::kUnknownGroup));

  plan = base;
  plan.groups.push_back(plan.groups[0]);
  EXPECT_TRUE(has_code(validate_plan(plan, m), C::kDuplicateGroup));

  plan = base;
  plan.head_keep = std::vector<std::vector<std::size_t>>{{0}, {1}, {2}};
  EXPECT_TRUE(has_code(validate_plan(plan, m), C::kBadHeads));
}

TEST(Validate, HeadKeepChangesTopology) {
  const ModelBundle m = testutil::small_model(1);
  PrunePlan probe;
  probe.head_keep = std::vector<std::vector<std::size_t>>{{0, 2}, {1}, {0, 1, 2}, {2}};
  const ModelConfig topo = plan_topology(m.config, probe);
  EXPECT_EQ(topo.blocks[0].heads, 2u);
  EXPECT_EQ(topo.blocks[3].heads, 1u);
  auto plan = keep_all_plan(build_groups(topo), fingerprint(m));
  plan.head_keep = probe.head_keep;
  EXPECT_TRUE(validate_plan(plan, m).empty());
  (*plan.head_keep)[1] = {3};
  EXPECT_TRUE(has_code(validate_plan(plan, m), Violation::Code::kBadHeads));
}

TEST(PlanJson, RoundTrip) {
  const ModelBundle m = testutil::small_model(1);
  auto plan = keep_all_plan(build_groups(m.config), fingerprint(m), "snp");
  plan.groups[2].keep = {1, 4};
  plan.head_keep = std::vector<std::vector<std::size_t>>{{0, 1, 2}, {0, 1, 2}, {0, 1, 2}, {0, 1, 2}};
  const auto j = plan_to_json(plan);
  EXPECT_TRUE(j["groups"].back()["block"].is_null());
  const PrunePlan back = plan_from_json(j);
  EXPECT_EQ(plan_to_json(back), j);
  EXPECT_EQ(back.groups[2].keep, (std::vector<std::size_t>{1, 4}));
  EXPECT_THROW(plan_from_json(nlohmann::json{{"groups", 3}}), FormatError);
  auto bad = j;
  bad["groups"][0]["kind"] = "conv";
  EXPECT_THROW(plan_from_json(bad), FormatError);
}

}  // namespace
}  // namespace snp
