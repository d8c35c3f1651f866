// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "snp/errors.hpp"
#include "snp/model_io.hpp"
#include "snp/pruner.hpp"
#include "test_util.hpp"

namespace snp {
namespace {

PrunePlan plan_for(const ModelBundle& m, const RatioSpec& r, Criterion c = Criterion::kL2) {
  const auto table = compute_importance(c, m, testutil::images(m.config, 2, 99));
  return make_plan(table, r, build_groups(m.config));
}

double max_logit_gap(const ModelBundle& a, const ModelBundle& b, std::size_t images, std::uint64_t seed) {
  double worst = 0.0;
  for (const Tensor& img : testutil::images(a.config, images, seed)) {
    worst = std::max(worst, max_abs_diff(forward(a, img).logits, forward(b, img).logits));
  }
  return worst;
}

TEST(DropCount, FloorWithSurvivorGuard) {
  EXPECT_EQ(drop_count(0.0, 10), 0u);
  EXPECT_EQ(drop_count(0.4, 10), 4u);
  EXPECT_EQ(drop_count(0.3, 10), 3u);
  EXPECT_EQ(drop_count(0.7, 10), 7u);
  EXPECT_EQ(drop_count(0.9, 3), 2u);
  EXPECT_EQ(drop_count(0.5, 1), 0u);
  EXPECT_THROW(drop_count(1.0, 4), ArgumentError);
  EXPECT_THROW(drop_count(-0.1, 4), ArgumentError);
}

TEST(SelectKeep, MonotoneScores) {
  std::vector<double> s(10);
  std::iota(s.begin(), s.end(), 0.0);
  EXPECT_EQ(select_keep(s, drop_count(0.4, 10)), (std::vector<std::size_t>{4, 5, 6, 7, 8, 9}));
}

TEST(SelectKeep, TiesKeepLowerIndex) {
  EXPECT_EQ(select_keep(std::vector<double>{5, 5, 1, 1}, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_keep(std::vector<double>{2, 2, 2, 2}, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_keep(std::vector<double>{3, 1, 1, 3}, 1), (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_THROW(select_keep(std::vector<double>{1, 2}, 2), InvalidPlanError);
}

TEST(MakePlan, ZeroRatiosKeepEverything) {
  const ModelBundle m = testutil::small_model(1);
  const auto plan = plan_for(m, {});
  const auto all = keep_all_plan(build_groups(m.config), fingerprint(m), "l2");
  EXPECT_EQ(plan_to_json(plan), plan_to_json(all));
}

TEST(MakePlan, UniformAcrossHeadsAndOverrides) {
  const ModelBundle m = testutil::small_model(2);
  RatioSpec r{0.5, 0.25, 0.9, 0.1, {{2, BlockRatios{0.0, 0.0, 0.5}}}, std::nullopt};
  const auto plan = plan_for(m, r);
  EXPECT_TRUE(validate_plan(plan, m).empty());
  EXPECT_EQ(plan.find({GroupKind::kQkPair, 0, 1})->keep.size(), 8u);
  EXPECT_EQ(plan.find({GroupKind::kValue, 3, 2})->keep.size(), 12u);
  EXPECT_EQ(plan.find({GroupKind::kFfnHidden, 0, std::nullopt})->keep.size(), 10u);
  EXPECT_EQ(plan.find({GroupKind::kQkPair, 2, 0})->keep.size(), 16u);
  EXPECT_EQ(plan.find({GroupKind::kFfnHidden, 2, std::nullopt})->keep.size(), 48u);
  EXPECT_EQ(plan.find({GroupKind::kEmbedResidual, std::nullopt, std::nullopt})->keep.size(), 44u);
}

TEST(MakePlan, TableMustCoverGroups) {
  const ModelBundle m = testutil::small_model(1);
  auto table = compute_importance(Criterion::kL2, m, {});
  table.groups.pop_back();
  EXPECT_THROW(make_plan(table, {}, build_groups(m.config)), InvalidPlanError);
  table = compute_importance(Criterion::kL2, m, {});
  table.groups[0].scores.pop_back();
  EXPECT_THROW(make_plan(table, {}, build_groups(m.config)), InvalidPlanError);
}

TEST(ApplyPlan, KeepAllIsByteIdentical) {
  const ModelBundle m = testutil::small_model(3);
  const ModelBundle p = apply_plan(m, keep_all_plan(build_groups(m.config), fingerprint(m)));
  EXPECT_EQ(serialize_model(p), serialize_model(m));
}

TEST(ApplyPlan, HalfQkShrinksOnlyQk) {
  const ModelBundle m = testutil::small_model(4);
  const ModelBundle p = apply_plan(m, plan_for(m, {0.5, 0, 0, 0, {}, {}}));
  const auto before = expected_shapes(m.config);
  for (const auto& [name, shape] : expected_shapes(p.config)) {
    const bool qk = name.find(".q.") != std::string::npos || name.find(".k.") != std::string::npos;
    if (qk) {
      EXPECT_EQ(shape[0], 8u) << name;
    } else {
      EXPECT_EQ(shape, before.at(name)) << name;
    }
  }
  for (const auto& b : p.config.blocks) {
    EXPECT_EQ(b.qk_dim, 8u);
    EXPECT_FLOAT_EQ(b.attn_scale, 0.25f);  // still 1/sqrt(16)
  }
}

TEST(ApplyPlan, RejectsStaleAndInvalid) {
  const ModelBundle m = testutil::small_model(5);
  auto plan = keep_all_plan(build_groups(m.config), fingerprint(m));
  plan.groups[0].keep = {0};
  EXPECT_THROW(apply_plan(m, plan), InvalidPlanError);
  EXPECT_THROW(apply_mask(m, plan), InvalidPlanError);
  plan = keep_all_plan(build_groups(m.config), "ffffffffffffffff");
  EXPECT_THROW(apply_plan(m, plan), StalePlanError);
}

TEST(PruneMask, EquivalentPerGroupKind) {
  const ModelBundle m = testutil::small_model(6);
  for (double ratio : {0.3, 0.7}) {
    for (int kind = 0; kind < 4; ++kind) {
      RatioSpec r;
      if (kind == 0) r.qk = ratio;
      if (kind == 1) r.v = ratio;
      if (kind == 2) r.ffn = ratio;
      if (kind == 3) r = RatioSpec{ratio, ratio, ratio, ratio, {}, {}};
      const auto plan = plan_for(m, r, Criterion::kSnp);
      const ModelBundle pruned = apply_plan(m, plan);
      const ModelBundle masked = apply_mask(m, plan);
      EXPECT_LE(max_logit_gap(pruned, masked, 4, 7), 1e-4) << "ratio " << ratio << " kind " << kind;
      EXPECT_LT(pruned.param_count(), m.param_count());
    }
  }
}

TEST(PruneMask, MaskedScoresEqualPrunedScores) {
  const ModelBundle m = testutil::small_model(7);
  const auto plan = plan_for(m, {0.5, 0, 0, 0, {}, {}}, Criterion::kSnp);
  const ModelBundle pruned = apply_plan(m, plan);
  const ModelBundle masked = apply_mask(m, plan);
  const Tensor img = testutil::images(m.config, 1, 8)[0];
  // Straight-line double arithmetic: adding the zeroed filters' exact-zero
  // products leaves every sum bit-identical.
  const auto fp = oracle::forward64(pruned, img);
  const auto fm = oracle::forward64(masked, img);
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t h = 0; h < 3; ++h) EXPECT_EQ(fp.heads[b][h].scores.a, fm.heads[b][h].scores.a);
  }
  EXPECT_EQ(fp.logits, fm.logits);
  // The float engine agrees up to summation order.
  const auto cp = *forward(pruned, img, {.capture = true}).capture;
  const auto cm = *forward(masked, img, {.capture = true}).capture;
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t h = 0; h < 3; ++h) EXPECT_LE(max_abs_diff(cp.at(b, h).scores, cm.at(b, h).scores), 1e-5);
  }
}

TEST(PruneMask, KeepAllMaskIsIdentity) {
  const ModelBundle m = testutil::small_model(8);
  const ModelBundle masked = apply_mask(m, keep_all_plan(build_groups(m.config), fingerprint(m)));
  EXPECT_EQ(max_logit_gap(m, masked, 2, 3), 0.0);
}

TEST(PruneMask, WithHeadRemoval) {
  const ModelBundle m = testutil::small_model(9);
  const auto table = compute_importance(Criterion::kSnp, m, testutil::images(m.config, 2, 10));
  std::vector<std::vector<double>> hs;
  for (std::size_t b = 0; b < 4; ++b) hs.push_back(head_importance(m, b));
  const HeadKeep hk = select_heads(hs, 0.34);
  ModelConfig topo = m.config;
  for (std::size_t b = 0; b < 4; ++b) topo.blocks[b].heads = hk[b].size();
  const auto plan = make_plan(table, {0.5, 0.5, 0.5, 0.25, {}, {}}, build_groups(topo), hk);
  EXPECT_TRUE(validate_plan(plan, m).empty());
  const ModelBundle pruned = apply_plan(m, plan);
  EXPECT_EQ(pruned.config.blocks[0].heads, 2u);
  EXPECT_LE(max_logit_gap(pruned, apply_mask(m, plan), 4, 11), 1e-4);
}

TEST(HeadPrune, DeadHeadRemovalKeepsLogits) {
  ModelBundle m = synth_model(make_config(32, 8, 3, 48, 2, 2, 16, 96, 10), 12, 0.2f);
  for (std::size_t b = 0; b < 2; ++b) {
    Tensor& proj = m.at(names::proj_weight(b));
    for (std::size_t r = 0; r < proj.rows(); ++r)
      for (std::size_t c = 16; c < 32; ++c) proj(r, c) = 0.0f;
  }
  const std::vector<std::vector<double>> scores{{1.0, 0.0}, {1.0, 0.0}};
  const ModelBundle pruned = head_prune(m, scores, 0.5);
  EXPECT_EQ(pruned.config.blocks[1].heads, 1u);
  EXPECT_LE(max_logit_gap(m, pruned, 3, 13), 1e-5);
  EXPECT_EQ(serialize_model(head_prune(m, scores, 0.0)), serialize_model(m));
}

TEST(HeadPrune, ParameterAccounting) {
  const ModelBundle m = synth_model(make_config(32, 8, 3, 48, 2, 4, 12, 96, 10), 14);
  std::vector<std::vector<double>> scores{{4, 3, 2, 1}, {1, 2, 3, 4}};
  const ModelBundle pruned = head_prune(m, scores, 0.5);
  EXPECT_EQ(pruned.config.blocks[0].heads, 2u);
  // Per removed head: q, k, v weights and biases plus its out-proj columns.
  const std::size_t per_head = 3 * (12 * 48 + 12) + 48 * 12;
  EXPECT_EQ(m.param_count() - pruned.param_count(), 2 * 2 * per_head);
  // Head 0 of block 1 in the result is source head 2.
  EXPECT_TRUE(pruned.at(names::q_weight(1, 0)).bit_equal(m.at(names::q_weight(1, 2))));
  EXPECT_THROW(remove_heads(m, {{}, {0}}), InvalidPlanError);
}

TEST(Compose, SequentialEqualsComposed) {
  const ModelBundle m = testutil::small_model(15);
  const auto p1 = plan_for(m, {0.5, 0, 0, 0.25, {}, {}});
  const ModelBundle m1 = apply_plan(m, p1);
  const auto p2 = plan_for(m1, {0, 0.5, 0.3, 0, {}, {}});
  const ModelBundle seq = apply_plan(m1, p2);
  const ModelBundle once = apply_plan(m, compose_plans(p1, p2));
  EXPECT_EQ(serialize_model(seq), serialize_model(once));
}

TEST(Compose, WithHeadRemovalInBothSteps) {
  const ModelBundle m = testutil::small_model(16);
  PrunePlan p1 = keep_all_plan(build_groups(plan_topology(m.config, PrunePlan{"", "", HeadKeep{{0, 2}, {1, 2}, {0, 1}, {0, 1, 2}}, {}})),
                               fingerprint(m));
  p1.head_keep = HeadKeep{{0, 2}, {1, 2}, {0, 1}, {0, 1, 2}};
  p1.groups[0].keep = p1.groups[1].keep = {0, 3, 4, 9};
  const ModelBundle m1 = apply_plan(m, p1);
  PrunePlan p2 = keep_all_plan(build_groups(plan_topology(m1.config, PrunePlan{"", "", HeadKeep{{1}, {0, 1}, {0}, {0, 2}}, {}})),
                               fingerprint(m1));
  p2.head_keep = HeadKeep{{1}, {0, 1}, {0}, {0, 2}};
  p2.groups[0].keep = {1, 2};
  const ModelBundle seq = apply_plan(m1, p2);
  const PrunePlan both = compose_plans(p1, p2);
  EXPECT_EQ((*both.head_keep)[0], (std::vector<std::size_t>{2}));
  EXPECT_EQ(serialize_model(apply_plan(m, both)), serialize_model(seq));
}

}  // namespace
}  // namespace snp
