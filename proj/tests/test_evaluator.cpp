// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "snp/errors.hpp"
#include "snp/evaluator.hpp"
#include "snp/pruner.hpp"
#include "test_util.hpp"

namespace snp {
namespace {

double rel(double got, double want) { return std::abs(got - want) / want; }

TEST(Costs, DeitPresetsMatchPublishedCounts) {
  struct Row {
    const char* preset;
    double gflops, mparams;
  };
  for (const Row& r : {Row{"deit-tiny", 1.3, 5.7}, Row{"deit-small", 4.6, 22.1}, Row{"deit-base", 17.6, 86.6}}) {
    const CostReport c = count_costs(preset_config(r.preset));
    EXPECT_LE(rel(c.flops / 1e9, r.gflops), 0.05) << r.preset << " " << c.flops;
    EXPECT_LE(rel(c.params / 1e6, r.mparams), 0.02) << r.preset << " " << c.params;
  }
}

TEST(Costs, DeitTinyHandCount) {
  // Patch embed 196·768·192, per block 197·192·576 + 2·197²·64·3 + 197·192·192
  // + 2·197·192·768, classifier 192·1000.
  const std::uint64_t block = 197ull * 192 * 576 + 2ull * 197 * 197 * 64 * 3 + 197ull * 192 * 192 +
                              2ull * 197 * 192 * 768;
  const std::uint64_t want = 196ull * 768 * 192 + 12 * block + 192ull * 1000;
  EXPECT_EQ(count_costs(preset_config("deit-tiny")).flops, want);
}

TEST(Costs, BreakdownSumsToTotals) {
  const CostReport c = count_costs(preset_config("tiny-desk"));
  std::uint64_t f = 0, p = 0;
  for (const auto& e : c.breakdown) {
    f += e.flops;
    p += e.params;
  }
  EXPECT_EQ(f, c.flops);
  EXPECT_EQ(p, c.params);
  EXPECT_EQ(c.params, testutil::small_model(1).param_count());
}

TEST(Costs, MatchRuntimeMacCount) {
  const ModelBundle m = testutil::small_model(2);
  const ModelBundle pruned = apply_plan(
      m, make_plan(compute_importance(Criterion::kL2, m, {}), {0.5, 0.25, 0.3, 0.2, {}, {}},
                   build_groups(m.config)));
  for (const ModelBundle* model : {&m, &pruned}) {
    std::uint64_t macs = 0;
    forward(*model, testutil::images(model->config, 1, 3)[0], {.capture = false, .mac_counter = &macs});
    EXPECT_EQ(macs, count_costs(model->config).flops);
  }
}

TEST(Costs, HalvingQkDeltaIsClosedForm) {
  ModelConfig c = preset_config("deit-tiny");
  const CostReport before = count_costs(c);
  for (auto& b : c.blocks) b.qk_dim = 32;
  const CostReport after = count_costs(c);
  // Each head loses 32 query and 32 key filters: 2·N·d·32 projection MACs and N²·32 score MACs.
  const std::uint64_t n = 197, d = 192;
  const std::uint64_t per_block = 3 * (2 * n * d * 32 + n * n * 32);
  EXPECT_EQ(before.flops - after.flops, 12 * per_block);
  EXPECT_EQ(before.params - after.params, 12 * 3 * 2 * (32 * d + 32));
}

TEST(Costs, StrictlyMonotone) {
  const ModelConfig base = preset_config("tiny-desk");
  const CostReport ref = count_costs(base);
  auto shrink = [&](auto edit) {
    ModelConfig c = base;
    edit(c);
    const CostReport r = count_costs(c);
    EXPECT_LT(r.flops, ref.flops);
    EXPECT_LT(r.params, ref.params);
  };
  shrink([](ModelConfig& c) { c.blocks[1].qk_dim -= 1; });
  shrink([](ModelConfig& c) { c.blocks[2].v_dim -= 1; });
  shrink([](ModelConfig& c) { c.blocks[0].ffn_hidden -= 1; });
  shrink([](ModelConfig& c) { c.embed_dim -= 1; });
  shrink([](ModelConfig& c) { c.blocks[3].heads -= 1; });
}

TEST(Costs, TextAndJson) {
  const CostReport c = count_costs(preset_config("tiny-desk"));
  const auto j = cost_to_json(c);
  EXPECT_EQ(j["flops"], c.flops);
  EXPECT_EQ(j["breakdown"].size(), c.breakdown.size());
  EXPECT_NE(cost_to_text(c).find("total"), std::string::npos);
}

TEST(Similarity, IdenticalAndKeepAll) {
  const ModelBundle m = testutil::small_model(4);
  const Tensor img = testutil::images(m.config, 1, 5)[0];
  const auto cap = *forward(m, img, {.capture = true}).capture;
  EXPECT_NEAR(attention_similarity(cap, cap).mean, 1.0, 1e-12);
  const ModelBundle masked = apply_mask(m, keep_all_plan(build_groups(m.config), fingerprint(m)));
  const auto rep = attention_similarity(cap, *forward(masked, img, {.capture = true}).capture);
  EXPECT_NEAR(rep.mean, 1.0, 1e-6);
  ASSERT_EQ(rep.per_head.size(), 4u);
  EXPECT_EQ(rep.per_head[0].size(), 3u);
}

TEST(Similarity, ShapeMismatch) {
  const ModelBundle a = testutil::small_model(4);
  const ModelBundle b = synth_model(make_config(32, 8, 3, 48, 3, 3, 16, 96, 10), 1);
  const Tensor img = testutil::images(a.config, 1, 5)[0];
  EXPECT_THROW(attention_similarity(*forward(a, img, {.capture = true}).capture,
                                    *forward(b, img, {.capture = true}).capture),
               DimensionError);
}

TEST(Bench, SampleCountsAndStatistics) {
  const ModelBundle m = testutil::small_model(5);
  const BenchReport one = bench(m, 1, 0);
  EXPECT_EQ(one.samples_ms.size(), 1u);
  EXPECT_EQ(one.runs, 1u);
  EXPECT_EQ(one.warmup, 0u);
  const BenchReport r = bench(m, 7, 2);
  double sum = 0.0;
  for (double v : r.samples_ms) sum += v;
  EXPECT_DOUBLE_EQ(r.mean_ms, sum / 7.0);
  EXPECT_THROW(bench(m, 0, 0), ArgumentError);

  BenchReport hand;
  hand.samples_ms = {1.0, 3.0, 2.0, 10.0};
  summarize(hand);
  EXPECT_DOUBLE_EQ(hand.median_ms, 2.5);
  EXPECT_DOUBLE_EQ(hand.mean_ms, 4.0);
  EXPECT_NEAR(hand.stddev_ms, std::sqrt(50.0 / 3.0), 1e-12);
}

TEST(Ratios, IdenticalConfigsAreZero) {
  const ModelConfig c = preset_config("tiny-desk");
  const RatioReport r = ratio_report(c, c);
  for (const auto& g : r.groups) EXPECT_EQ(g.ratio, 0.0);
  EXPECT_EQ(r.msa, 0.0);
  EXPECT_EQ(r.embed, 0.0);
}

TEST(Ratios, QkArithmetic) {
  const ModelConfig c = preset_config("deit-tiny");
  ModelConfig p = c;
  for (auto& b : p.blocks) b.qk_dim = 24;
  const RatioReport r = ratio_report(c, p);
  EXPECT_DOUBLE_EQ(r.groups[0].ratio, 0.625);
  EXPECT_DOUBLE_EQ(r.qk, 0.625);
}

TEST(Ratios, AggregatesOnDepthTwo) {
  const ModelConfig c = make_config(32, 8, 3, 48, 2, 3, 16, 96, 10);
  ModelConfig p = c;
  p.blocks[0].qk_dim = 8;    // 0.5
  p.blocks[1].qk_dim = 12;   // 0.25
  p.blocks[0].v_dim = 4;     // 0.75
  p.blocks[0].ffn_hidden = 48;
  p.blocks[1].ffn_hidden = 24;
  p.embed_dim = 36;
  const RatioReport r = ratio_report(c, p);
  // qk: (3·8 + 3·4) removed of 96; value: 3·12 of 96; msa: 72 of 192.
  EXPECT_DOUBLE_EQ(r.qk, 36.0 / 96.0);
  EXPECT_DOUBLE_EQ(r.value, 36.0 / 96.0);
  EXPECT_DOUBLE_EQ(r.msa, 72.0 / 192.0);
  EXPECT_DOUBLE_EQ(r.ffn, (48.0 + 72.0) / 192.0);
  EXPECT_DOUBLE_EQ(r.embed, 0.25);
  ModelConfig heads = c;
  heads.blocks[0].heads = 2;
  EXPECT_THROW(ratio_report(c, heads), DimensionError);
  EXPECT_NE(ratio_to_text(r).find("msa"), std::string::npos);
}

TEST(Maps, PgmAndCsv) {
  const auto dir = testutil::scratch_dir("maps");
  const Tensor map = Tensor({2, 3}, {0.0f, 0.5f, 1.0f, 0.25f, 0.75f, 1.0f});
  write_pgm(dir / "m.pgm", map);
  write_csv(dir / "m.csv", map);
  std::ifstream pgm(dir / "m.pgm", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(pgm)), {});
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 6);
  EXPECT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size()]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 2]), 255);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 1]), 128);
  std::ifstream csv(dir / "m.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "0,0.5,1");
}

}  // namespace
}  // namespace snp
