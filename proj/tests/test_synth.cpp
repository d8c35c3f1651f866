// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "snp/errors.hpp"
#include "snp/evaluator.hpp"
#include "snp/model_io.hpp"
#include "snp/synth.hpp"

namespace snp {
namespace {

TEST(SplitMix, KnownSequence) {
  // Reference values of the splitmix64 generator for seed 0.
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
}

TEST(SplitMix, NormalMoments) {
  SplitMix64 rng(42);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(Synth, SameSeedSameBytes) {
  const ModelConfig c = preset_config("tiny-desk");
  EXPECT_EQ(serialize_model(synth_model(c, 5)), serialize_model(synth_model(c, 5)));
  EXPECT_NE(serialize_model(synth_model(c, 5)), serialize_model(synth_model(c, 6)));
}

TEST(Synth, WeightStatistics) {
  const ModelBundle m = synth_model(preset_config("tiny-desk"), 1);
  const Tensor& w = m.at(names::fc1_weight(0));
  double sq = 0.0;
  for (float v : w.data()) sq += double(v) * v;
  EXPECT_NEAR(std::sqrt(sq / w.numel()), 0.02, 0.002);
  for (float v : m.at(names::ln1_weight(0)).data()) EXPECT_NEAR(v, 1.0f, 0.15f);
}

TEST(Synth, PresetsAndErrors) {
  EXPECT_EQ(preset_config("deit-base").embed_dim, 768u);
  EXPECT_EQ(preset_config("deit-small").blocks[0].heads, 6u);
  EXPECT_EQ(preset_names().size(), 4u);
  EXPECT_THROW(preset_config("deit-huge"), ArgumentError);
}

TEST(Synth, DeitTinyCostsFromPreset) {
  const CostReport c = count_costs(preset_config("deit-tiny"));
  EXPECT_NEAR(c.flops / 1e9, 1.3, 0.065);
}

TEST(Synth, TinyDeskForwardIsFast) {
  const ModelBundle m = synth_model(preset_config("tiny-desk"), 1);
  const Tensor img = synth_calibration(m.config, 1, 2).images[0];
  forward(m, img);
  const auto t0 = std::chrono::steady_clock::now();
  forward(m, img);
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(ms, 100.0);
}

TEST(Synth, CalibrationShapes) {
  const CalibrationSet s = synth_calibration(preset_config("tiny-desk"), 4, 9);
  ASSERT_EQ(s.images.size(), 4u);
  EXPECT_EQ(s.images[0].shape(), (Shape{3, 32, 32}));
  EXPECT_FALSE(s.images[0].bit_equal(s.images[1]));
}

}  // namespace
}  // namespace snp
