// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "snp/synth.hpp"

#include <cmath>
#include <numbers>

#include "snp/errors.hpp"

namespace snp {

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double SplitMix64::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform(), u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

std::vector<std::string> preset_names() { return {"tiny-desk", "deit-tiny", "deit-small", "deit-base"}; }

ModelConfig preset_config(std::string_view preset) {
  if (preset == "tiny-desk") return make_config(32, 8, 3, 48, 4, 3, 16, 96, 10);
  if (preset == "deit-tiny") return make_config(224, 16, 3, 192, 12, 3, 64, 768, 1000);
  if (preset == "deit-small") return make_config(224, 16, 3, 384, 12, 6, 64, 1536, 1000);
  if (preset == "deit-base") return make_config(224, 16, 3, 768, 12, 12, 64, 3072, 1000);
  throw ArgumentError("unknown preset '" + std::string(preset) +
                      "' (expected tiny-desk, deit-tiny, deit-small, deit-base)");
}

ModelBundle synth_model(const ModelConfig& config, std::uint64_t seed, float std) {
  validate_config(config);
  SplitMix64 rng(seed);
  ModelBundle model{config, {}};
  // expected_shapes is ordered by name, which fixes the draw order.
  for (const auto& [name, shape] : expected_shapes(config)) {
    Tensor t(shape);
    const bool ln_gain = name.find("ln") != std::string::npos || name.rfind("norm.", 0) == 0;
    const bool gain = ln_gain && name.ends_with(".weight");
    for (float& v : t.data()) {
      const double noise = std * rng.normal();
      v = static_cast<float>(gain ? 1.0 + noise : noise);
    }
    model.tensors.emplace(name, std::move(t));
  }
  return model;
}

CalibrationSet synth_calibration(const ModelConfig& config, std::size_t count, std::uint64_t seed) {
  SplitMix64 rng(seed);
  CalibrationSet set{config.in_channels, config.image_size, config.image_size, {}};
  for (std::size_t i = 0; i < count; ++i) {
    Tensor img({set.channels, set.height, set.width});
    for (float& v : img.data()) v = static_cast<float>(rng.normal());
    set.images.push_back(std::move(img));
  }
  return set;
}

}  // namespace snp
