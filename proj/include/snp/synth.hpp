// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_SYNTH_HPP
#define SNP_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "snp/model.hpp"
#include "snp/model_io.hpp"

namespace snp {

// splitmix64 stream with Box-Muller normals. Identical output on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  double uniform();  // in (0, 1)
  double normal();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<std::string> preset_names();
// Throws ArgumentError for an unknown preset.
ModelConfig preset_config(std::string_view preset);

/// Random model: weights and biases ~ N(0, std²), LayerNorm gains 1 + noise,
/// class token and positional embedding ~ N(0, std²).
ModelBundle synth_model(const ModelConfig& config, std::uint64_t seed, float std = 0.02f);

// `count` images of N(0, 1) pixels shaped for `config`.
CalibrationSet synth_calibration(const ModelConfig& config, std::size_t count, std::uint64_t seed);

}  // namespace snp

#endif  // SNP_SYNTH_HPP
