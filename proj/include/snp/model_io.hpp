// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_MODEL_IO_HPP
#define SNP_MODEL_IO_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "snp/model.hpp"

namespace snp {

// .snpm layout:
//   "SNPM" | u32 version=1 | u64 header length | JSON header | pad to 64
//   | tensor payloads (little-endian f32), each 64-byte aligned.
// Header: {config, tensor_count, tensors: [{name, shape, offset, length}]},
// offsets relative to the start of the payload region.
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::size_t kPayloadAlign = 64;

std::string serialize_model(const ModelBundle& model);
ModelBundle deserialize_model(std::string_view bytes);

void save_model(const ModelBundle& model, const std::string& path);
ModelBundle load_model(const std::string& path);

// .snpc layout: "SNPC" | u32 version=1 | u32 count | u32 C | u32 H | u32 W
//   | count·C·H·W little-endian f32.
inline constexpr std::uint32_t kCalibVersion = 1;
inline constexpr std::size_t kDefaultCalibImages = 64;

struct CalibrationSet {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Tensor> images;  // each [C×H×W]
};

std::string serialize_calibration(const CalibrationSet& set);
CalibrationSet deserialize_calibration(std::string_view bytes);

void save_calibration(const CalibrationSet& set, const std::string& path);
CalibrationSet load_calibration(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace snp

#endif  // SNP_MODEL_IO_HPP
