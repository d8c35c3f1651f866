// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "snp/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "snp/errors.hpp"

namespace snp {

static_assert(std::endian::native == std::endian::little,
              "model files are written with native little-endian stores");

using nlohmann::json;

namespace {

constexpr char kModelMagic[4] = {'S', 'N', 'P', 'M'};
constexpr char kCalibMagic[4] = {'S', 'N', 'P', 'C'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t pos) {
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  return value;
}

std::size_t align_up(std::size_t v, std::size_t a) { return (v + a - 1) / a * a; }

void append_floats(std::string& out, std::span<const float> values) {
  out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
}

}  // namespace

std::string serialize_model(const ModelBundle& model) {
  validate_bundle(model);
  json index = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : model.tensors) {
    const std::size_t length = t.numel() * sizeof(float);
    index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"length", length}});
    offset = align_up(offset + length, kPayloadAlign);
  }
  const std::string header =
      json{{"config", config_to_json(model.config)}, {"tensor_count", model.tensors.size()},
           {"tensors", index}}
          .dump();

  std::string out(kModelMagic, 4);
  put<std::uint32_t>(out, kModelVersion);
  put<std::uint64_t>(out, header.size());
  out += header;
  out.resize(align_up(out.size(), kPayloadAlign), '\0');
  const std::size_t base = out.size();
  for (const auto& [name, t] : model.tensors) {
    out.resize(align_up(out.size() - base, kPayloadAlign) + base, '\0');
    append_floats(out, t.data());
  }
  return out;
}

ModelBundle deserialize_model(std::string_view bytes) {
  if (bytes.size() < 16) throw TruncatedError("model file truncated: missing preamble");
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) throw FormatError("not a model file: bad magic");
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kModelVersion) {
    throw FormatError("unsupported model file version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(bytes, 8);
  if (header_len > bytes.size() - 16) throw TruncatedError("model file truncated inside header");

  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("model header is not valid JSON: ") + e.what());
  }

  const std::size_t base = align_up(16 + header_len, kPayloadAlign);
  ModelBundle model;
  try {
    model.config = config_from_json(header.at("config"));
    const auto& index = header.at("tensors");
    const auto count = header.at("tensor_count").get<std::size_t>();
    if (count != index.size()) {
      throw IntegrityError("header declares " + std::to_string(count) + " tensors but indexes " +
                           std::to_string(index.size()));
    }
    std::size_t expected_offset = 0;
    for (const auto& entry : index) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto length = entry.at("length").get<std::size_t>();
      if (length != shape_numel(shape) * sizeof(float)) {
        throw IntegrityError("tensor '" + name + "' length does not match its shape");
      }
      if (offset != expected_offset) {
        throw IntegrityError("tensor '" + name + "' has unexpected payload offset");
      }
      if (base + offset + length > bytes.size()) {
        throw TruncatedError("model file truncated inside tensor '" + name + "'");
      }
      std::vector<float> data(shape_numel(shape));
      std::memcpy(data.data(), bytes.data() + base + offset, length);
      if (!model.tensors.emplace(name, Tensor(shape, std::move(data))).second) {
        throw IntegrityError("duplicate tensor '" + name + "'");
      }
      expected_offset = align_up(offset + length, kPayloadAlign);
    }
    const std::size_t payload_end = index.empty() ? 0 : index.back().at("offset").get<std::size_t>() +
                                                             index.back().at("length").get<std::size_t>();
    if (base + payload_end != bytes.size()) {
      throw IntegrityError("payload size does not match the tensor index");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed tensor index: ") + e.what());
  } catch (const DimensionError& e) {
    throw IntegrityError(std::string("bad tensor shape in index: ") + e.what());
  }
  validate_bundle(model);
  return model;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

void save_model(const ModelBundle& model, const std::string& path) {
  write_file(path, serialize_model(model));
}

ModelBundle load_model(const std::string& path) { return deserialize_model(read_file(path)); }

std::string serialize_calibration(const CalibrationSet& set) {
  const Shape shape{set.channels, set.height, set.width};
  std::string out(kCalibMagic, 4);
  put<std::uint32_t>(out, kCalibVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.images.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.channels));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.height));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.width));
  for (const Tensor& img : set.images) {
    if (img.shape() != shape) {
      throw DimensionError("calibration image " + shape_str(img.shape()) + " does not match " +
                           shape_str(shape));
    }
    append_floats(out, img.data());
  }
  return out;
}

CalibrationSet deserialize_calibration(std::string_view bytes) {
  if (bytes.size() < 24) throw TruncatedError("calibration file truncated: missing preamble");
  if (std::memcmp(bytes.data(), kCalibMagic, 4) != 0) {
    throw FormatError("not a calibration file: bad magic");
  }
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kCalibVersion) {
    throw FormatError("unsupported calibration file version " + std::to_string(version));
  }
  CalibrationSet set;
  const std::size_t count = get<std::uint32_t>(bytes, 8);
  set.channels = get<std::uint32_t>(bytes, 12);
  set.height = get<std::uint32_t>(bytes, 16);
  set.width = get<std::uint32_t>(bytes, 20);
  if (set.channels == 0 || set.height == 0 || set.width == 0) {
    throw FormatError("calibration image extents must be positive");
  }
  const std::size_t per_image = set.channels * set.height * set.width;
  const std::size_t need = 24 + count * per_image * sizeof(float);
  if (bytes.size() < need) throw TruncatedError("calibration file truncated inside image data");
  if (bytes.size() > need) throw IntegrityError("calibration file has trailing bytes");
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<float> data(per_image);
    std::memcpy(data.data(), bytes.data() + 24 + i * per_image * sizeof(float),
                per_image * sizeof(float));
    set.images.emplace_back(Shape{set.channels, set.height, set.width}, std::move(data));
  }
  return set;
}

void save_calibration(const CalibrationSet& set, const std::string& path) {
  write_file(path, serialize_calibration(set));
}

CalibrationSet load_calibration(const std::string& path) {
  return deserialize_calibration(read_file(path));
}

}  // namespace snp
