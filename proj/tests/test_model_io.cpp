// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdint>
#include <cstring>
#include <functional>

#include "json.hpp"
#include "snp/errors.hpp"
#include "snp/model_io.hpp"
#include "test_util.hpp"

namespace snp {
namespace {

using nlohmann::json;

std::size_t align64(std::size_t n) { return (n + 63) / 64 * 64; }

// Rewrites the JSON header of a serialized model, keeping the payload.
std::string with_header(const std::string& bytes, const std::function<void(json&)>& edit) {
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  json header = json::parse(bytes.substr(16, len));
  const std::string payload = bytes.substr(align64(16 + len));
  edit(header);
  const std::string h = header.dump();
  std::string out = bytes.substr(0, 8);
  const std::uint64_t new_len = h.size();
  out.append(reinterpret_cast<const char*>(&new_len), 8);
  out += h;
  out.resize(align64(out.size()), '\0');
  return out + payload;
}

TEST(ModelIo, RoundTripIsByteIdentical) {
  const ModelBundle m = testutil::small_model(1);
  const std::string bytes = serialize_model(m);
  EXPECT_EQ(bytes.substr(0, 4), "SNPM");
  const ModelBundle back = deserialize_model(bytes);
  EXPECT_EQ(back.config, m.config);
  for (const auto& [name, t] : m.tensors) EXPECT_TRUE(back.at(name).bit_equal(t)) << name;
  EXPECT_EQ(serialize_model(back), bytes);
}

TEST(ModelIo, HeaderRewriteHelperIsFaithful) {
  const std::string bytes = serialize_model(testutil::small_model(1));
  EXPECT_EQ(with_header(bytes, [](json&) {}), bytes);
}

TEST(ModelIo, TruncationDetected) {
  const std::string bytes = serialize_model(testutil::small_model(1));
  EXPECT_THROW(deserialize_model(bytes.substr(0, 10)), TruncatedError);
  EXPECT_THROW(deserialize_model(bytes.substr(0, 40)), TruncatedError);
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 1)), TruncatedError);
}

TEST(ModelIo, BadMagicAndVersion) {
  std::string bytes = serialize_model(testutil::small_model(1));
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_model(bad), FormatError);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(deserialize_model(bad), FormatError);
}

TEST(ModelIo, IntegrityErrors) {
  const std::string bytes = serialize_model(testutil::small_model(1));
  EXPECT_THROW(deserialize_model(bytes + std::string(64, '\0')), IntegrityError);
  EXPECT_THROW(deserialize_model(with_header(bytes, [](json& h) { h["tensor_count"] = 3; })),
               IntegrityError);
  EXPECT_THROW(deserialize_model(with_header(bytes, [](json& h) { h["tensors"][1]["offset"] = 4; })),
               IntegrityError);
  EXPECT_THROW(deserialize_model(with_header(bytes, [](json& h) { h["tensors"][0]["length"] = 4; })),
               IntegrityError);
  EXPECT_THROW(deserialize_model(with_header(bytes, [](json& h) {
                 h["tensors"][1]["name"] = h["tensors"][0]["name"];
               })),
               IntegrityError);
}

TEST(ModelIo, ShapeMismatchAgainstConfig) {
  const std::string bytes = serialize_model(testutil::small_model(1));
  // Claim a narrower embedding: every stored shape now disagrees with the config.
  EXPECT_THROW(deserialize_model(with_header(bytes, [](json& h) { h["config"]["embed_dim"] = 24; })),
               ShapeError);
  EXPECT_THROW(deserialize_model(with_header(bytes, [](json& h) { h["config"] = "oops"; })), FormatError);
}

TEST(ModelIo, FileRoundTrip) {
  const auto dir = testutil::scratch_dir("model_io");
  const ModelBundle m = testutil::small_model(3);
  save_model(m, (dir / "m.snpm").string());
  EXPECT_EQ(serialize_model(load_model((dir / "m.snpm").string())), serialize_model(m));
  EXPECT_THROW(load_model((dir / "missing.snpm").string()), FormatError);
}

TEST(CalibIo, RoundTripAndErrors) {
  const CalibrationSet set = synth_calibration(preset_config("tiny-desk"), 3, 5);
  const std::string bytes = serialize_calibration(set);
  const CalibrationSet back = deserialize_calibration(bytes);
  ASSERT_EQ(back.images.size(), 3u);
  EXPECT_TRUE(back.images[2].bit_equal(set.images[2]));
  EXPECT_EQ(serialize_calibration(back), bytes);
  EXPECT_THROW(deserialize_calibration(bytes.substr(0, bytes.size() - 4)), TruncatedError);
  EXPECT_THROW(deserialize_calibration(bytes + "x"), IntegrityError);
  std::string bad = bytes;
  bad[0] = 'Q';
  EXPECT_THROW(deserialize_calibration(bad), FormatError);
}

}  // namespace
}  // namespace snp
