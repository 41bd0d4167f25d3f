#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "gyolo/analysis.hpp"
#include "gyolo/arch.hpp"
#include "gyolo/half.hpp"
#include "gyolo/rng.hpp"
#include "gyolo/weights.hpp"

namespace gyolo {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gyolo_test_weights";
  fs::create_directories(dir);
  return dir / name;
}

WeightContainer sample() {
  WeightContainer c;
  c.add({"node0.conv.weight", DType::F32, {2, 1, 1, 2}, {1.0f, -2.5f, 3.25f, 0.0f}});
  c.add({"node0.bn.gamma", DType::F32, {2}, {1.0f, 1.0f}});
  c.add({"half", DType::F16, {3}, {0.5f, -65504.0f, 0.0009765625f}});
  c.add({"scalar", DType::F32, {}, {42.0f}});
  return c;
}

TEST(Gwtc, EmptyContainerIsTwelveBytes) {
  const std::vector<std::uint8_t> bytes = serialize(WeightContainer{});
  const std::vector<std::uint8_t> expect{'G', 'W', 'T', 'C', 1, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(bytes, expect);
  const fs::path p = temp_file("empty.gwtc");
  save(WeightContainer{}, p);
  EXPECT_EQ(fs::file_size(p), 12u);
  EXPECT_TRUE(load(p).empty());
}

TEST(Gwtc, SingleTwoByTwoTensorIsFortyThreeBytes) {
  WeightContainer c;
  c.add({"w", DType::F32, {2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}});
  const std::vector<std::uint8_t> bytes = serialize(c);
  ASSERT_EQ(bytes.size(), 43u);
  EXPECT_EQ(serialized_size(c), 43u);
  // name_len, name, dtype, ndim, dims
  const std::vector<std::uint8_t> entry_head{1, 0, 0, 0, 'w', 0, 2, 2, 0, 0, 0, 2, 0, 0, 0};
  EXPECT_TRUE(std::equal(entry_head.begin(), entry_head.end(), bytes.begin() + 12));
  float v = 0.0f;
  std::memcpy(&v, bytes.data() + 12 + 15 + 12, 4);
  EXPECT_EQ(v, 4.0f);
}

TEST(Gwtc, RoundTripPreservesEntriesOrderAndBytes) {
  const WeightContainer c = sample();
  const fs::path p = temp_file("sample.gwtc");
  save(c, p);
  const WeightContainer back = load(p);
  EXPECT_EQ(back, c);
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back.entries()[2].name, "half");
  EXPECT_EQ(serialize(back), serialize(c));
  EXPECT_EQ(fs::file_size(p), serialized_size(c));
}

TEST(Gwtc, RejectsCorruptData) {
  const std::vector<std::uint8_t> good = serialize(sample());

  std::vector<std::uint8_t> magic = good;
  magic[0] = 'X';
  EXPECT_THROW(deserialize(magic), WeightFormatError);

  std::vector<std::uint8_t> version = good;
  version[4] = 2;
  EXPECT_THROW(deserialize(version), WeightFormatError);

  for (std::size_t cut : {std::size_t{3}, std::size_t{11}, std::size_t{20}, good.size() - 1}) {
    const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + cut);
    EXPECT_THROW(deserialize(truncated), WeightFormatError) << cut;
  }

  std::vector<std::uint8_t> trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(deserialize(trailing), WeightFormatError);

  std::vector<std::uint8_t> dtype = good;
  dtype[12 + 4 + std::strlen("node0.conv.weight")] = 7;
  EXPECT_THROW(deserialize(dtype), WeightFormatError);

  // Two entries with the same name: rewrite the second name to match the
  // first one of equal length.
  WeightContainer twins;
  twins.add({"aa", DType::F32, {1}, {1.0f}});
  twins.add({"ab", DType::F32, {1}, {2.0f}});
  std::vector<std::uint8_t> dup = serialize(twins);
  const std::size_t second_name = 12 + (4 + 2 + 1 + 1 + 4 + 4) + 4;
  ASSERT_EQ(dup[second_name + 1], 'b');
  dup[second_name + 1] = 'a';
  EXPECT_THROW(deserialize(dup), WeightFormatError);
}

TEST(Gwtc, ContainerRejectsDuplicatesAndBadCounts) {
  WeightContainer c;
  c.add({"a", DType::F32, {2}, {1.0f, 2.0f}});
  EXPECT_THROW(c.add({"a", DType::F32, {1}, {1.0f}}), WeightFormatError);
  EXPECT_THROW(c.add({"b", DType::F32, {3}, {1.0f}}), WeightFormatError);
}

TEST(Gwtc, LoadMissingFileFails) {
  EXPECT_ANY_THROW(load(temp_file("does_not_exist.gwtc")));
}

TEST(InitRandom, DeterministicBatchnormAndBounds) {
  const ArchGraph g = make_graph(Family::GYOLOv11, Scale::N, 9);
  const WeightContainer a = init_random(g, 0);
  EXPECT_EQ(serialize(a), serialize(init_random(g, 0)));
  for (const WeightEntry& e : a.entries()) {
    if (e.name.ends_with(".gamma") || e.name.ends_with(".var")) {
      for (float v : e.values) ASSERT_EQ(v, 1.0f) << e.name;
    } else if (e.name.ends_with(".beta") || e.name.ends_with(".mean")) {
      for (float v : e.values) ASSERT_EQ(v, 0.0f) << e.name;
    } else if (e.name.ends_with(".weight")) {
      ASSERT_EQ(e.dims.size(), 4u);
      const double fan_in = static_cast<double>(e.dims[1]) * e.dims[2] * e.dims[3];
      const double bound = std::sqrt(6.0 / fan_in);
      for (float v : e.values) ASSERT_LE(std::abs(v), bound * (1 + 1e-6)) << e.name;
    }
  }
}

TEST(InitRandom, LearnableCountMatchesAnalyticCount) {
  for (Family f : kAllFamilies) {
    const ArchGraph g = make_graph(f, Scale::N, 9);
    const WeightContainer c = init_random(g, 3);
    EXPECT_EQ(static_cast<std::int64_t>(c.learnable_elements()), count_params(g).total);
    EXPECT_GT(c.total_elements(), c.learnable_elements());
  }
  const WeightContainer ghost = init_random(make_graph(Family::GYOLOv11, Scale::N, 9), 0);
  EXPECT_NEAR(ghost.learnable_elements() / 1e6, 0.676, 0.676 * 0.01);
}

TEST(InitRandom, ZeroWeightsOption) {
  const WeightContainer z = init_random(make_graph(Family::GYOLOv11, Scale::N, 9), 0, true);
  for (const WeightEntry& e : z.entries()) {
    if (e.name.ends_with(".weight")) {
      for (float v : e.values) ASSERT_EQ(v, 0.0f);
    }
  }
}

TEST(HalfPrecision, RelativeErrorOnUniformSamples) {
  Xoshiro256pp rng(99);
  double worst = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    const float x = rng.uniform_symmetric(1.0f);
    if (std::abs(x) < 6.2e-5f) continue;  // below the normal binary16 range
    worst = std::max(worst, std::abs(static_cast<double>(round_to_half(x)) - x) / std::abs(x));
  }
  EXPECT_LT(worst, 1e-3);
  EXPECT_LE(worst, std::ldexp(1.0, -11) * (1 + 1e-9));
}

TEST(HalfPrecision, BitPatterns) {
  EXPECT_EQ(float_to_half_bits(1.0f), 0x3C00);
  EXPECT_EQ(float_to_half_bits(-2.0f), 0xC000);
  EXPECT_EQ(float_to_half_bits(-0.0f), 0x8000);
  EXPECT_EQ(float_to_half_bits(65504.0f), 0x7BFF);
  EXPECT_EQ(float_to_half_bits(65520.0f), 0x7C00);
  EXPECT_EQ(float_to_half_bits(std::numeric_limits<float>::infinity()), 0x7C00);
  EXPECT_EQ(float_to_half_bits(std::ldexp(1.0f, -24)), 0x0001);
  EXPECT_EQ(float_to_half_bits(std::ldexp(1.0f, -25)), 0x0000);
  EXPECT_EQ(float_to_half_bits(std::ldexp(3.0f, -25)), 0x0002);
  EXPECT_EQ(float_to_half_bits(std::ldexp(1.0f, -14)), 0x0400);
  EXPECT_EQ(float_to_half_bits(1.0f + std::ldexp(1.0f, -11)), 0x3C00);
  EXPECT_EQ(float_to_half_bits(1.0f + std::ldexp(3.0f, -11)), 0x3C02);
  const std::uint16_t nan = float_to_half_bits(std::numeric_limits<float>::quiet_NaN());
  EXPECT_EQ(nan & 0x7C00, 0x7C00);
  EXPECT_NE(nan & 0x03FF, 0);
  for (std::uint32_t b = 0; b < 0x10000; ++b) {
    const auto h = static_cast<std::uint16_t>(b);
    if ((h & 0x7C00) == 0x7C00 && (h & 0x03FF) != 0) continue;
    ASSERT_EQ(float_to_half_bits(half_bits_to_float(h)), h) << b;
  }
}

TEST(HalfPrecision, RoundtripContainer) {
  const WeightContainer h = halfprec_roundtrip(sample());
  for (const WeightEntry& e : h.entries()) {
    EXPECT_EQ(e.dtype, DType::F16);
    for (float v : e.values) EXPECT_EQ(round_to_half(v), v);
  }
  EXPECT_EQ(h.entries()[0].values[0], 1.0f);
  EXPECT_EQ(deserialize(serialize(h)), h);
}

TEST(HalfPrecision, BaseNanoSerializedSize) {
  const WeightContainer c =
      halfprec_roundtrip(init_random(make_graph(Family::YOLOv11, Scale::N, 9), 0));
  const double mb = serialized_size(c) / 1e6;
  EXPECT_NEAR(mb, 5.2, 5.2 * 0.02);
  EXPECT_EQ(serialized_size(c), serialize(c).size());
}

}  // namespace
}  // namespace gyolo
