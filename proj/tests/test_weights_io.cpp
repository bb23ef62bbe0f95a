#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "yolospp/errors.hpp"
#include "yolospp/weights_io.hpp"

namespace yolospp {
namespace {

ModelGraph one_conv_graph(bool bn = true) {
  return parse_cfg(std::string("[net]\nwidth=32\nheight=32\nchannels=3\n[convolutional]\n") +
                   (bn ? "batch_normalize=1\n" : "") + "filters=32\nsize=3\nstride=1\npad=1\nactivation=leaky\n");
}

template <typename T>
void append(std::vector<std::byte>& out, T value) {
  std::byte raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

std::vector<std::byte> header_bytes(std::int32_t major, std::int32_t minor, std::uint64_t seen, bool wide) {
  std::vector<std::byte> out;
  append(out, major);
  append(out, minor);
  append(out, std::int32_t{0});
  if (wide)
    append(out, seen);
  else
    append(out, static_cast<std::uint32_t>(seen));
  return out;
}

// Header plus `floats` parameters; variances are the only ones that must be positive.
std::vector<std::byte> weight_file(std::int32_t major, std::int32_t minor, bool wide, std::size_t floats) {
  auto out = header_bytes(major, minor, 12345, wide);
  for (std::size_t i = 0; i < floats; ++i) append(out, static_cast<float>(i < 32 ? 0.0f : 1.0f));
  return out;
}

TEST(Weights, BatchNormLayerConsumes992Floats) {
  const ModelGraph g = one_conv_graph();
  EXPECT_EQ(count_parameters(g).total, 992u);
  const Network net = load_weights(g, weight_file(0, 2, true, 992));
  EXPECT_EQ(net.conv(0).weight_count(), 864u);
  EXPECT_EQ(net.conv(0).parameter_count(), 992u);
  EXPECT_EQ(net.header().seen, 12345u);
  EXPECT_EQ(count_parameters(one_conv_graph(false)).total, 32u + 864u);
}

TEST(Weights, LayoutOrderBetaGammaMeanVarianceWeights) {
  const ModelGraph g = one_conv_graph();
  auto bytes = header_bytes(0, 2, 0, true);
  for (int i = 0; i < 992; ++i) append(bytes, static_cast<float>(i + 1));
  const Network net = load_weights(g, bytes);
  EXPECT_EQ(net.conv(0).biases[0], 1);
  EXPECT_EQ(net.conv(0).scales[0], 33);
  EXPECT_EQ(net.conv(0).rolling_mean[0], 65);
  EXPECT_EQ(net.conv(0).rolling_variance[0], 97);
  EXPECT_EQ(net.conv(0).weights[0], 129);
  EXPECT_EQ(net.conv(0).weights[863], 992);
}

TEST(Weights, VersionHeaderFieldWidths) {
  const ModelGraph g = one_conv_graph();
  const auto modern = weight_file(0, 2, true, 992);
  EXPECT_EQ(modern.size(), 20u + 992u * 4u);
  const Network a = load_weights(g, modern);
  EXPECT_EQ(a.header(), (WeightsHeader{0, 2, 0, 12345}));
  EXPECT_EQ(header_size(a.header()), 20u);

  const auto legacy = weight_file(0, 1, false, 992);
  EXPECT_EQ(legacy.size(), 16u + 992u * 4u);
  const Network b = load_weights(g, legacy);
  EXPECT_EQ(b.header(), (WeightsHeader{0, 1, 0, 12345}));
  EXPECT_EQ(header_size(b.header()), 16u);
  EXPECT_EQ(a.conv(0), b.conv(0));

  // The 1.0 (major*10+minor = 10) header carries a wide counter as well.
  EXPECT_EQ(load_weights(g, weight_file(1, 0, true, 992)).header().major, 1);
}

TEST(Weights, ShortFileRejected) {
  const ModelGraph g = one_conv_graph();
  const auto full = weight_file(0, 2, true, 992);
  for (std::size_t n : {0, 5, 12, 19}) {
    try {
      load_weights(g, std::span(full.data(), n));
      FAIL() << n;
    } catch (const LoadError& e) {
      EXPECT_EQ(e.layer(), -1);
    }
  }
}

TEST(Weights, TruncationAndTrailingBytesNameTheLayer) {
  const ModelGraph g = one_conv_graph();
  auto bytes = weight_file(0, 2, true, 992);
  try {
    load_weights(g, std::span(bytes.data(), bytes.size() - 4));
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.layer(), 0);
  }
  bytes.push_back(std::byte{0});
  EXPECT_THROW(load_weights(g, bytes), LoadError);
}

TEST(Weights, NonFiniteAndNonPositiveVarianceRejected) {
  const ModelGraph g = one_conv_graph();
  auto bytes = weight_file(0, 2, true, 992);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  auto with_nan = bytes;
  std::memcpy(with_nan.data() + 20 + 4 * 500, &nan, 4);
  EXPECT_THROW(load_weights(g, with_nan), LoadError);
  auto zero_var = bytes;
  const float zero = 0;
  std::memcpy(zero_var.data() + 20 + 4 * 100, &zero, 4);
  EXPECT_THROW(load_weights(g, zero_var), LoadError);
}

TEST(Weights, ZeroNetworkSavesHeaderAndZeros) {
  const Network net = Network::zeros(one_conv_graph());
  const auto bytes = save_weights(net);
  ASSERT_EQ(bytes.size(), 20u + 992u * 4u);
  std::int32_t version[3];
  std::memcpy(version, bytes.data(), 12);
  EXPECT_EQ(version[0], 0);
  EXPECT_EQ(version[1], 2);
  EXPECT_EQ(version[2], 0);
  for (std::size_t i = 12; i < bytes.size(); ++i) ASSERT_EQ(bytes[i], std::byte{0});
}

TEST(Weights, RoundTripIsBitExact) {
  for (Variant v : {Variant::yolov3_tiny}) {
    const ModelGraph g = builtin_graph(v, 10, 64);
    const Network net = random_init(g, 99);
    const auto bytes = save_weights(net);
    EXPECT_EQ(bytes.size(), 20 + 4 * count_parameters(g).total);
    const Network back = load_weights(g, bytes);
    for (int i : g.conv_layers()) ASSERT_EQ(back.conv(i), net.conv(i));
    EXPECT_EQ(save_weights(back), bytes);
    EXPECT_EQ(save_weights(net), bytes);
  }
}

TEST(Weights, LegacyHeaderIsRewrittenAsModern) {
  const ModelGraph g = one_conv_graph();
  const Network net = load_weights(g, weight_file(0, 1, false, 992));
  const auto bytes = save_weights(net);
  EXPECT_EQ(bytes.size(), 20u + 992u * 4u);
  EXPECT_EQ(load_weights(g, bytes).conv(0), net.conv(0));
}

TEST(RandomInit, DeterministicAndSeedSensitive) {
  const ModelGraph g = builtin_graph(Variant::yolov3_tiny, 2, 64);
  const Network a = random_init(g, 5);
  const Network b = random_init(g, 5);
  const Network c = random_init(g, 6);
  EXPECT_EQ(save_weights(a), save_weights(b));
  EXPECT_NE(save_weights(a), save_weights(c));
  EXPECT_TRUE(a.parameterized());
}

TEST(RandomInit, FanInBoundsAndBatchNormDefaults) {
  const ModelGraph g = parse_cfg(
      "[net]\nwidth=32\nheight=32\nchannels=32\n"
      "[convolutional]\nbatch_normalize=1\nfilters=512\nsize=1\nstride=1\npad=1\nactivation=leaky\n"
      "[convolutional]\nbatch_normalize=1\nfilters=8\nsize=3\nstride=1\npad=1\nactivation=leaky\n");
  const Network net = random_init(g, 1);
  auto max_abs = [](const std::vector<Real>& w) {
    Real m = 0;
    for (Real v : w) m = std::max(m, std::abs(v));
    return m;
  };
  const Real bound_small_fan = Real(1) / std::sqrt(Real(32));
  const Real bound_large_fan = Real(1) / std::sqrt(Real(512 * 9));
  EXPECT_LE(max_abs(net.conv(0).weights), bound_small_fan);
  EXPECT_LE(max_abs(net.conv(1).weights), bound_large_fan);
  EXPECT_LT(max_abs(net.conv(1).weights), max_abs(net.conv(0).weights));
  for (int i : {0, 1}) {
    const ConvParams& p = net.conv(i);
    for (std::size_t f = 0; f < static_cast<std::size_t>(p.filters); ++f) {
      EXPECT_EQ(p.scales[f], 1);
      EXPECT_EQ(p.biases[f], 0);
      EXPECT_EQ(p.rolling_mean[f], 0);
      EXPECT_EQ(p.rolling_variance[f], 1);
    }
  }
}

}  // namespace
}  // namespace yolospp
