#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "yolospp/checks/oracles.hpp"
#include "yolospp/errors.hpp"
#include "yolospp/network.hpp"
#include "yolospp/weights_io.hpp"

namespace yolospp {
namespace {

Tensor random_image(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Tensor t = Tensor::feature_map(3, side, side);
  for (auto& v : t.data()) v = static_cast<Real>(u(rng));
  return t;
}

TEST(Forward, Yolov3AtTwoFiftySix) {
  const ModelGraph g = builtin_graph(Variant::yolov3, 80, 256);
  const Network net = random_init(g, 1);
  const auto heads = forward(net, random_image(256, 1));
  ASSERT_EQ(heads.size(), 3u);
  EXPECT_EQ(heads[0].grid_width, 8);
  EXPECT_EQ(heads[0].stride, 32);
  EXPECT_EQ(heads[0].raw.shape(), (Shape{255, 8, 8}));
  EXPECT_EQ(heads[1].raw.shape(), (Shape{255, 16, 16}));
  EXPECT_EQ(heads[2].raw.shape(), (Shape{255, 32, 32}));
  EXPECT_EQ(heads[2].stride, 8);
  EXPECT_EQ(heads[0].anchors[0], (Anchor{116, 90}));
  for (const HeadOutput& h : heads)
    for (Real v : h.raw.data()) ASSERT_TRUE(std::isfinite(v));
}

TEST(Forward, SppTenClassesAtSixForty) {
  const ModelGraph g = builtin_graph(Variant::yolov3_spp, 10, 640);
  const Network net = random_init(g, 2);
  const auto heads = forward(net, random_image(640, 2));
  ASSERT_EQ(heads.size(), 3u);
  EXPECT_EQ(heads[0].raw.shape(), (Shape{45, 20, 20}));
  EXPECT_EQ(heads[1].raw.shape(), (Shape{45, 40, 40}));
  EXPECT_EQ(heads[2].raw.shape(), (Shape{45, 80, 80}));
  for (const HeadOutput& h : heads) EXPECT_EQ(h.values_per_anchor(), 15);
}

TEST(Forward, ZeroWeightsGiveHeadBiases) {
  const ModelGraph g = builtin_graph(Variant::yolov3_tiny, 3, 64);
  Network net = Network::zeros(g);
  for (int i : g.conv_layers()) {
    ConvParams& p = net.conv(i);
    std::fill(p.rolling_variance.begin(), p.rolling_variance.end(), Real(1));
    for (std::size_t f = 0; f < p.biases.size(); ++f) p.biases[f] = Real(0.01) * static_cast<Real>(f);
  }
  net.mark_parameterized();
  for (const HeadOutput& h : forward(net, random_image(64, 3))) {
    const ConvParams& head = net.conv(h.layer - 1);
    for (int c = 0; c < h.raw.channels(); ++c)
      for (Real v : h.raw.channel(c)) ASSERT_EQ(v, head.biases[static_cast<std::size_t>(c)]);
  }
}

TEST(Forward, UnparameterizedIsUsageError) {
  const Network net(builtin_graph(Variant::yolov3_tiny, 1, 64));
  EXPECT_THROW(forward(net, random_image(64, 0)), UsageError);
  GradTape tape;
  EXPECT_THROW(forward(net, random_image(64, 0), tape), UsageError);
}

TEST(Forward, RejectsIndivisibleOrMismatchedImage) {
  const Network net = random_init(builtin_graph(Variant::yolov3_tiny, 1, 64), 0);
  EXPECT_THROW(forward(net, random_image(48, 0)), ValidationError);
  EXPECT_THROW(forward(net, Tensor::feature_map(1, 64, 64)), ShapeError);
}

TEST(Forward, DeterministicAndScaleEquivariant) {
  const ModelGraph g = builtin_graph(Variant::yolov3_tiny, 2, 64);
  const Network net = random_init(g, 4);
  const auto a = forward(net, random_image(64, 4));
  const auto b = forward(net, random_image(64, 4));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].raw, b[i].raw);
  const auto big = forward(net, random_image(128, 4));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(big[i].grid_width, 2 * a[i].grid_width);
    EXPECT_EQ(big[i].grid_height, 2 * a[i].grid_height);
  }
}

TEST(Forward, TapedAndDetectionPassesAgree) {
  const ModelGraph g = builtin_graph(Variant::yolov3_tiny, 2, 64);
  const Network net = random_init(g, 8);
  const Tensor img = random_image(64, 8);
  GradTape tape;
  const auto taped = make_heads(g, forward(net, img, tape));
  const auto plain = forward(net, img);
  ASSERT_EQ(taped.size(), plain.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    ASSERT_EQ(taped[i].raw.shape(), plain[i].raw.shape());
    for (std::size_t k = 0; k < plain[i].raw.size(); ++k) ASSERT_NEAR(taped[i].raw[k], plain[i].raw[k], 1e-9);
  }
}

TEST(Backward, RequiresRecordedTape) {
  GradTape tape;
  EXPECT_THROW(backward(tape, {}), UsageError);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const ModelGraph g = builtin_graph(Variant::yolov3_tiny, 2, 64);
  const Network net = random_init(g, 3);
  GradTape tape;
  const auto outs = forward(net, random_image(64, 3), tape);
  std::vector<Tensor> zeros;
  for (const Tensor& t : outs) zeros.emplace_back(t.shape());
  const NetworkGradients grads = backward(tape, zeros);
  for (const ConvGrads& c : grads.conv) {
    for (Real v : c.weights) ASSERT_EQ(v, 0);
    for (Real v : c.biases) ASSERT_EQ(v, 0);
  }
  const NetworkGradients again = backward(tape, zeros);
  EXPECT_EQ(again.input, grads.input);
}

TEST(Spp, ShapeAndConstantInput) {
  const Tensor out = spp_forward(Tensor::feature_map(512, 20, 20));
  EXPECT_EQ(out.shape(), (Shape{2048, 20, 20}));
  const Tensor c = spp_forward(Tensor::feature_map(2, 3, 5, Real(1.25)));
  for (Real v : c.data()) EXPECT_EQ(v, Real(1.25));
}

TEST(Spp, PeakSpreadsOverWindow) {
  Tensor in = Tensor::feature_map(1, 13, 13);
  in.at(0, 6, 6) = 1;
  const Tensor out = spp_forward(in);
  const std::vector<int> channels{1, 1, 1, 1};
  const auto branches = split_channels(out, channels);
  EXPECT_EQ(branches[0], in);
  for (std::size_t b = 1; b < 4; ++b) {
    const int k = kSppKernels[b - 1];
    EXPECT_EQ(branches[b], checks::window_scan_same(in, k));
    int lit = 0;
    for (Real v : branches[b].data()) lit += v == 1;
    EXPECT_EQ(lit, k * k);
  }
}

TEST(Spp, BranchesDominateIdentityOnRandomShapes) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<int> e(1, 17), c(1, 4);
    const int ch = c(rng);
    const int h = e(rng), w = e(rng);
    Tensor in = Tensor::feature_map(ch, h, w);
    std::normal_distribution<double> n;
    for (auto& v : in.data()) v = static_cast<Real>(n(rng));
    const Tensor out = spp_forward(in);
    ASSERT_EQ(out.shape(), (Shape{4 * ch, h, w}));
    const std::vector<int> split{ch, ch, ch, ch};
    const auto branches = split_channels(out, split);
    for (std::size_t b = 1; b < 4; ++b) {
      ASSERT_EQ(branches[b], checks::window_scan_same(in, kSppKernels[b - 1]));
      for (std::size_t i = 0; i < in.size(); ++i) ASSERT_GE(branches[b][i], in[i]);
    }
  }
}

TEST(CountParameters, OrderingAndSppDelta) {
  const auto tiny = count_parameters(builtin_graph(Variant::yolov3_tiny, 10));
  const auto v3 = count_parameters(builtin_graph(Variant::yolov3, 10));
  const auto spp_graph = builtin_graph(Variant::yolov3_spp, 10);
  const auto spp = count_parameters(spp_graph);
  EXPECT_LT(tiny.total, v3.total);
  EXPECT_LT(v3.total, spp.total);
  const auto block = inserted_block(builtin_graph(Variant::yolov3, 10), spp_graph);
  ASSERT_TRUE(block.has_value());
  std::size_t block_params = 0;
  for (int i = block->first; i < block->second; ++i) {
    if (spp_graph.layer(i).kind == LayerKind::maxpool) { EXPECT_EQ(spp.per_layer[static_cast<std::size_t>(i)], 0u); }
    block_params += spp.per_layer[static_cast<std::size_t>(i)];
  }
  EXPECT_EQ(spp.total - v3.total, block_params);
  EXPECT_EQ(block_params, 2048u * 512u + 4u * 512u);
}

TEST(CountParameters, AgreesWithWeightFileSize) {
  const ModelGraph g = builtin_graph(Variant::yolov3_tiny, 10, 64);
  EXPECT_EQ(save_weights(random_init(g, 0)).size(), 20 + 4 * count_parameters(g).total);
}

TEST(OutputLayers, YoloOrLast) {
  const ModelGraph g = builtin_graph(Variant::yolov3, 4, 64);
  EXPECT_EQ(output_layers(g), g.yolo_layers());
  const ModelGraph plain = parse_cfg("[net]\nwidth=8\nheight=8\n[convolutional]\nfilters=2\nsize=1\n[maxpool]\n");
  EXPECT_EQ(output_layers(plain), std::vector<int>{1});
}

}  // namespace
}  // namespace yolospp
