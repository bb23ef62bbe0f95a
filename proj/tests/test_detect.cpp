#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "yolospp/checks/oracles.hpp"
#include "yolospp/detect.hpp"
#include "yolospp/errors.hpp"
#include "yolospp/weights_io.hpp"

namespace yolospp {
namespace {

Real logit(double p) { return static_cast<Real>(std::log(p / (1 - p))); }

HeadOutput one_cell_head(int classes, int stride = 32, int grid = 1) {
  HeadOutput h;
  h.layer = 0;
  h.stride = stride;
  h.grid_width = grid;
  h.grid_height = grid;
  h.num_classes = classes;
  h.anchors = {{116, 90}, {156, 198}, {373, 326}};
  h.raw = Tensor::feature_map(3 * (5 + classes), grid, grid, Real(-30));
  return h;
}

void set_slot(HeadOutput& h, int anchor, int cy, int cx, std::initializer_list<Real> values) {
  int k = 0;
  for (Real v : values) h.raw.at(anchor * h.values_per_anchor() + k++, cy, cx) = v;
}

TEST(Letterbox, SquareAtTargetIsIdentity) {
  Tensor img = Tensor::feature_map(3, 64, 64, Real(0.2));
  img.at(1, 10, 20) = Real(0.9);
  const Letterboxed lb = letterbox(img, 64);
  EXPECT_EQ(lb.transform.scale, 1);
  EXPECT_EQ(lb.transform.pad_x, 0);
  EXPECT_EQ(lb.transform.pad_y, 0);
  EXPECT_EQ(lb.image, img);
}

TEST(Letterbox, TallImageIsPaddedHorizontally) {
  const Letterboxed lb = letterbox(Tensor::feature_map(3, 640, 320, Real(1)), 640);
  EXPECT_EQ(lb.transform.scale, 1);
  EXPECT_EQ(lb.transform.pad_x, 160);
  EXPECT_EQ(lb.transform.pad_y, 0);
  EXPECT_EQ(lb.image.at(0, 100, 10), kLetterboxFill);
  EXPECT_EQ(lb.image.at(0, 100, 300), 1);
}

TEST(Letterbox, RejectsBadTarget) {
  EXPECT_THROW(letterbox(Tensor::feature_map(3, 10, 10), 100), ValidationError);
  EXPECT_THROW(letterbox(Tensor::feature_map(3, 10, 10), 0), ValidationError);
}

TEST(Letterbox, RoundTripWithinOnePixel) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> side(20, 700);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = side(rng), w = side(rng);
    const Letterboxed lb = letterbox(Tensor::feature_map(3, h, w), 320);
    EXPECT_EQ(lb.image.shape(), (Shape{3, 320, 320}));
    const Box original{u(rng) * w, u(rng) * h, 1 + u(rng) * w / 2, 1 + u(rng) * h / 2};
    const Box back = lb.transform.to_original(lb.transform.to_input(original));
    EXPECT_NEAR(back.x, original.x, 1.0);
    EXPECT_NEAR(back.y, original.y, 1.0);
    EXPECT_NEAR(back.w, original.w, 1.0);
    EXPECT_NEAR(back.h, original.h, 1.0);
  }
}

TEST(Decode, ScoreIsObjectnessTimesClassProbability) {
  HeadOutput h = one_cell_head(2);
  set_slot(h, 0, 0, 0, {0, 0, 0, 0, 0, logit(0.8), logit(0.1)});
  const auto dets = decode(h, 0.3, {}, "img");
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_NEAR(dets[0].score, 0.4, 1e-12);
  EXPECT_EQ(dets[0].class_index, 0);
}

TEST(Decode, CellZeroAnchorBox) {
  HeadOutput h = one_cell_head(1);
  set_slot(h, 0, 0, 0, {0, 0, 0, 0, 10, 10});
  const auto dets = decode(h, 0.5, {}, "img");
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_DOUBLE_EQ(dets[0].box.x, 16);
  EXPECT_DOUBLE_EQ(dets[0].box.y, 16);
  EXPECT_DOUBLE_EQ(dets[0].box.w, 116);
  EXPECT_DOUBLE_EQ(dets[0].box.h, 90);
  EXPECT_EQ(dets[0].image_id, "img");
}

TEST(Decode, MapsThroughLetterboxTransform) {
  HeadOutput h = one_cell_head(1);
  set_slot(h, 0, 0, 0, {0, 0, 0, 0, 10, 10});
  const LetterboxTransform t{0.5, 4, 0};
  const auto dets = decode(h, 0.5, t, "img");
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_DOUBLE_EQ(dets[0].box.x, 24);
  EXPECT_DOUBLE_EQ(dets[0].box.w, 232);
}

TEST(Decode, HighThresholdOnZeroNetworkIsEmpty) {
  const ModelGraph g = builtin_graph(Variant::yolov3_tiny, 10, 64);
  Network net = Network::zeros(g);
  for (int i : g.conv_layers())
    std::fill(net.conv(i).rolling_variance.begin(), net.conv(i).rolling_variance.end(), Real(1));
  net.mark_parameterized();
  const Letterboxed lb = letterbox(Tensor::feature_map(3, 64, 64, Real(0.5)), 64);
  const auto heads = forward(net, lb.image);
  EXPECT_TRUE(postprocess(heads, 0.999, 0.45, lb.transform, "x").empty());
  std::size_t at_quarter = 0;
  for (const HeadOutput& h : heads)
    for (const Detection& d : decode(h, 0.25, lb.transform, "x")) {
      EXPECT_DOUBLE_EQ(d.score, 0.25);
      ++at_quarter;
    }
  EXPECT_EQ(at_quarter, 3u * (2 * 2 + 4 * 4));
}

TEST(Decode, CentersStayInsideTheirCellAndScoresFactorize) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0, 3);
  HeadOutput h = one_cell_head(3, 16, 4);
  for (auto& v : h.raw.data()) v = static_cast<Real>(n(rng));
  const auto dets = decode(h, 0.0, {}, "img");
  EXPECT_EQ(dets.size(), 3u * 16u);
  for (const Detection& d : dets) {
    const int cx = static_cast<int>(std::floor(d.box.x / 16));
    const int cy = static_cast<int>(std::floor(d.box.y / 16));
    EXPECT_GT(d.box.x, cx * 16.0);
    EXPECT_LT(d.box.x, (cx + 1) * 16.0);
    EXPECT_GT(d.box.y, cy * 16.0);
    EXPECT_LT(d.box.y, (cy + 1) * 16.0);
    EXPECT_GE(d.score, 0);
    EXPECT_LE(d.score, 1);
  }
}

TEST(Iou, Examples) {
  const Box a = Box::from_corners(0, 0, 2, 2);
  const Box b = Box::from_corners(1, 0, 3, 2);
  EXPECT_DOUBLE_EQ(iou(a, a), 1);
  EXPECT_DOUBLE_EQ(iou(a, Box::from_corners(5, 5, 6, 6)), 0);
  EXPECT_NEAR(iou(a, b), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(checks::grid_count_iou(a, b, 600), 1.0 / 3.0, 1e-2);
  EXPECT_EQ(iou(a, Box{1, 1, 0, 2}), 0);
}

TEST(Iou, SymmetricAndMatchesGridOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(0, 50), ext(1, 30);
  for (int trial = 0; trial < 60; ++trial) {
    const Box a{pos(rng), pos(rng), ext(rng), ext(rng)};
    const Box b{pos(rng), pos(rng), ext(rng), ext(rng)};
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_DOUBLE_EQ(iou(a, a), 1);
    EXPECT_GE(iou(a, b), 0);
    EXPECT_LE(iou(a, b), 1);
    EXPECT_NEAR(iou(a, b), checks::grid_count_iou(a, b, 400), 0.02);
  }
}

Detection det(int cls, double score, Box box, std::string image = "img") {
  return {std::move(image), cls, score, box};
}

TEST(Nms, Singleton) {
  const std::vector<Detection> one{det(0, 0.5, {10, 10, 4, 4})};
  EXPECT_EQ(nms(one, 0.45), one);
}

TEST(Nms, SuppressesOverlapAboveThreshold) {
  // Width 10 boxes offset by 2.5: IoU = 7.5 / 12.5 = 0.6.
  const Box a{10, 10, 10, 10};
  const Box b{12.5, 10, 10, 10};
  ASSERT_NEAR(iou(a, b), 0.6, 1e-12);
  const auto kept = nms({det(0, 0.8, b), det(0, 0.9, a)}, 0.45);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);
}

TEST(Nms, DifferentClassesBothSurvive) {
  const Box a{10, 10, 10, 10};
  EXPECT_EQ(nms({det(0, 0.9, a), det(1, 0.8, a)}, 0.45).size(), 2u);
  EXPECT_EQ(nms({det(0, 0.9, a, "x"), det(0, 0.8, a, "y")}, 0.45).size(), 2u);
}

TEST(Nms, SurvivorsSeparatedAndOrderIndependent) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> pos(0, 60), ext(5, 25);
  std::uniform_int_distribution<int> cls(0, 2), score_bin(0, 9);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Detection> dets;
    for (int i = 0; i < 40; ++i)
      dets.push_back(det(cls(rng), 0.1 * score_bin(rng) + 0.05, {pos(rng), pos(rng), ext(rng), ext(rng)}));
    const auto kept = nms(dets, 0.45);
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        if (kept[i].class_index == kept[j].class_index) { ASSERT_LE(iou(kept[i].box, kept[j].box), 0.45); }
    std::shuffle(dets.begin(), dets.end(), rng);
    ASSERT_EQ(nms(dets, 0.45), kept);
  }
}

}  // namespace
}  // namespace yolospp
