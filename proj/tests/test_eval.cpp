#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "yolospp/checks/acceptance.hpp"
#include "yolospp/checks/oracles.hpp"
#include "yolospp/checks/reported_results.hpp"
#include "yolospp/errors.hpp"
#include "yolospp/eval.hpp"

namespace yolospp {
namespace {

Detection det(std::string image, int cls, double score, Box box) { return {std::move(image), cls, score, box}; }
GroundTruthBox gt(std::string image, int cls, Box box, bool ignore = false) {
  return {std::move(image), ignore ? -1 : cls, box, ignore};
}

std::vector<LabeledDetection> labeled(std::initializer_list<std::pair<double, bool>> items) {
  std::vector<LabeledDetection> out;
  int i = 0;
  for (auto [score, tp] : items) out.push_back({det("img", 0, score, {double(10 * i++), 0, 4, 4}), tp});
  return out;
}

TEST(ParseVisdrone, CarLine) {
  const auto boxes = parse_visdrone("100,200,50,80,1,4,0,1\n", "a");
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_EQ(boxes[0].class_index, 3);
  EXPECT_EQ(boxes[0].box, (Box{125, 240, 50, 80}));
  EXPECT_FALSE(boxes[0].ignore);
  EXPECT_EQ(boxes[0].image_id, "a");
  EXPECT_EQ(visdrone_class_names()[3], "car");
}

TEST(ParseVisdrone, IgnoredCategories) {
  const auto boxes = parse_visdrone("1,2,3,4,0,0,0,0\n5,6,7,8,1,11,0,0,\n\n9,9,9,9,1,10,0,0\r\n", "a");
  ASSERT_EQ(boxes.size(), 3u);
  EXPECT_TRUE(boxes[0].ignore);
  EXPECT_EQ(boxes[0].class_index, -1);
  EXPECT_TRUE(boxes[1].ignore);
  EXPECT_EQ(boxes[2].class_index, 9);
}

TEST(ParseVisdrone, RejectionsCarryLine) {
  for (const char* text : {"100,200,50\n", "1,2,3,4,1,12,0,0\n", "1,2,-3,4,1,1,0,0\n", "1,2,x,4,1,1,0,0\n"}) {
    const std::string body = std::string("1,1,1,1,1,1,0,0\n") + text;
    try {
      parse_visdrone(body, "a");
      FAIL() << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2) << text;
    }
  }
}

TEST(ParseVisdrone, FormatRoundTrip) {
  const auto boxes = parse_visdrone("100,200,50,80,1,4,0,1\n3,4,10,12,0,0,0,0\n", "a");
  EXPECT_EQ(parse_visdrone(format_visdrone(boxes), "a"), boxes);
}

TEST(Match, PerfectMatch) {
  const std::vector<Detection> d{det("a", 0, 0.9, {10, 10, 5, 5})};
  const std::vector<GroundTruthBox> g{gt("a", 0, {10, 10, 5, 5})};
  EXPECT_EQ(match(d, g), std::vector<MatchLabel>{MatchLabel::tp});
  const EvalReport r = evaluate(d, g, 1);
  EXPECT_EQ(r.classes[0].tp, 1);
  EXPECT_EQ(r.classes[0].fp, 0);
  EXPECT_EQ(r.classes[0].fn, 0);
}

TEST(Match, DuplicateDetectionIsFalsePositive) {
  const std::vector<Detection> d{det("a", 0, 0.8, {10, 10, 10, 10}), det("a", 0, 0.9, {11, 10, 10, 10})};
  const std::vector<GroundTruthBox> g{gt("a", 0, {10, 10, 10, 10})};
  EXPECT_EQ(match(d, g), (std::vector<MatchLabel>{MatchLabel::fp, MatchLabel::tp}));
}

TEST(Match, IgnoredRegionDiscards) {
  const std::vector<Detection> d{det("a", 2, 0.9, {50, 50, 10, 10})};
  const std::vector<GroundTruthBox> g{gt("a", 0, {50, 50, 10, 10}, true)};
  EXPECT_EQ(match(d, g), std::vector<MatchLabel>{MatchLabel::discarded});
  const EvalReport r = evaluate(d, g, 3);
  EXPECT_EQ(r.classes[2].tp + r.classes[2].fp, 0);
  EXPECT_EQ(r.classes[2].discarded, 1);
  EXPECT_EQ(r.classes_in_ground_truth, 0);
}

TEST(Match, OtherImagesAndClassesDoNotMatch) {
  const std::vector<Detection> d{det("b", 0, 0.9, {10, 10, 5, 5}), det("a", 1, 0.9, {10, 10, 5, 5})};
  const std::vector<GroundTruthBox> g{gt("a", 0, {10, 10, 5, 5})};
  EXPECT_EQ(match(d, g), (std::vector<MatchLabel>{MatchLabel::fp, MatchLabel::fp}));
}

TEST(PrecisionRecall, Examples) {
  const auto a = precision_recall(8, 2, 2);
  EXPECT_DOUBLE_EQ(a.precision, 0.8);
  EXPECT_DOUBLE_EQ(a.recall, 0.8);
  EXPECT_EQ(precision_recall(0, 0, 3).precision, 0);
  EXPECT_EQ(precision_recall(0, 3, 0).recall, 0);
  const auto p = precision_recall(7, 0, 0);
  EXPECT_EQ(p.precision, 1);
  EXPECT_EQ(p.recall, 1);
}

TEST(AveragePrecision, SinglePoint) { EXPECT_EQ(average_precision(labeled({{0.9, true}}), 1), 1); }

TEST(AveragePrecision, FiveSixths) {
  const auto dets = labeled({{0.9, true}, {0.8, false}, {0.7, true}});
  const double ap = average_precision(dets, 2);
  EXPECT_NEAR(ap, 5.0 / 6.0, 2 * std::numeric_limits<double>::epsilon());

  std::vector<Detection> raw;
  for (const auto& l : dets) raw.push_back(l.detection);
  const std::vector<GroundTruthBox> g{gt("img", 0, raw[0].box), gt("img", 0, raw[2].box)};
  const auto oracle = checks::brute_force_evaluate(raw, g, 1, 0.5);
  EXPECT_NEAR(oracle.classes[0].ap, 100 * ap, 1e-12);
  EXPECT_NEAR(evaluate(raw, g, 1).map, 100 * ap, 1e-12);
}

TEST(AveragePrecision, AllFalsePositivesAndNoTruth) {
  EXPECT_EQ(average_precision(labeled({{0.9, false}, {0.5, false}}), 3), 0);
  EXPECT_EQ(average_precision(labeled({{0.9, false}}), 0), 0);
  EXPECT_EQ(average_precision({}, 4), 0);
}

TEST(PrCurve, RecallNonDecreasing) {
  const auto curve = pr_curve(labeled({{0.9, true}, {0.8, false}, {0.85, true}, {0.1, false}}), 3);
  ASSERT_EQ(curve.size(), 4u);
  EXPECT_EQ(curve[0].score, 0.9);
  EXPECT_EQ(curve[1].score, 0.85);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i].recall, curve[i - 1].recall);
  EXPECT_DOUBLE_EQ(curve.back().recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(curve.back().precision, 0.5);
}

TEST(Evaluate, NullDetector) {
  const std::vector<GroundTruthBox> g{gt("a", 0, {10, 10, 5, 5}), gt("a", 1, {30, 30, 5, 5})};
  const EvalReport r = evaluate({}, g, 2);
  EXPECT_EQ(r.map, 0);
  EXPECT_EQ(r.recall, 0);
  EXPECT_EQ(r.classes[0].fn, 1);
}

TEST(Evaluate, OracleDetector) {
  std::vector<GroundTruthBox> g;
  std::vector<Detection> d;
  for (int i = 0; i < 6; ++i) {
    const Box b{10.0 + 20 * i, 10, 8, 8};
    g.push_back(gt("img" + std::to_string(i % 2), i % 3, b));
    d.push_back(det("img" + std::to_string(i % 2), i % 3, 1.0, b));
  }
  const EvalReport r = evaluate(d, g, 4);
  EXPECT_EQ(r.map, 100);
  EXPECT_EQ(r.precision, 1);
  EXPECT_EQ(r.recall, 1);
  EXPECT_EQ(r.classes_in_ground_truth, 3);
}

TEST(Evaluate, ClassOutOfRange) {
  EXPECT_THROW(evaluate(std::vector<Detection>{det("a", 2, 0.5, {1, 1, 1, 1})}, {}, 2), ValidationError);
  EXPECT_THROW(evaluate({}, std::vector<GroundTruthBox>{gt("a", 5, {1, 1, 1, 1})}, 2), ValidationError);
}

TEST(Evaluate, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto inst = checks::random_eval_instance(seed);
    const EvalReport r = evaluate(inst.detections, inst.ground_truth, inst.num_classes);
    const auto oracle = checks::brute_force_evaluate(inst.detections, inst.ground_truth, inst.num_classes, 0.5);
    ASSERT_NEAR(r.map, oracle.map, 1e-9) << seed;
    for (int c = 0; c < inst.num_classes; ++c) {
      const auto k = static_cast<std::size_t>(c);
      ASSERT_NEAR(r.classes[k].ap, oracle.classes[k].ap, 1e-9) << seed;
      ASSERT_EQ(r.classes[k].tp, oracle.classes[k].tp);
      ASSERT_EQ(r.classes[k].fn, oracle.classes[k].fn);
    }
  }
}

TEST(Evaluate, Invariants) {
  std::mt19937_64 rng(77);
  for (std::uint64_t seed = 100; seed < 200; ++seed) {
    auto inst = checks::random_eval_instance(seed);
    const EvalReport r = evaluate(inst.detections, inst.ground_truth, inst.num_classes);
    double sum = 0;
    for (const ClassEval& c : r.classes) {
      ASSERT_GE(c.ap, 0);
      ASSERT_LE(c.ap, 100);
      long non_ignored = 0, dets = 0;
      for (const auto& g : inst.ground_truth) non_ignored += !g.ignore && g.class_index == c.class_index;
      for (const auto& d : inst.detections) dets += d.class_index == c.class_index;
      ASSERT_EQ(c.tp + c.fn, non_ignored);
      ASSERT_EQ(c.tp + c.fp + c.discarded, dets);
      if (c.gt_count > 0) sum += c.ap;
    }
    if (r.classes_in_ground_truth > 0) { ASSERT_NEAR(r.map, sum / r.classes_in_ground_truth, 1e-12); }

    auto shuffled = inst;
    std::shuffle(shuffled.detections.begin(), shuffled.detections.end(), rng);
    std::shuffle(shuffled.ground_truth.begin(), shuffled.ground_truth.end(), rng);
    const EvalReport rs = evaluate(shuffled.detections, shuffled.ground_truth, inst.num_classes);
    ASSERT_EQ(rs.map, r.map);

    auto scaled = inst;
    for (auto& d : scaled.detections) d.score *= 0.37;
    const EvalReport rc = evaluate(scaled.detections, scaled.ground_truth, inst.num_classes);
    for (std::size_t c = 0; c < r.classes.size(); ++c) ASSERT_NEAR(rc.classes[c].ap, r.classes[c].ap, 1e-12);

    if (inst.ground_truth.empty()) continue;
    auto extra = inst;
    const auto& target = inst.ground_truth.front();
    extra.detections.push_back(det(target.image_id, std::max(target.class_index, 0), 0.0, {-500, -500, 3, 3}));
    const EvalReport re = evaluate(extra.detections, extra.ground_truth, inst.num_classes);
    for (std::size_t c = 0; c < r.classes.size(); ++c) ASSERT_LE(re.classes[c].ap, r.classes[c].ap + 1e-12);
  }
}

TEST(Evaluate, ReproducesReportedMapFromDump) {
  for (const auto& reported : checks::reported_results()) {
    std::array<double, 10> rounded{};
    for (std::size_t c = 0; c < 10; ++c) rounded[c] = std::round(reported.class_ap[c] * 10) / 10;
    const auto dump = checks::dump_for_class_ap(rounded, 1000);
    const EvalReport r = evaluate(dump.detections, dump.ground_truth, 10);
    for (std::size_t c = 0; c < 10; ++c) EXPECT_NEAR(r.classes[c].ap, rounded[c], 1e-9) << reported.model;
  }
}

TEST(Report, TableAndCsv) {
  const auto dets = labeled({{0.9, true}, {0.8, false}, {0.7, true}});
  std::vector<Detection> raw;
  for (const auto& l : dets) raw.push_back(l.detection);
  const std::vector<GroundTruthBox> g{gt("img", 0, raw[0].box), gt("img", 0, raw[2].box)};
  const EvalReport r = evaluate(raw, g, 10);
  const std::string table = format_report_table(r, 0.25);
  EXPECT_NE(table.find("83.3"), std::string::npos);
  EXPECT_NE(table.find("Pedestrian"), std::string::npos);
  EXPECT_NE(table.find("mAP50"), std::string::npos);
  EXPECT_NE(table.find("confidence threshold 0.25"), std::string::npos);
  const std::string csv = format_report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "class,ap,tp,fp,fn");
  EXPECT_NE(csv.find("Pedestrian,83.33333333333"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
  const std::string pr = format_pr_curve_csv(r.classes[0]);
  EXPECT_EQ(std::count(pr.begin(), pr.end(), '\n'), 4);
  EXPECT_EQ(class_column_names(3), (std::vector<std::string>{"class0", "class1", "class2"}));
}

TEST(Predictions, FormatParseRoundTrip) {
  const std::vector<Detection> d{det("img_1", 3, 0.123456789, {10.5, 20.25, 3, 4}), det("b", 0, 1, {1, 1, 1, 1})};
  EXPECT_EQ(parse_predictions(format_predictions(d)), d);
  EXPECT_TRUE(parse_predictions("").empty());
  EXPECT_THROW(parse_predictions("a 0 0.5 1 1 1\n"), ParseError);
  EXPECT_THROW(parse_predictions("a 0 1.5 1 1 1 1\n"), ParseError);
  EXPECT_THROW(parse_predictions("a 0 0.5 1 1 0 1\n"), ParseError);
}

}  // namespace
}  // namespace yolospp
