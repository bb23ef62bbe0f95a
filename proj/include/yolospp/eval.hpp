#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "yolospp/box.hpp"

namespace yolospp {

inline constexpr double kEvalIouThreshold = 0.5;
inline constexpr int kVisDroneClasses = 10;

/// Class names for VisDrone categories 1..10, in class-index order.
std::span<const std::string_view> visdrone_class_names();
/// Short column headers used in the per-class table (e.g. "Awn" for awning-tricycle).
std::span<const std::string_view> visdrone_column_names();

/// Parses one VisDrone annotation file: `x,y,w,h,score,category,truncation,occlusion` per line with a
/// top-left corner. Categories 1..10 become classes 0..9; 0 (ignored region) and 11 (others) become
/// ignore-flagged boxes with class -1. Throws ParseError with the line number.
std::vector<GroundTruthBox> parse_visdrone(std::string_view text, const std::string& image_id);

/// Writes boxes of one image in the VisDrone layout with integer-rounded corners. Ignored boxes
/// become category 0, class c becomes category c + 1.
std::string format_visdrone(std::span<const GroundTruthBox> boxes);

/// Every `*.txt` in `dir`, each file's stem as its image id, in filename order.
std::vector<GroundTruthBox> load_visdrone_dir(const std::string& dir);

enum class MatchLabel { tp, fp, discarded };

/// Labels each detection (aligned with the input). Within each image, detections are visited by
/// descending score (ties: class, then box coordinates) and take the unmatched same-class ground
/// truth of highest IoU >= iou_threshold. Unmatched detections overlapping an ignored region at
/// IoU >= iou_threshold are discarded; the rest are false positives.
std::vector<MatchLabel> match(std::span<const Detection> detections, std::span<const GroundTruthBox> ground_truth,
                              double iou_threshold = kEvalIouThreshold);

struct PrecisionRecall {
  double precision = 0;
  double recall = 0;
};

/// P = TP/(TP+FP), R = TP/(TP+FN), each 0 when its denominator is 0.
PrecisionRecall precision_recall(long tp, long fp, long fn);

struct LabeledDetection {
  Detection detection;
  bool true_positive = false;
};

struct PrPoint {
  double score = 0;
  double precision = 0;
  double recall = 0;
};

/// Cumulative precision/recall along the detections sorted by descending score (ties: image id,
/// then box coordinates).
std::vector<PrPoint> pr_curve(std::span<const LabeledDetection> detections, long gt_count);

/// All-point interpolated AP in [0, 1]: the sum over recall steps of the step width times the
/// highest precision reached at any recall at or beyond it. 0 when gt_count == 0.
double average_precision(std::span<const LabeledDetection> detections, long gt_count);

struct ClassEval {
  int class_index = 0;
  double ap = 0;  // percent
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long gt_count = 0;
  long discarded = 0;
  std::vector<PrPoint> curve;
};

struct EvalReport {
  std::vector<ClassEval> classes;  // one entry per class index
  double precision = 0;            // dataset level, over every supplied detection
  double recall = 0;
  double map = 0;  // percent; mean AP over classes with at least one ground-truth box
  int classes_in_ground_truth = 0;
  double iou_threshold = kEvalIouThreshold;
};

/// Throws ValidationError for class indices outside 0..num_classes-1.
EvalReport evaluate(std::span<const Detection> detections, std::span<const GroundTruthBox> ground_truth,
                    int num_classes, double iou_threshold = kEvalIouThreshold);

/// Column names for `num_classes` classes: VisDrone names when there are ten, else class0...
std::vector<std::string> class_column_names(int num_classes);

/// Aligned text: a Precision / Recall / mAP50 summary followed by per-class AP columns and counts.
/// `conf_threshold` is printed as the threshold the detections were filtered at, when known.
std::string format_report_table(const EvalReport& report, std::optional<double> conf_threshold = std::nullopt);
/// `class,ap,tp,fp,fn` with one row per class.
std::string format_report_csv(const EvalReport& report);
/// `rank,score,precision,recall` for one class.
std::string format_pr_curve_csv(const ClassEval& cls);

/// One detection per line: `image_id class_index score x_center y_center w h`.
std::vector<Detection> parse_predictions(std::string_view text);
std::string format_predictions(std::span<const Detection> detections);

}  // namespace yolospp
