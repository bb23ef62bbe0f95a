#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "yolospp/box.hpp"

namespace yolospp::checks {

/// Published VisDrone validation numbers at 640x640 for the three variants (percent).
struct ReportedResult {
  std::string_view model;
  double precision = 0;
  double recall = 0;
  double map = 0;
  std::array<double, 10> class_ap{};  // VisDrone column order
};

std::span<const ReportedResult> reported_results();

struct PredictionDump {
  std::vector<Detection> detections;
  std::vector<GroundTruthBox> ground_truth;
};

/// A synthetic dump whose evaluation yields exactly the given per-class APs. Class c gets
/// `gt_per_class` ground-truth boxes (one per image); its first ap * gt_per_class / 100 boxes are
/// found by perfectly placed detections that outrank every false positive.
/// Each AP must be a multiple of 100 / gt_per_class.
PredictionDump dump_for_class_ap(std::span<const double> class_ap_percent, int gt_per_class);

}  // namespace yolospp::checks
