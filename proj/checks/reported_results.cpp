#include "yolospp/checks/reported_results.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace yolospp::checks {

namespace {

constexpr std::array<ReportedResult, 3> kReported{{
    {"yolov3", 50.1, 40.2, 39.7, {49.3, 39.8, 16.3, 78.3, 41.8, 38.3, 25.3, 12.2, 49.8, 45.8}},
    {"yolov3-tiny", 22.9, 17.9, 13.7, {16.0, 15.6, 2.4, 46.7, 1.0, 10.1, 6.5, 2.8, 10.6, 16.6}},
    {"yolov3-spp", 49.3, 41.4, 40.3, {49.4, 39.4, 17.8, 78.1, 42.8, 37.9, 26.7, 14.3, 50.6, 45.6}},
}};

std::string image_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%05d", i);
  return buf;
}

}  // namespace

std::span<const ReportedResult> reported_results() { return kReported; }

PredictionDump dump_for_class_ap(std::span<const double> class_ap_percent, int gt_per_class) {
  PredictionDump dump;
  const int classes = static_cast<int>(class_ap_percent.size());
  for (int i = 0; i < gt_per_class; ++i)
    for (int c = 0; c < classes; ++c)
      dump.ground_truth.push_back({image_name(i), c, {50.0 + 100.0 * c, 50, 40, 40}, false});

  for (int c = 0; c < classes; ++c) {
    const double exact = class_ap_percent[static_cast<std::size_t>(c)] * gt_per_class / 100.0;
    const long found = std::lround(exact);
    if (std::abs(exact - static_cast<double>(found)) > 1e-6)
      throw std::invalid_argument("AP " + std::to_string(class_ap_percent[static_cast<std::size_t>(c)]) +
                                  " is not reachable with " + std::to_string(gt_per_class) + " boxes");
    for (long i = 0; i < found; ++i)
      dump.detections.push_back(
          {image_name(static_cast<int>(i)), c, 0.9 - 1e-4 * static_cast<double>(i) / gt_per_class, {50.0 + 100.0 * c, 50, 40, 40}});
    // False positives in empty space, ranked below every true positive.
    for (long i = 0; i <= found / 2; ++i)
      dump.detections.push_back({image_name(static_cast<int>(i % gt_per_class)), c,
                                 0.1 - 1e-4 * static_cast<double>(i) / gt_per_class, {50.0 + 100.0 * c, 300, 40, 40}});
  }
  return dump;
}

}  // namespace yolospp::checks
