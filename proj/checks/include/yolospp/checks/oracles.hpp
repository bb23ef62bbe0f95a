#pragma once

// Slow reference implementations. They share no code with the library kernels they check.

#include <span>
#include <vector>

#include "yolospp/box.hpp"
#include "yolospp/kernels.hpp"

namespace yolospp::checks {

/// Convolution by direct nested-loop summation, followed by batch-norm and activation.
Tensor direct_conv2d(const Tensor& input, const ConvParams& params);

/// Max pool by scanning every window cell; `pad` cells of -inf on every side.
Tensor window_scan_maxpool(const Tensor& input, int size, int stride, int pad);

/// Same-padded stride-1 window scan, the form used by each SPP branch.
inline Tensor window_scan_same(const Tensor& input, int size) { return window_scan_maxpool(input, size, 1, size / 2); }

/// IoU estimated by counting points of an n x n lattice over the joint bounding rectangle.
double grid_count_iou(const Box& a, const Box& b, int n);

struct OracleClass {
  double ap = 0;  // percent
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long gt_count = 0;
};

struct OracleReport {
  std::vector<OracleClass> classes;
  double map = 0;  // percent
};

/// Evaluates by brute force: for every class and every distinct score threshold the detections at
/// or above it are matched from scratch, giving one (precision, recall) point per threshold.
/// The interpolated precision at recall r is the highest precision of any point with recall >= r.
OracleReport brute_force_evaluate(std::span<const Detection> detections, std::span<const GroundTruthBox> ground_truth,
                                  int num_classes, double iou_threshold);

}  // namespace yolospp::checks
