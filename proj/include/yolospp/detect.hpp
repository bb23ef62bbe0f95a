#pragma once

#include <span>
#include <string>
#include <vector>

#include "yolospp/box.hpp"
#include "yolospp/network.hpp"

namespace yolospp {

/// Maps original-image pixels to letterboxed network-input pixels: input = original * scale + pad.
struct LetterboxTransform {
  double scale = 1;
  double pad_x = 0;
  double pad_y = 0;

  double to_input_x(double x) const { return x * scale + pad_x; }
  double to_input_y(double y) const { return y * scale + pad_y; }
  double to_original_x(double x) const { return (x - pad_x) / scale; }
  double to_original_y(double y) const { return (y - pad_y) / scale; }
  Box to_original(const Box& b) const {
    return {to_original_x(b.x), to_original_y(b.y), b.w / scale, b.h / scale};
  }
  Box to_input(const Box& b) const { return {to_input_x(b.x), to_input_y(b.y), b.w * scale, b.h * scale}; }
};

inline constexpr Real kLetterboxFill = Real(0.5);

struct Letterboxed {
  Tensor image;
  LetterboxTransform transform;
};

/// Aspect-preserving nearest-neighbour resize into a centered target x target canvas filled with 0.5.
/// Throws ValidationError unless target is a positive multiple of 32.
Letterboxed letterbox(const Tensor& image, int target);

inline constexpr double kDefaultConfidenceThreshold = 0.25;
inline constexpr double kDefaultNmsThreshold = 0.45;

/// Decodes every (cell, anchor) slot of a head. The box center is ((sigmoid(tx) + cx) * stride,
/// (sigmoid(ty) + cy) * stride), its size anchor * exp(tw, th); the score of class i is
/// sigmoid(to) * sigmoid(tc_i). One detection is emitted per slot, for the highest-scoring class,
/// when that score >= conf_threshold. Boxes are mapped back through `transform`.
std::vector<Detection> decode(const HeadOutput& head, double conf_threshold,
                              const LetterboxTransform& transform, const std::string& image_id);

/// Greedy per-(image, class) suppression. Candidates are visited by descending score, then by
/// smaller class index, then by box coordinates and image id, so the survivors do not depend on
/// input order. A candidate is dropped when its IoU with a kept box exceeds iou_threshold.
/// The result is returned in visiting order.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

/// Decode every head and run NMS.
std::vector<Detection> postprocess(std::span<const HeadOutput> heads, double conf_threshold,
                                   double nms_threshold, const LetterboxTransform& transform,
                                   const std::string& image_id);

}  // namespace yolospp
