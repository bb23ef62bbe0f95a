#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "yolospp/box.hpp"
#include "yolospp/network.hpp"

namespace yolospp {

/// Term weights of the composite loss. All must be non-negative.
struct LossWeights {
  Real coord = 5;
  Real iou = 1;
  Real noobj = 0.5;
  Real cls = 1;
  void validate() const;
};

enum class SlotRole : std::uint8_t { noobj, responsible, ignored };

/// Training targets for one head. Slot s = (anchor * grid_height + cy) * grid_width + cx.
struct HeadTargets {
  int grid_width = 0;
  int grid_height = 0;
  int stride = 0;
  int num_anchors = 0;
  int num_classes = 0;
  std::vector<SlotRole> role;
  // Encoded targets, meaningful for responsible slots only:
  // x, y as offsets inside the cell; w, h as fractions of the input width and height.
  std::vector<Real> x, y, w, h;
  std::vector<Real> objectness;  // 1 on responsible slots, 0 elsewhere
  std::vector<Real> class_prob;  // slots x num_classes, one-hot on responsible slots

  int slots() const { return num_anchors * grid_height * grid_width; }
  int slot(int anchor, int cy, int cx) const { return (anchor * grid_height + cy) * grid_width + cx; }
};

struct TargetAssignment {
  std::vector<HeadTargets> heads;
  /// Ground-truth boxes whose (head, cell, anchor) slot was already taken by an earlier box.
  int collisions = 0;
};

inline constexpr double kIgnoreIouThreshold = 0.5;

/// Assigns each ground-truth box (network-input pixels) to the anchor, over all heads, whose shape
/// best overlaps it when both are centered at the origin, at the cell containing its center.
/// Non-responsible slots whose decoded prediction overlaps some ground truth with IoU > 0.5 are
/// ignored. Throws ValidationError for boxes whose center lies outside the input or that have a
/// non-positive extent or an out-of-range class.
TargetAssignment assign_targets(std::span<const GroundTruthBox> ground_truth, std::span<const HeadOutput> heads);

struct LossBreakdown {
  Real coord = 0;
  Real iou = 0;
  Real cls = 0;
  Real total = 0;  // coord + iou + cls
};

/// Evaluates coord + IoU + class terms as sums of squares over the masked slots. When `grads` is
/// given it receives dLoss/dRaw per head. Throws NumericError naming the head when any raw value
/// is non-finite.
LossBreakdown total_loss(std::span<const HeadOutput> heads, const TargetAssignment& targets,
                         const LossWeights& weights, std::vector<Tensor>* grads = nullptr);

}  // namespace yolospp
