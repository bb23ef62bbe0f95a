#include "yolospp/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "yolospp/errors.hpp"

namespace yolospp {

namespace {

double shape_iou(double w1, double h1, double w2, double h2) {
  const double inter = std::min(w1, w2) * std::min(h1, h2);
  return inter / (w1 * h1 + w2 * h2 - inter);
}

Box predicted_box(const HeadOutput& head, int anchor, int cy, int cx) {
  const int base = anchor * head.values_per_anchor();
  const Anchor& a = head.anchors[static_cast<std::size_t>(anchor)];
  return {(sigmoid(head.raw.at(base + 0, cy, cx)) + cx) * head.stride,
          (sigmoid(head.raw.at(base + 1, cy, cx)) + cy) * head.stride, a.width * std::exp(head.raw.at(base + 2, cy, cx)),
          a.height * std::exp(head.raw.at(base + 3, cy, cx))};
}

HeadTargets empty_targets(const HeadOutput& head) {
  HeadTargets t;
  t.grid_width = head.grid_width;
  t.grid_height = head.grid_height;
  t.stride = head.stride;
  t.num_anchors = static_cast<int>(head.anchors.size());
  t.num_classes = head.num_classes;
  const auto n = static_cast<std::size_t>(t.slots());
  t.role.assign(n, SlotRole::noobj);
  t.x.assign(n, 0);
  t.y.assign(n, 0);
  t.w.assign(n, 0);
  t.h.assign(n, 0);
  t.objectness.assign(n, 0);
  t.class_prob.assign(n * static_cast<std::size_t>(t.num_classes), 0);
  return t;
}

void check_head(const HeadOutput& head, std::size_t index) {
  if (head.raw.rank() != 3 || head.raw.channels() != static_cast<int>(head.anchors.size()) * head.values_per_anchor() ||
      head.raw.height() != head.grid_height || head.raw.width() != head.grid_width || head.stride < 1)
    throw ShapeError("head " + std::to_string(index) + ": raw tensor " + to_string(head.raw.shape()) +
                     " does not match its geometry");
}

}  // namespace

void LossWeights::validate() const {
  if (!(coord >= 0) || !(iou >= 0) || !(noobj >= 0) || !(cls >= 0))
    throw ValidationError("loss weights must be non-negative");
}

TargetAssignment assign_targets(std::span<const GroundTruthBox> ground_truth, std::span<const HeadOutput> heads) {
  if (heads.empty()) throw ValidationError("assign_targets: no heads");
  for (std::size_t k = 0; k < heads.size(); ++k) check_head(heads[k], k);
  const double in_w = heads.front().input_width();
  const double in_h = heads.front().input_height();

  TargetAssignment out;
  for (const HeadOutput& h : heads) out.heads.push_back(empty_targets(h));

  for (const GroundTruthBox& gt : ground_truth) {
    const Box& b = gt.box;
    if (!(b.w > 0) || !(b.h > 0)) throw ValidationError("ground-truth box has a non-positive extent");
    if (!(b.x >= 0 && b.x < in_w && b.y >= 0 && b.y < in_h))
      throw ValidationError("ground-truth box centered outside the " + std::to_string(static_cast<int>(in_w)) + "x" +
                            std::to_string(static_cast<int>(in_h)) + " input");
    if (gt.ignore) continue;
    if (gt.class_index < 0 || gt.class_index >= heads.front().num_classes)
      throw ValidationError("ground-truth class " + std::to_string(gt.class_index) + " out of range");

    std::size_t best_head = 0;
    int best_anchor = 0;
    double best = -1;
    for (std::size_t k = 0; k < heads.size(); ++k)
      for (int a = 0; a < static_cast<int>(heads[k].anchors.size()); ++a) {
        const Anchor& anc = heads[k].anchors[static_cast<std::size_t>(a)];
        const double v = shape_iou(b.w, b.h, anc.width, anc.height);
        if (v > best) {
          best = v;
          best_head = k;
          best_anchor = a;
        }
      }

    const HeadOutput& head = heads[best_head];
    HeadTargets& t = out.heads[best_head];
    const int cx = std::min(static_cast<int>(b.x / head.stride), head.grid_width - 1);
    const int cy = std::min(static_cast<int>(b.y / head.stride), head.grid_height - 1);
    const auto s = static_cast<std::size_t>(t.slot(best_anchor, cy, cx));
    if (t.role[s] == SlotRole::responsible) {
      ++out.collisions;
      continue;
    }
    t.role[s] = SlotRole::responsible;
    t.x[s] = b.x / head.stride - cx;
    t.y[s] = b.y / head.stride - cy;
    t.w[s] = b.w / in_w;
    t.h[s] = b.h / in_h;
    t.objectness[s] = 1;
    t.class_prob[s * static_cast<std::size_t>(t.num_classes) + static_cast<std::size_t>(gt.class_index)] = 1;
  }

  if (ground_truth.empty()) return out;
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const HeadOutput& head = heads[k];
    HeadTargets& t = out.heads[k];
    for (int a = 0; a < t.num_anchors; ++a)
      for (int cy = 0; cy < t.grid_height; ++cy)
        for (int cx = 0; cx < t.grid_width; ++cx) {
          const auto s = static_cast<std::size_t>(t.slot(a, cy, cx));
          if (t.role[s] == SlotRole::responsible) continue;
          const Box p = predicted_box(head, a, cy, cx);
          for (const GroundTruthBox& gt : ground_truth)
            if (iou(p, gt.box) > kIgnoreIouThreshold) {
              t.role[s] = SlotRole::ignored;
              break;
            }
        }
  }
  return out;
}

LossBreakdown total_loss(std::span<const HeadOutput> heads, const TargetAssignment& targets, const LossWeights& weights,
                         std::vector<Tensor>* grads) {
  weights.validate();
  if (targets.heads.size() != heads.size()) throw ShapeError("total_loss: target/head count mismatch");
  if (grads) grads->clear();

  LossBreakdown loss;
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const HeadOutput& head = heads[k];
    const HeadTargets& t = targets.heads[k];
    check_head(head, k);
    if (t.grid_width != head.grid_width || t.grid_height != head.grid_height ||
        t.num_anchors != static_cast<int>(head.anchors.size()) || t.num_classes != head.num_classes)
      throw ShapeError("total_loss: targets for head " + std::to_string(k) + " do not match its geometry");
    for (Real v : head.raw.data())
      if (!std::isfinite(v)) throw NumericError("non-finite prediction in head " + std::to_string(k) +
                                                " (layer " + std::to_string(head.layer) + ")");

    Tensor g;
    if (grads) g = Tensor(head.raw.shape());
    const int per_anchor = head.values_per_anchor();
    const Real in_w = head.input_width();
    const Real in_h = head.input_height();

    for (int a = 0; a < t.num_anchors; ++a) {
      const int base = a * per_anchor;
      const Anchor& anc = head.anchors[static_cast<std::size_t>(a)];
      const Real root_aw = std::sqrt(static_cast<Real>(anc.width) / in_w);
      const Real root_ah = std::sqrt(static_cast<Real>(anc.height) / in_h);
      for (int cy = 0; cy < t.grid_height; ++cy)
        for (int cx = 0; cx < t.grid_width; ++cx) {
          const auto s = static_cast<std::size_t>(t.slot(a, cy, cx));
          const SlotRole role = t.role[s];
          if (role == SlotRole::ignored) continue;

          const Real obj = sigmoid(head.raw.at(base + 4, cy, cx));
          const Real obj_slope = obj * (1 - obj);
          if (role == SlotRole::noobj) {
            loss.iou += weights.noobj * obj * obj;
            if (grads) g.at(base + 4, cy, cx) = 2 * weights.noobj * obj * obj_slope;
            continue;
          }

          const Real obj_err = obj - t.objectness[s];
          loss.iou += weights.iou * obj_err * obj_err;

          const Real px = sigmoid(head.raw.at(base + 0, cy, cx));
          const Real py = sigmoid(head.raw.at(base + 1, cy, cx));
          const Real root_pw = root_aw * std::exp(head.raw.at(base + 2, cy, cx) / 2);
          const Real root_ph = root_ah * std::exp(head.raw.at(base + 3, cy, cx) / 2);
          const Real ex = px - t.x[s];
          const Real ey = py - t.y[s];
          const Real ew = root_pw - std::sqrt(t.w[s]);
          const Real eh = root_ph - std::sqrt(t.h[s]);
          loss.coord += weights.coord * (ex * ex + ey * ey) + weights.coord * (ew * ew + eh * eh);

          if (grads) {
            g.at(base + 0, cy, cx) = 2 * weights.coord * ex * px * (1 - px);
            g.at(base + 1, cy, cx) = 2 * weights.coord * ey * py * (1 - py);
            // d sqrt(w)/dt = sqrt(w)/2
            g.at(base + 2, cy, cx) = weights.coord * ew * root_pw;
            g.at(base + 3, cy, cx) = weights.coord * eh * root_ph;
            g.at(base + 4, cy, cx) = 2 * weights.iou * obj_err * obj_slope;
          }

          for (int c = 0; c < t.num_classes; ++c) {
            const Real p = sigmoid(head.raw.at(base + 5 + c, cy, cx));
            const Real e = p - t.class_prob[s * static_cast<std::size_t>(t.num_classes) + static_cast<std::size_t>(c)];
            loss.cls += weights.cls * e * e;
            if (grads) g.at(base + 5 + c, cy, cx) = 2 * weights.cls * e * p * (1 - p);
          }
        }
    }
    if (grads) grads->push_back(std::move(g));
  }
  loss.total = loss.coord + loss.iou + loss.cls;
  return loss;
}

}  // namespace yolospp
