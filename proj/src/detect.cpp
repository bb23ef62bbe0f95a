#include "yolospp/detect.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "yolospp/errors.hpp"

namespace yolospp {

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0 || ih <= 0) return 0;
  // Areas from the same corners as the intersection, so that iou(a, a) is exactly 1.
  const double area_a = (a.right() - a.left()) * (a.bottom() - a.top());
  const double area_b = (b.right() - b.left()) * (b.bottom() - b.top());
  const double inter = iw * ih;
  const double uni = area_a + area_b - inter;
  return uni > 0 ? inter / uni : 0;
}

Letterboxed letterbox(const Tensor& image, int target) {
  require_feature_map(image, "letterbox");
  if (target <= 0 || target % 32) throw ValidationError("letterbox target must be a positive multiple of 32");
  const int h = image.height();
  const int w = image.width();
  const double scale = std::min(static_cast<double>(target) / w, static_cast<double>(target) / h);
  const int new_w = std::clamp(static_cast<int>(std::lround(w * scale)), 1, target);
  const int new_h = std::clamp(static_cast<int>(std::lround(h * scale)), 1, target);
  const int pad_x = (target - new_w) / 2;
  const int pad_y = (target - new_h) / 2;

  Letterboxed out{Tensor::feature_map(image.channels(), target, target, kLetterboxFill),
                  LetterboxTransform{scale, static_cast<double>(pad_x), static_cast<double>(pad_y)}};
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < new_h; ++y) {
      const int sy = std::min(h - 1, static_cast<int>((y + 0.5) * h / new_h));
      for (int x = 0; x < new_w; ++x) {
        const int sx = std::min(w - 1, static_cast<int>((x + 0.5) * w / new_w));
        out.image.at(c, y + pad_y, x + pad_x) = image.at(c, sy, sx);
      }
    }
  }
  return out;
}

std::vector<Detection> decode(const HeadOutput& head, double conf_threshold, const LetterboxTransform& transform,
                              const std::string& image_id) {
  const int per_anchor = head.values_per_anchor();
  const int num_anchors = static_cast<int>(head.anchors.size());
  if (head.raw.rank() != 3 || head.raw.channels() != num_anchors * per_anchor ||
      head.raw.height() != head.grid_height || head.raw.width() != head.grid_width)
    throw ShapeError("decode: head tensor " + to_string(head.raw.shape()) + " does not match its geometry");

  std::vector<Detection> out;
  for (int a = 0; a < num_anchors; ++a) {
    const int base = a * per_anchor;
    for (int cy = 0; cy < head.grid_height; ++cy) {
      for (int cx = 0; cx < head.grid_width; ++cx) {
        const double objectness = sigmoid(head.raw.at(base + 4, cy, cx));
        int best_class = 0;
        double best_prob = -1;
        for (int c = 0; c < head.num_classes; ++c) {
          const double p = sigmoid(head.raw.at(base + 5 + c, cy, cx));
          if (p > best_prob) {
            best_prob = p;
            best_class = c;
          }
        }
        const double score = objectness * best_prob;
        if (score < conf_threshold) continue;
        const Box in_input{(sigmoid(head.raw.at(base + 0, cy, cx)) + cx) * head.stride,
                           (sigmoid(head.raw.at(base + 1, cy, cx)) + cy) * head.stride,
                           head.anchors[static_cast<std::size_t>(a)].width * std::exp(head.raw.at(base + 2, cy, cx)),
                           head.anchors[static_cast<std::size_t>(a)].height * std::exp(head.raw.at(base + 3, cy, cx))};
        out.push_back({image_id, best_class, score, transform.to_original(in_input)});
      }
    }
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.class_index != b.class_index) return a.class_index < b.class_index;
    if (a.box != b.box) return a.box < b.box;
    return a.image_id < b.image_id;
  });
  std::map<std::pair<std::string, int>, std::vector<Box>> kept;
  std::vector<Detection> out;
  for (Detection& d : detections) {
    auto& boxes = kept[{d.image_id, d.class_index}];
    const bool suppressed =
        std::any_of(boxes.begin(), boxes.end(), [&](const Box& k) { return iou(k, d.box) > iou_threshold; });
    if (suppressed) continue;
    boxes.push_back(d.box);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> postprocess(std::span<const HeadOutput> heads, double conf_threshold, double nms_threshold,
                                   const LetterboxTransform& transform, const std::string& image_id) {
  std::vector<Detection> all;
  for (const HeadOutput& h : heads) {
    auto d = decode(h, conf_threshold, transform, image_id);
    all.insert(all.end(), std::make_move_iterator(d.begin()), std::make_move_iterator(d.end()));
  }
  return nms(std::move(all), nms_threshold);
}

}  // namespace yolospp
