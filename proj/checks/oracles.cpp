#include "yolospp/checks/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace yolospp::checks {

Tensor direct_conv2d(const Tensor& input, const ConvParams& p) {
  const int h = input.height();
  const int w = input.width();
  const int oh = (h + 2 * p.pad - p.size) / p.stride + 1;
  const int ow = (w + 2 * p.pad - p.size) / p.stride + 1;
  Tensor out = Tensor::feature_map(p.filters, oh, ow);
  for (int f = 0; f < p.filters; ++f)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0;
        for (int c = 0; c < p.in_channels; ++c)
          for (int ky = 0; ky < p.size; ++ky)
            for (int kx = 0; kx < p.size; ++kx) {
              const int iy = oy * p.stride - p.pad + ky;
              const int ix = ox * p.stride - p.pad + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              const std::size_t wi = ((static_cast<std::size_t>(f) * p.in_channels + c) * p.size + ky) * p.size + kx;
              acc += static_cast<double>(p.weights[wi]) * input.at(c, iy, ix);
            }
        const auto fi = static_cast<std::size_t>(f);
        double v = acc;
        if (p.batch_normalize)
          v = p.scales[fi] * (v - p.rolling_mean[fi]) / std::sqrt(p.rolling_variance[fi] + 1e-5) + p.biases[fi];
        else
          v += p.biases[fi];
        switch (p.activation) {
          case Activation::linear: break;
          case Activation::leaky: v = v < 0 ? 0.1 * v : v; break;
          case Activation::sigmoid: v = 1 / (1 + std::exp(-v)); break;
        }
        out.at(f, oy, ox) = static_cast<Real>(v);
      }
  return out;
}

Tensor window_scan_maxpool(const Tensor& input, int size, int stride, int pad) {
  const int h = input.height();
  const int w = input.width();
  const int oh = (h + 2 * pad - size) / stride + 1;
  const int ow = (w + 2 * pad - size) / stride + 1;
  Tensor out = Tensor::feature_map(input.channels(), oh, ow);
  for (int c = 0; c < input.channels(); ++c)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        Real best = -std::numeric_limits<Real>::infinity();
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const bool inside = y >= oy * stride - pad && y < oy * stride - pad + size && x >= ox * stride - pad &&
                                x < ox * stride - pad + size;
            if (inside) best = std::max(best, input.at(c, y, x));
          }
        out.at(c, oy, ox) = best;
      }
  return out;
}

double grid_count_iou(const Box& a, const Box& b, int n) {
  const double x0 = std::min(a.x - a.w / 2, b.x - b.w / 2);
  const double x1 = std::max(a.x + a.w / 2, b.x + b.w / 2);
  const double y0 = std::min(a.y - a.h / 2, b.y - b.h / 2);
  const double y1 = std::max(a.y + a.h / 2, b.y + b.h / 2);
  auto inside = [](const Box& r, double x, double y) {
    return x >= r.x - r.w / 2 && x < r.x + r.w / 2 && y >= r.y - r.h / 2 && y < r.y + r.h / 2;
  };
  long both = 0;
  long either = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = x0 + (x1 - x0) * (i + 0.5) / n;
      const double y = y0 + (y1 - y0) * (j + 0.5) / n;
      const bool ia = inside(a, x, y);
      const bool ib = inside(b, x, y);
      both += ia && ib;
      either += ia || ib;
    }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

namespace {

double overlap(const Box& a, const Box& b) {
  const double ix = std::min(a.x + a.w / 2, b.x + b.w / 2) - std::max(a.x - a.w / 2, b.x - b.w / 2);
  const double iy = std::min(a.y + a.h / 2, b.y + b.h / 2) - std::max(a.y - a.h / 2, b.y - b.h / 2);
  if (ix <= 0 || iy <= 0) return 0;
  const double inter = ix * iy;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

struct Counts {
  long tp = 0;
  long fp = 0;
};

// Matches the chosen detections of one class from scratch, highest score first.
Counts match_subset(std::vector<const Detection*> chosen, std::span<const GroundTruthBox> ground_truth, int cls,
                    double thr) {
  std::sort(chosen.begin(), chosen.end(), [](const Detection* a, const Detection* b) {
    if (a->score != b->score) return a->score > b->score;
    if (a->image_id != b->image_id) return a->image_id < b->image_id;
    return a->box < b->box;
  });
  std::vector<bool> taken(ground_truth.size(), false);
  Counts counts;
  for (const Detection* d : chosen) {
    std::size_t best = ground_truth.size();
    double best_iou = thr;
    bool ignored = false;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      const GroundTruthBox& gt = ground_truth[g];
      if (gt.image_id != d->image_id) continue;
      const double v = overlap(d->box, gt.box);
      if (gt.ignore) {
        if (v >= thr) ignored = true;
      } else if (gt.class_index == cls && !taken[g] && (v > best_iou || (v == best_iou && best == ground_truth.size()))) {
        best = g;
        best_iou = v;
      }
    }
    if (best != ground_truth.size()) {
      taken[best] = true;
      ++counts.tp;
    } else if (!ignored) {
      ++counts.fp;
    }
  }
  return counts;
}

}  // namespace

OracleReport brute_force_evaluate(std::span<const Detection> detections, std::span<const GroundTruthBox> ground_truth,
                                  int num_classes, double iou_threshold) {
  OracleReport report;
  double sum = 0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    OracleClass oc;
    for (const auto& g : ground_truth) oc.gt_count += !g.ignore && g.class_index == c;
    std::set<double, std::greater<>> thresholds;
    for (const auto& d : detections)
      if (d.class_index == c) thresholds.insert(d.score);

    std::vector<std::pair<double, double>> points;  // (recall, precision)
    Counts last;
    for (double t : thresholds) {
      std::vector<const Detection*> chosen;
      for (const auto& d : detections)
        if (d.class_index == c && d.score >= t) chosen.push_back(&d);
      last = match_subset(chosen, ground_truth, c, iou_threshold);
      const double precision = last.tp + last.fp > 0 ? static_cast<double>(last.tp) / (last.tp + last.fp) : 0.0;
      const double recall = oc.gt_count > 0 ? static_cast<double>(last.tp) / oc.gt_count : 0.0;
      points.emplace_back(recall, precision);
    }
    oc.tp = last.tp;
    oc.fp = last.fp;
    oc.fn = oc.gt_count - oc.tp;

    std::set<double> recalls;
    for (const auto& p : points)
      if (p.first > 0) recalls.insert(p.first);
    double ap = 0;
    double previous = 0;
    for (double r : recalls) {
      double best = 0;
      for (const auto& p : points)
        if (p.first >= r) best = std::max(best, p.second);
      ap += (r - previous) * best;
      previous = r;
    }
    oc.ap = oc.gt_count > 0 ? 100 * ap : 0.0;
    if (oc.gt_count > 0) {
      sum += oc.ap;
      ++present;
    }
    report.classes.push_back(oc);
  }
  report.map = present > 0 ? sum / present : 0.0;
  return report;
}

}  // namespace yolospp::checks
