#include "yolospp/eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "yolospp/errors.hpp"

namespace yolospp {

namespace {

constexpr std::array<std::string_view, 10> kVisDroneNames{
    "pedestrian", "people", "bicycle", "car", "van", "truck", "tricycle", "awning-tricycle", "bus", "motor"};
constexpr std::array<std::string_view, 10> kVisDroneColumns{
    "Pedestrian", "People", "Bicycle", "Car", "Van", "Truck", "Tricycle", "Awn", "Bus", "Motor"};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    const auto t = trim(line);
    if (!t.empty()) fn(t, line_no);
  }
}

bool detection_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  if (a.class_index != b.class_index) return a.class_index < b.class_index;
  return a.box < b.box;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

}  // namespace

std::span<const std::string_view> visdrone_class_names() { return kVisDroneNames; }
std::span<const std::string_view> visdrone_column_names() { return kVisDroneColumns; }

std::vector<GroundTruthBox> parse_visdrone(std::string_view text, const std::string& image_id) {
  std::vector<GroundTruthBox> out;
  for_each_line(text, [&](std::string_view line, int line_no) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    // Some VisDrone exports end each line with a comma.
    if (fields.size() == 9 && trim(fields.back()).empty()) fields.pop_back();
    if (fields.size() != 8)
      throw ParseError("expected 8 comma-separated fields, got " + std::to_string(fields.size()), line_no);
    std::array<double, 4> geom{};
    for (std::size_t i = 0; i < 4; ++i)
      if (!parse_number(fields[i], geom[i]))
        throw ParseError("field " + std::to_string(i + 1) + " is not a number: '" + std::string(fields[i]) + "'",
                         line_no);
    int category = 0;
    if (!parse_number(fields[5], category)) throw ParseError("category is not an integer", line_no);
    double ignored_value = 0;
    for (std::size_t i : {4u, 6u, 7u})
      if (!parse_number(fields[i], ignored_value))
        throw ParseError("field " + std::to_string(i + 1) + " is not a number", line_no);
    if (geom[2] <= 0 || geom[3] <= 0) throw ParseError("box has a non-positive extent", line_no);
    if (category < 0 || category > 11) throw ParseError("category " + std::to_string(category) + " out of range", line_no);

    GroundTruthBox gt;
    gt.image_id = image_id;
    gt.box = Box::from_corners(geom[0], geom[1], geom[0] + geom[2], geom[1] + geom[3]);
    gt.ignore = category == 0 || category == 11;
    gt.class_index = gt.ignore ? -1 : category - 1;
    out.push_back(std::move(gt));
  });
  return out;
}

std::string format_visdrone(std::span<const GroundTruthBox> boxes) {
  std::string out;
  for (const GroundTruthBox& g : boxes) {
    const long x = std::lround(g.box.left());
    const long y = std::lround(g.box.top());
    const long w = std::lround(g.box.right()) - x;
    const long h = std::lround(g.box.bottom()) - y;
    out += std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(w) + "," + std::to_string(h) + "," +
           (g.ignore ? "0,0" : "1," + std::to_string(g.class_index + 1)) + ",0,0\n";
  }
  return out;
}

std::vector<GroundTruthBox> load_visdrone_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("ground-truth directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<GroundTruthBox> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
      auto boxes = parse_visdrone(ss.str(), f.stem().string());
      out.insert(out.end(), std::make_move_iterator(boxes.begin()), std::make_move_iterator(boxes.end()));
    } catch (const ParseError& e) {
      throw ParseError(f.string() + ": " + e.what(), e.line());
    }
  }
  return out;
}

std::vector<MatchLabel> match(std::span<const Detection> detections, std::span<const GroundTruthBox> ground_truth,
                              double iou_threshold) {
  std::map<std::string_view, std::vector<std::size_t>> gt_by_image;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) gt_by_image[ground_truth[i].image_id].push_back(i);
  std::map<std::string_view, std::vector<std::size_t>> det_by_image;
  for (std::size_t i = 0; i < detections.size(); ++i) det_by_image[detections[i].image_id].push_back(i);

  std::vector<MatchLabel> labels(detections.size(), MatchLabel::fp);
  for (auto& [image, dets] : det_by_image) {
    std::vector<std::size_t> gts;
    if (auto it = gt_by_image.find(image); it != gt_by_image.end()) gts = it->second;
    std::sort(gts.begin(), gts.end(), [&](std::size_t a, std::size_t b) {
      const auto& ga = ground_truth[a];
      const auto& gb = ground_truth[b];
      if (ga.class_index != gb.class_index) return ga.class_index < gb.class_index;
      if (ga.box != gb.box) return ga.box < gb.box;
      return ga.ignore < gb.ignore;
    });
    std::stable_sort(dets.begin(), dets.end(),
                     [&](std::size_t a, std::size_t b) { return detection_order(detections[a], detections[b]); });
    std::vector<bool> used(gts.size(), false);
    for (std::size_t d : dets) {
      const Detection& det = detections[d];
      int best = -1;
      double best_iou = -1;
      bool in_ignored = false;
      for (std::size_t k = 0; k < gts.size(); ++k) {
        const GroundTruthBox& g = ground_truth[gts[k]];
        const double v = iou(det.box, g.box);
        if (g.ignore) {
          in_ignored = in_ignored || v >= iou_threshold;
          continue;
        }
        if (used[k] || g.class_index != det.class_index) continue;
        if (v > best_iou) {
          best_iou = v;
          best = static_cast<int>(k);
        }
      }
      if (best >= 0 && best_iou >= iou_threshold) {
        used[static_cast<std::size_t>(best)] = true;
        labels[d] = MatchLabel::tp;
      } else {
        labels[d] = in_ignored ? MatchLabel::discarded : MatchLabel::fp;
      }
    }
  }
  return labels;
}

PrecisionRecall precision_recall(long tp, long fp, long fn) {
  PrecisionRecall pr;
  if (tp + fp > 0) pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return pr;
}

std::vector<PrPoint> pr_curve(std::span<const LabeledDetection> detections, long gt_count) {
  std::vector<const LabeledDetection*> sorted;
  for (const auto& d : detections) sorted.push_back(&d);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* a, const auto* b) { return detection_order(a->detection, b->detection); });
  std::vector<PrPoint> curve;
  long tp = 0;
  long fp = 0;
  for (const auto* d : sorted) {
    (d->true_positive ? tp : fp) += 1;
    const auto pr = precision_recall(tp, fp, gt_count - tp);
    curve.push_back({d->detection.score, pr.precision, pr.recall});
  }
  return curve;
}

double average_precision(std::span<const LabeledDetection> detections, long gt_count) {
  if (gt_count <= 0) return 0;
  const auto curve = pr_curve(detections, gt_count);
  std::vector<double> envelope(curve.size());
  double running = 0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }
  double ap = 0;
  double previous_recall = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].recall > previous_recall) {
      ap += (curve[i].recall - previous_recall) * envelope[i];
      previous_recall = curve[i].recall;
    }
  }
  return ap;
}

EvalReport evaluate(std::span<const Detection> detections, std::span<const GroundTruthBox> ground_truth,
                    int num_classes, double iou_threshold) {
  if (num_classes < 1) throw ValidationError("evaluate: num_classes must be >= 1");
  for (const Detection& d : detections)
    if (d.class_index < 0 || d.class_index >= num_classes)
      throw ValidationError("detection class " + std::to_string(d.class_index) + " out of range for " +
                            std::to_string(num_classes) + " classes (image '" + d.image_id + "')");
  for (const GroundTruthBox& g : ground_truth)
    if (!g.ignore && (g.class_index < 0 || g.class_index >= num_classes))
      throw ValidationError("ground-truth class " + std::to_string(g.class_index) + " out of range for " +
                            std::to_string(num_classes) + " classes (image '" + g.image_id + "')");

  const auto labels = match(detections, ground_truth, iou_threshold);
  EvalReport report;
  report.iou_threshold = iou_threshold;
  report.classes.resize(static_cast<std::size_t>(num_classes));
  std::vector<std::vector<LabeledDetection>> per_class(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) report.classes[static_cast<std::size_t>(c)].class_index = c;
  for (const GroundTruthBox& g : ground_truth)
    if (!g.ignore) ++report.classes[static_cast<std::size_t>(g.class_index)].gt_count;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    ClassEval& ce = report.classes[static_cast<std::size_t>(detections[i].class_index)];
    switch (labels[i]) {
      case MatchLabel::tp: ++ce.tp; break;
      case MatchLabel::fp: ++ce.fp; break;
      case MatchLabel::discarded: ++ce.discarded; continue;
    }
    per_class[static_cast<std::size_t>(detections[i].class_index)].push_back({detections[i], labels[i] == MatchLabel::tp});
  }

  long tp = 0, fp = 0, fn = 0;
  double ap_sum = 0;
  for (ClassEval& ce : report.classes) {
    const auto& dets = per_class[static_cast<std::size_t>(ce.class_index)];
    ce.fn = ce.gt_count - ce.tp;
    ce.ap = 100.0 * average_precision(dets, ce.gt_count);
    ce.curve = pr_curve(dets, ce.gt_count);
    tp += ce.tp;
    fp += ce.fp;
    fn += ce.fn;
    if (ce.gt_count > 0) {
      ap_sum += ce.ap;
      ++report.classes_in_ground_truth;
    }
  }
  const auto pr = precision_recall(tp, fp, fn);
  report.precision = pr.precision;
  report.recall = pr.recall;
  report.map = report.classes_in_ground_truth > 0 ? ap_sum / report.classes_in_ground_truth : 0.0;
  return report;
}

std::vector<std::string> class_column_names(int num_classes) {
  std::vector<std::string> names;
  for (int c = 0; c < num_classes; ++c)
    names.push_back(num_classes == kVisDroneClasses ? std::string(kVisDroneColumns[static_cast<std::size_t>(c)])
                                                    : "class" + std::to_string(c));
  return names;
}

std::string format_report_table(const EvalReport& report, std::optional<double> conf_threshold) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  out << "IoU threshold " << std::setprecision(2) << report.iou_threshold;
  if (conf_threshold) out << ", confidence threshold " << *conf_threshold;
  out << "\n\n" << std::setprecision(1);
  out << std::setw(10) << "Precision" << std::setw(8) << "Recall" << std::setw(8) << "mAP50" << "\n";
  out << std::setw(10) << 100 * report.precision << std::setw(8) << 100 * report.recall << std::setw(8) << report.map
      << "\n\n";

  const auto names = class_column_names(static_cast<int>(report.classes.size()));
  std::vector<int> widths;
  for (const auto& n : names) widths.push_back(std::max<int>(7, static_cast<int>(n.size()) + 1));
  for (std::size_t c = 0; c < names.size(); ++c) out << std::setw(widths[c]) << names[c];
  out << "\n";
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (report.classes[c].gt_count > 0)
      out << std::setw(widths[c]) << report.classes[c].ap;
    else
      out << std::setw(widths[c]) << "-";
  }
  out << "\n\n";

  out << std::left << std::setw(12) << "class" << std::right << std::setw(8) << "AP" << std::setw(8) << "GT"
      << std::setw(8) << "TP" << std::setw(8) << "FP" << std::setw(8) << "FN" << "\n";
  for (std::size_t c = 0; c < names.size(); ++c) {
    const ClassEval& ce = report.classes[c];
    out << std::left << std::setw(12) << names[c] << std::right << std::setw(8) << ce.ap << std::setw(8)
        << ce.gt_count << std::setw(8) << ce.tp << std::setw(8) << ce.fp << std::setw(8) << ce.fn << "\n";
  }
  return out.str();
}

std::string format_report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "class,ap,tp,fp,fn\n";
  const auto names = class_column_names(static_cast<int>(report.classes.size()));
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    const ClassEval& ce = report.classes[c];
    out << names[c] << "," << format_double(ce.ap) << "," << ce.tp << "," << ce.fp << "," << ce.fn << "\n";
  }
  return out.str();
}

std::string format_pr_curve_csv(const ClassEval& cls) {
  std::ostringstream out;
  out << "rank,score,precision,recall\n";
  for (std::size_t i = 0; i < cls.curve.size(); ++i)
    out << i + 1 << "," << format_double(cls.curve[i].score) << "," << format_double(cls.curve[i].precision) << ","
        << format_double(cls.curve[i].recall) << "\n";
  return out.str();
}

std::vector<Detection> parse_predictions(std::string_view text) {
  std::vector<Detection> out;
  for_each_line(text, [&](std::string_view line, int line_no) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const auto b = line.find_first_not_of(" \t", pos);
      if (b == std::string_view::npos) break;
      const auto e = line.find_first_of(" \t", b);
      fields.push_back(line.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
      pos = e == std::string_view::npos ? line.size() : e;
    }
    if (fields.size() != 7)
      throw ParseError("expected 7 space-separated fields, got " + std::to_string(fields.size()), line_no);
    Detection d;
    d.image_id = std::string(fields[0]);
    if (!parse_number(fields[1], d.class_index)) throw ParseError("class index is not an integer", line_no);
    if (!parse_number(fields[2], d.score) || !parse_number(fields[3], d.box.x) || !parse_number(fields[4], d.box.y) ||
        !parse_number(fields[5], d.box.w) || !parse_number(fields[6], d.box.h))
      throw ParseError("malformed number", line_no);
    if (d.score < 0 || d.score > 1) throw ParseError("score must lie in [0, 1]", line_no);
    if (d.box.w <= 0 || d.box.h <= 0) throw ParseError("box has a non-positive extent", line_no);
    out.push_back(std::move(d));
  });
  return out;
}

std::string format_predictions(std::span<const Detection> detections) {
  std::string out;
  for (const Detection& d : detections) {
    out += d.image_id + " " + std::to_string(d.class_index) + " " + format_double(d.score) + " " +
           format_double(d.box.x) + " " + format_double(d.box.y) + " " + format_double(d.box.w) + " " +
           format_double(d.box.h) + "\n";
  }
  return out;
}

}  // namespace yolospp
