#include "yolospp/checks/acceptance.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <limits>
#include <random>

#include "yolospp/checks/gradcheck.hpp"
#include "yolospp/checks/oracles.hpp"
#include "yolospp/checks/reported_results.hpp"
#include "yolospp/detect.hpp"
#include "yolospp/eval.hpp"
#include "yolospp/netdef.hpp"
#include "yolospp/network.hpp"
#include "yolospp/train.hpp"
#include "yolospp/weights_io.hpp"

namespace yolospp::checks {

namespace {

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }
int uniform_int(std::mt19937_64& rng, int lo, int hi) { return lo + static_cast<int>(unit(rng) * (hi - lo + 1)); }

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(unit(rng) * static_cast<double>(i))]);
}

// ---------------------------------------------------------------------------------------------

CheckResult gradient_fidelity(const AcceptanceOptions& opt) {
  CheckResult r;
  constexpr int kNets = 24;
  GradCheckResult nets;
  for (int i = 0; i < kNets; ++i) {
    MicroNetCase c = random_micro_net(opt.seed + static_cast<std::uint64_t>(i));
    nets.merge(check_micro_net(c, opt.inject_fault && i == 0 ? 1e-2 : 0.0));
  }
  const GradCheckResult loss = check_loss_gradients(opt.seed, 8);
  const GradCheckResult detector = check_detector_gradients(opt.seed, 300);

  const double worst = std::max({nets.max_relative_error, loss.max_relative_error, detector.max_relative_error});
  r.passed = worst <= kGradientTolerance && nets.checked > 0 && loss.checked > 0 && detector.checked > 0;
  r.measured = fmt("max relative error %.3g", worst);
  r.tolerance = fmt("<= %g, central differences with step %g", kGradientTolerance, kFiniteDifferenceStep);
  auto line = [&](const char* what, const GradCheckResult& g) {
    r.details.push_back(fmt("%s: %zu gradients, max rel err %.3g at %s, %zu skipped at a kink", what, g.checked,
                            g.max_relative_error, g.worst.c_str(), g.skipped_at_kink));
  };
  line(fmt("%d random micro nets", kNets).c_str(), nets);
  line("loss w.r.t. raw head values", loss);
  line("micro detector through the loss", detector);
  if (opt.inject_fault) r.details.push_back("fault injected: +1e-2 on one analytic gradient");
  return r;
}

CheckResult spp_contract(const AcceptanceOptions& opt) {
  CheckResult r;
  std::mt19937_64 rng(opt.seed);
  int shape_ok = 0;
  int dominance_ok = 0;
  int oracle_ok = 0;
  constexpr int kCases = 100;
  for (int n = 0; n < kCases; ++n) {
    const int c = uniform_int(rng, 1, 32);
    const int h = uniform_int(rng, 1, 64);
    const int w = uniform_int(rng, 1, 64);
    Tensor in = Tensor::feature_map(c, h, w);
    // Coarse quantization produces ties inside windows.
    const bool quantized = n % 4 == 0;
    for (Real& v : in.data()) v = static_cast<Real>(quantized ? std::floor(uniform(rng, -3, 3)) : uniform(rng, -1, 1));
    const Tensor out = spp_forward(in);
    if (out.shape() == Shape{4 * c, h, w}) ++shape_ok;
    else continue;

    bool dominates = true;
    bool matches = true;
    for (int b = 1; b <= 3; ++b) {
      const Tensor oracle = window_scan_same(in, kSppKernels[static_cast<std::size_t>(b - 1)]);
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const Real v = out.at(b * c + ch, y, x);
            const Real expected = oracle.at(ch, y, x);
            dominates = dominates && v >= out.at(ch, y, x);
            matches = matches && std::memcmp(&v, &expected, sizeof(Real)) == 0;
          }
    }
    bool identity = true;
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) identity = identity && out.at(ch, y, x) == in.at(ch, y, x);
    dominance_ok += dominates && identity;
    oracle_ok += matches;
  }
  r.passed = shape_ok == kCases && dominance_ok == kCases && oracle_ok == kCases;
  r.measured = fmt("shape %d/%d, dominance %d/%d, bitwise oracle %d/%d", shape_ok, kCases, dominance_ok, kCases,
                   oracle_ok, kCases);
  r.tolerance = "all cases, exact";
  return r;
}

CheckResult architecture_layout(const AcceptanceOptions&) {
  CheckResult r;
  bool ok = true;
  auto expect = [&](bool cond, std::string what) {
    r.details.push_back((cond ? "ok   " : "FAIL ") + what);
    ok = ok && cond;
  };

  const ModelGraph v3 = builtin_graph(Variant::yolov3, 80);
  int backbone_convs = 0;
  for (int i = 0; i <= kDarknet53LastLayer; ++i) backbone_convs += v3.layer(i).kind == LayerKind::convolutional;
  expect(backbone_convs == 52, fmt("darknet-53 backbone convolutions: %d (expected 52)", backbone_convs));

  auto grids = [](const ModelGraph& g, int size) {
    const auto shapes = shape_check(g, size, size);
    std::vector<int> out;
    for (int y : g.yolo_layers()) out.push_back(shapes[static_cast<std::size_t>(y)].height);
    return out;
  };
  auto head_channels = [](const ModelGraph& g) {
    std::vector<int> out;
    for (int y : g.yolo_layers()) out.push_back(g.shapes()[static_cast<std::size_t>(y)].channels);
    return out;
  };
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (int x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
    return s;
  };

  for (Variant v : {Variant::yolov3, Variant::yolov3_spp}) {
    const std::string name(to_string(v));
    const ModelGraph g80 = builtin_graph(v, 80);
    const ModelGraph g10 = builtin_graph(v, 10);
    const auto at256 = grids(g80, 256);
    const auto at640 = grids(g80, 640);
    expect(at256 == std::vector<int>{8, 16, 32}, name + " grids at 256: " + join(at256) + " (expected 8,16,32)");
    expect(at640 == std::vector<int>{20, 40, 80}, name + " grids at 640: " + join(at640) + " (expected 20,40,80)");
    expect(head_channels(g80) == std::vector<int>{255, 255, 255},
           name + " head channels at C=80: " + join(head_channels(g80)));
    expect(head_channels(g10) == std::vector<int>{45, 45, 45}, name + " head channels at C=10: " + join(head_channels(g10)));
  }
  r.passed = ok;
  r.measured = ok ? "52 backbone convs; grids 32/16/8 and 80/40/20; 255 and 45 channels" : "mismatch (see details)";
  r.tolerance = "exact";
  return r;
}

bool same_report(const EvalReport& a, const EvalReport& b) {
  if (a.map != b.map || a.precision != b.precision || a.recall != b.recall || a.classes.size() != b.classes.size())
    return false;
  for (std::size_t c = 0; c < a.classes.size(); ++c) {
    const ClassEval& x = a.classes[c];
    const ClassEval& y = b.classes[c];
    if (x.ap != y.ap || x.tp != y.tp || x.fp != y.fp || x.fn != y.fn || x.discarded != y.discarded) return false;
  }
  return true;
}

CheckResult evaluator_oracle(const AcceptanceOptions& opt) {
  CheckResult r;
  constexpr int kInstances = 500;
  double worst = 0;
  int count_mismatch = 0;
  int permutation_failures = 0;
  long tp = 0, fp = 0, discarded = 0, classes_scored = 0;
  std::mt19937_64 rng(opt.seed);
  for (int n = 0; n < kInstances; ++n) {
    EvalInstance inst = random_eval_instance(opt.seed * 1000 + static_cast<std::uint64_t>(n));
    const EvalReport report = evaluate(inst.detections, inst.ground_truth, inst.num_classes);
    const OracleReport oracle = brute_force_evaluate(inst.detections, inst.ground_truth, inst.num_classes, 0.5);
    worst = std::max(worst, std::abs(report.map - oracle.map) / 100);
    for (int c = 0; c < inst.num_classes; ++c) {
      const auto& a = report.classes[static_cast<std::size_t>(c)];
      const auto& b = oracle.classes[static_cast<std::size_t>(c)];
      worst = std::max(worst, std::abs(a.ap - b.ap) / 100);
      count_mismatch += a.tp != b.tp || a.fp != b.fp || a.fn != b.fn;
      tp += a.tp;
      fp += a.fp;
      discarded += a.discarded;
      classes_scored += a.gt_count > 0;
    }
    for (int s = 0; s < 3; ++s) {
      EvalInstance shuffled = inst;
      shuffle(shuffled.detections, rng);
      shuffle(shuffled.ground_truth, rng);
      permutation_failures +=
          !same_report(report, evaluate(shuffled.detections, shuffled.ground_truth, shuffled.num_classes));
    }
  }
  r.passed = worst <= 1e-9 && count_mismatch == 0 && permutation_failures == 0;
  r.measured = fmt("max |AP - oracle| %.3g over %d instances; %d count mismatches; %d permutation failures", worst,
                   kInstances, count_mismatch, permutation_failures);
  r.tolerance = "<= 1e-9 (AP as a fraction), counts exact, permutation-invariant";
  r.details.push_back(fmt("%ld classes with ground truth; %ld TP, %ld FP, %ld discarded in ignored regions",
                          classes_scored, tp, fp, discarded));
  return r;
}

CheckResult ap_fixture(const AcceptanceOptions&) {
  CheckResult r;
  const std::vector<GroundTruthBox> gt{{"img", 0, {20, 20, 10, 10}, false}, {"img", 0, {80, 20, 10, 10}, false}};
  const std::vector<Detection> dets{
      {"img", 0, 0.9, {20, 20, 10, 10}}, {"img", 0, 0.8, {50, 80, 10, 10}}, {"img", 0, 0.7, {80, 20, 10, 10}}};
  const EvalReport report = evaluate(dets, gt, 1);
  const double ap = report.classes[0].ap / 100;
  const double expected = 5.0 / 6.0;
  const double ulps = std::abs(ap - expected) / (std::nextafter(expected, 1.0) - expected);
  const auto& cls = report.classes[0];
  r.passed = ulps <= 2 && cls.tp == 2 && cls.fp == 1 && cls.fn == 0;
  r.measured = fmt("AP %.17g (TP %ld, FP %ld)", ap, cls.tp, cls.fp);
  r.tolerance = fmt("5/6 = %.17g within 2 ulp; off by %.0f ulp", expected, ulps);
  return r;
}

CheckResult weight_round_trip(const AcceptanceOptions& opt) {
  CheckResult r;
  bool ok = true;
  auto round_trip = [&](const ModelGraph& g, const std::string& name, std::size_t expected_floats) {
    const Network net = random_init(g, opt.seed);
    const auto bytes = save_weights(net);
    const Network loaded = load_weights(g, bytes);
    const bool params_equal = loaded == net;
    const bool bytes_equal = save_weights(loaded) == bytes;
    const std::size_t floats = (bytes.size() - header_size(WeightsHeader{})) / 4;
    const bool count_ok = floats == expected_floats && floats == count_parameters(g).total;
    ok = ok && params_equal && bytes_equal && count_ok;
    r.details.push_back(fmt("%s: %zu floats, save->load %s, load->save %s", name.c_str(), floats,
                            params_equal ? "identical" : "DIFFERS", bytes_equal ? "byte-identical" : "DIFFERS"));
  };

  LayerSpec conv;
  conv.kind = LayerKind::convolutional;
  conv.filters = 32;
  conv.size = 3;
  conv.batch_normalize = true;
  conv.activation = Activation::leaky;
  round_trip(ModelGraph::from_layers(NetSpec{64, 64, 3}, {conv}), "1-layer fixture", 992);
  const ModelGraph spp = builtin_graph(Variant::yolov3_spp, 80);
  round_trip(spp, "yolov3-spp (80 classes)", count_parameters(spp).total);
  r.passed = ok;
  r.measured = ok ? "both round trips exact" : "mismatch (see details)";
  r.tolerance = "bitwise";
  return r;
}

CheckResult decode_nms(const AcceptanceOptions& opt) {
  CheckResult r;
  std::mt19937_64 rng(opt.seed);
  const auto anchors = coco_anchors();

  double worst_factorization = 0;
  std::size_t decoded = 0;
  int count_mismatch = 0;
  for (int n = 0; n < 40; ++n) {
    HeadOutput head;
    head.stride = 1 << uniform_int(rng, 3, 5);
    head.grid_width = uniform_int(rng, 1, 8);
    head.grid_height = uniform_int(rng, 1, 8);
    head.num_classes = uniform_int(rng, 1, 12);
    head.anchors = {anchors[0], anchors[4], anchors[8]};
    head.raw = Tensor::feature_map(3 * head.values_per_anchor(), head.grid_height, head.grid_width);
    for (Real& v : head.raw.data()) v = static_cast<Real>(uniform(rng, -4, 4));
    const auto dets = decode(head, 0.0, LetterboxTransform{}, "img");
    count_mismatch += dets.size() != static_cast<std::size_t>(3 * head.grid_width * head.grid_height);

    // Expected (center, score) per slot from an independent logistic; matched by center.
    std::vector<std::pair<std::pair<double, double>, double>> expected;
    auto logistic = [](double x) { return 1 / (1 + std::exp(-x)); };
    for (int a = 0; a < 3; ++a)
      for (int cy = 0; cy < head.grid_height; ++cy)
        for (int cx = 0; cx < head.grid_width; ++cx) {
          const int base = a * head.values_per_anchor();
          double best = -1;
          for (int c = 0; c < head.num_classes; ++c) best = std::max(best, logistic(head.raw.at(base + 5 + c, cy, cx)));
          expected.push_back({{(logistic(head.raw.at(base, cy, cx)) + cx) * head.stride,
                               (logistic(head.raw.at(base + 1, cy, cx)) + cy) * head.stride},
                              logistic(head.raw.at(base + 4, cy, cx)) * best});
        }
    for (const Detection& d : dets) {
      double nearest = std::numeric_limits<double>::infinity();
      double score = 0;
      for (const auto& e : expected) {
        const double dist = std::hypot(e.first.first - d.box.x, e.first.second - d.box.y);
        if (dist < nearest) {
          nearest = dist;
          score = e.second;
        }
      }
      worst_factorization = std::max(worst_factorization, std::abs(d.score - score) / std::max(score, 1e-300));
      ++decoded;
    }
  }

  int overlap_violations = 0;
  int permutation_failures = 0;
  std::size_t survivors = 0;
  for (int n = 0; n < 60; ++n) {
    const double thr = uniform(rng, 0.2, 0.8);
    std::vector<Detection> dets;
    const int clusters = uniform_int(rng, 1, 6);
    for (int k = 0; k < clusters; ++k) {
      const double cx = uniform(rng, 20, 180);
      const double cy = uniform(rng, 20, 180);
      const int members = uniform_int(rng, 1, 12);
      for (int m = 0; m < members; ++m)
        dets.push_back({"img" + std::to_string(uniform_int(rng, 0, 1)), uniform_int(rng, 0, 2),
                        std::round(uniform(rng, 0, 1) * 20) / 20,  // coarse scores force ties
                        {cx + uniform(rng, -8, 8), cy + uniform(rng, -8, 8), uniform(rng, 20, 40), uniform(rng, 20, 40)}});
    }
    const auto kept = nms(dets, thr);
    survivors += kept.size();
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        if (kept[i].image_id == kept[j].image_id && kept[i].class_index == kept[j].class_index &&
            iou(kept[i].box, kept[j].box) > thr)
          ++overlap_violations;
    for (int s = 0; s < 5; ++s) {
      auto shuffled = dets;
      shuffle(shuffled, rng);
      permutation_failures += nms(shuffled, thr) != kept;
    }
  }

  const double eps = std::numeric_limits<double>::epsilon();
  r.passed = worst_factorization <= 4 * eps && count_mismatch == 0 && overlap_violations == 0 && permutation_failures == 0;
  r.measured = fmt("factorization max rel diff %.3g over %zu detections; %d same-class pairs above threshold among %zu "
                   "survivors; %d permutation failures",
                   worst_factorization, decoded, overlap_violations, survivors, permutation_failures);
  r.tolerance = fmt("factorization <= 4 eps (%.3g); no overlaps; permutation-invariant", 4 * eps);
  return r;
}

double dataset_loss(const Network& net, const std::vector<SyntheticImage>& data) {
  double sum = 0;
  for (const auto& img : data) sum += image_loss_and_gradients(net, img, LossWeights{}).loss.total;
  return sum / static_cast<double>(data.size());
}

CheckResult toy_training(const AcceptanceOptions& opt) {
  CheckResult r;
  const auto data = make_synthetic_set(32, 64, 2, opt.seed);
  const ModelGraph graph = micro_detector_graph(2, 64);
  TrainConfig config;
  config.seed = opt.seed;
  Network trained(graph);
  const auto history = train_toy(data, graph, config, &trained);
  const double before = dataset_loss(random_init(graph, opt.seed), data);
  const double after = dataset_loss(trained, data);
  bool finite = std::isfinite(before) && std::isfinite(after);
  for (Real v : history) finite = finite && std::isfinite(v);
  const double ratio = after / before;
  r.passed = finite && ratio <= 0.5 && history.size() == 200;
  r.measured = fmt("mean dataset loss %.4g -> %.4g (ratio %.3f)", before, after, ratio);
  r.tolerance = "ratio <= 0.5, all values finite";
  r.details.push_back(fmt("%zu steps, batch %d, lr %g, momentum %g; batch loss first %.4g, last %.4g", history.size(),
                          config.batch, static_cast<double>(config.learning_rate), static_cast<double>(config.momentum),
                          static_cast<double>(history.front()), static_cast<double>(history.back())));
  return r;
}

CheckResult reported_numbers(const AcceptanceOptions&) {
  CheckResult r;
  bool ok = true;
  for (const ReportedResult& rep : reported_results()) {
    const PredictionDump dump = dump_for_class_ap(rep.class_ap, 1000);
    // Through the text formats, as the CLI would see them.
    const auto detections = parse_predictions(format_predictions(dump.detections));
    const EvalReport report = evaluate(detections, dump.ground_truth, kVisDroneClasses);
    double worst = 0;
    double mean = 0;
    for (std::size_t c = 0; c < rep.class_ap.size(); ++c) {
      worst = std::max(worst, std::abs(report.classes[c].ap - rep.class_ap[c]));
      mean += rep.class_ap[c] / static_cast<double>(rep.class_ap.size());
    }
    const bool classes_ok = worst <= 1e-9;
    const bool mean_ok = std::abs(report.map - mean) <= 1e-9;
    ok = ok && classes_ok && mean_ok;
    std::string line = fmt("%s: per-class AP reproduced to %.2g, mAP %.4f", std::string(rep.model).c_str(), worst, report.map);
    const double rounded = std::round(report.map * 10) / 10;
    if (std::abs(rounded - rep.map) < 1e-9) {
      line += fmt(" = reported %.1f after rounding", rep.map);
    } else {
      line += fmt(" vs reported %.1f: the published per-class APs average to %.2f, not to the published mAP", rep.map,
                  mean);
    }
    r.details.push_back(line);
  }

  const ModelGraph v3 = builtin_graph(Variant::yolov3, 10);
  const ModelGraph spp = builtin_graph(Variant::yolov3_spp, 10);
  const ModelGraph tiny = builtin_graph(Variant::yolov3_tiny, 10);
  const auto block = inserted_block(v3, spp);
  bool block_ok = false;
  if (block) {
    block_ok = block->second - block->first == 7;
    for (int i = block->first; i < block->second && block_ok; ++i)
      block_ok = spp.layer(i).kind != LayerKind::yolo && spp.layer(i).kind != LayerKind::shortcut;
  }
  const std::size_t p_v3 = count_parameters(v3).total;
  const std::size_t p_spp = count_parameters(spp).total;
  const std::size_t p_tiny = count_parameters(tiny).total;
  std::size_t block_params = 0;
  if (block)
    for (int i = block->first; i < block->second; ++i) block_params += count_parameters(spp).per_layer[static_cast<std::size_t>(i)];
  const bool delta_ok = block && p_spp - p_v3 == block_params;
  const bool tiny_ok = p_tiny < p_v3;
  ok = ok && block_ok && delta_ok && tiny_ok;
  r.details.push_back(block ? fmt("yolov3-spp = yolov3 + layers [%d, %d) (SPP pools, routes and one 1x1 conv); "
                                  "parameter delta %zu == block parameters %zu",
                                  block->first, block->second, p_spp - p_v3, block_params)
                            : std::string("yolov3-spp is NOT yolov3 plus one contiguous block"));
  r.details.push_back(fmt("parameters at C=10: tiny %zu < yolov3 %zu < yolov3-spp %zu", p_tiny, p_v3, p_spp));
  r.details.push_back("training-dependent numbers (precision, recall, mAP of each model) are not reproduced");
  r.passed = ok;
  r.measured = ok ? "per-class APs and means reproduced from dumps; structural deltas exact" : "mismatch (see details)";
  r.tolerance = "AP and mAP within 1e-9; structure exact";
  return r;
}

constexpr std::array<AcceptanceCheck, 9> kChecks{{
    {"gradient-fidelity", "analytic vs central-difference gradients on micro nets and the loss", gradient_fidelity, 60},
    {"spp-contract", "SPP shape, dominance and window-scan equality on 100 random shapes", spp_contract, 0},
    {"architecture-layout", "backbone depth, head grids and head channels", architecture_layout, 0},
    {"evaluator-oracle", "evaluate() vs brute-force evaluator on 500 random instances", evaluator_oracle, 60},
    {"ap-fixture", "[TP, FP, TP] with 2 ground-truth boxes gives AP 5/6", ap_fixture, 0},
    {"weights-round-trip", "save/load identity on a 1-layer net and full yolov3-spp", weight_round_trip, 0},
    {"decode-nms", "score factorization, NMS overlap bound and permutation invariance", decode_nms, 0},
    {"toy-training", "200 SGD steps halve the loss of the micro detector", toy_training, 300},
    {"reported-numbers", "published AP tables reproduced from dumps; structural deltas", reported_numbers, 0},
}};

}  // namespace

std::span<const AcceptanceCheck> acceptance_checks() { return kChecks; }

CheckResult run_check(const AcceptanceCheck& check, const AcceptanceOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = check.run(options);
  } catch (const std::exception& e) {
    r.passed = false;
    r.measured = std::string("exception: ") + e.what();
  }
  r.name = std::string(check.name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.budget_seconds = check.budget_seconds;
  if (check.budget_seconds > 0 && r.seconds > check.budget_seconds) {
    r.passed = false;
    r.details.push_back(fmt("runtime %.1f s exceeds the %.0f s budget", r.seconds, check.budget_seconds));
  }
  return r;
}

std::string format_result_line(const CheckResult& r) {
  std::string line = (r.passed ? "PASS " : "FAIL ") + r.name + ": " + r.measured;
  if (!r.tolerance.empty()) line += " (" + r.tolerance + ")";
  line += fmt(" [%.1f s]", r.seconds);
  return line;
}

EvalInstance random_eval_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EvalInstance inst;
  inst.num_classes = uniform_int(rng, 1, 3);
  const int images = uniform_int(rng, 1, 5);
  const int boxes = uniform_int(rng, 0, 10);
  for (int b = 0; b < boxes; ++b) {
    GroundTruthBox g;
    g.image_id = "im" + std::to_string(uniform_int(rng, 0, images - 1));
    g.ignore = unit(rng) < 0.1;
    g.class_index = g.ignore ? -1 : uniform_int(rng, 0, inst.num_classes - 1);
    g.box = {uniform(rng, 10, 90), uniform(rng, 10, 90), uniform(rng, 5, 30), uniform(rng, 5, 30)};
    inst.ground_truth.push_back(g);
  }
  const int dets = uniform_int(rng, 0, 12);
  for (int d = 0; d < dets; ++d) {
    Detection det;
    det.score = unit(rng);
    if (!inst.ground_truth.empty() && unit(rng) < 0.7) {
      const GroundTruthBox& g =
          inst.ground_truth[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(inst.ground_truth.size()) - 1))];
      det.image_id = g.image_id;
      det.class_index = g.ignore || unit(rng) < 0.2 ? uniform_int(rng, 0, inst.num_classes - 1) : g.class_index;
      det.box = {g.box.x + uniform(rng, -0.25, 0.25) * g.box.w, g.box.y + uniform(rng, -0.25, 0.25) * g.box.h,
                 g.box.w * uniform(rng, 0.7, 1.4), g.box.h * uniform(rng, 0.7, 1.4)};
    } else {
      det.image_id = "im" + std::to_string(uniform_int(rng, 0, images - 1));
      det.class_index = uniform_int(rng, 0, inst.num_classes - 1);
      det.box = {uniform(rng, 10, 90), uniform(rng, 10, 90), uniform(rng, 5, 30), uniform(rng, 5, 30)};
    }
    inst.detections.push_back(det);
  }
  return inst;
}

}  // namespace yolospp::checks
