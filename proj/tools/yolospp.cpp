// Command-line front end: detect, eval, verify, train, synth, export-cfg, init-weights.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "yolospp/checks/acceptance.hpp"
#include "yolospp/detect.hpp"
#include "yolospp/errors.hpp"
#include "yolospp/eval.hpp"
#include "yolospp/image_io.hpp"
#include "yolospp/netdef.hpp"
#include "yolospp/network.hpp"
#include "yolospp/train.hpp"
#include "yolospp/weights_io.hpp"

namespace fs = std::filesystem;
using namespace yolospp;

namespace {

constexpr const char* kPaletteHelp =
    "Box colors by class index mod 10: 0 red, 1 blue, 2 green, 3 yellow, 4 magenta, 5 cyan, "
    "6 orange, 7 brown, 8 white, 9 gray.";

std::uint64_t default_seed() {
  const char* env = std::getenv("YOLOSPP_SEED");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || env[0] == '-') throw UsageError(std::string("YOLOSPP_SEED is not an unsigned integer: '") + env + "'");
  return v;
}

void require_open_unit(double v, const char* flag) {
  if (!(v > 0 && v < 1)) throw UsageError(std::string(flag) + " must lie strictly between 0 and 1");
}

void require_size(int size) {
  if (size < 32 || size % 32 != 0)
    throw UsageError("--size must be a positive multiple of 32, got " + std::to_string(size));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

struct ModelOptions {
  std::string model = "yolov3_spp";
  std::string cfg;
  int classes = kVisDroneClasses;
  int size = 640;

  void add(CLI::App& app) {
    app.add_option("--model", model, "Builtin variant: yolov3, yolov3-spp or yolov3-tiny")->capture_default_str();
    app.add_option("--cfg", cfg, "Network definition file (overrides --model and --classes)");
    app.add_option("--classes", classes, "Class count of a builtin variant")->capture_default_str();
  }

  ModelGraph graph() const {
    if (!cfg.empty()) return load_cfg_file(cfg);
    const auto v = parse_variant(model);
    if (!v) throw UsageError("unknown model '" + model + "' (expected yolov3, yolov3-spp or yolov3-tiny)");
    if (classes < 1) throw UsageError("--classes must be >= 1");
    return builtin_graph(*v, classes, size);
  }
};

std::vector<fs::path> collect_images(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".ppm") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

struct DetectArgs {
  ModelOptions model;
  std::string weights;
  std::uint64_t seed = 0;
  double conf = kDefaultConfidenceThreshold;
  double nms = kDefaultNmsThreshold;
  std::vector<std::string> inputs;
  std::string output;
  std::string render;
};

int run_detect(const DetectArgs& a) {
  require_size(a.model.size);
  require_open_unit(a.conf, "--conf");
  require_open_unit(a.nms, "--nms");
  const ModelGraph graph = a.model.graph();
  shape_check(graph, a.model.size, a.model.size);
  const Network net = a.weights.empty() ? random_init(graph, a.seed) : load_weights_file(graph, a.weights);

  std::string predictions;
  int images = 0;
  std::size_t detections = 0;
  for (const fs::path& path : collect_images(a.inputs)) {
    const Tensor image = read_ppm(path.string());
    if (image.channels() != graph.net().channels)
      throw ValidationError(path.string() + ": network expects " + std::to_string(graph.net().channels) + " channels");
    const Letterboxed lb = letterbox(image, a.model.size);
    const auto heads = forward(net, lb.image);
    const auto dets = postprocess(heads, a.conf, a.nms, lb.transform, path.stem().string());
    predictions += format_predictions(dets);
    detections += dets.size();
    ++images;
    if (!a.render.empty()) {
      Tensor canvas = image;
      render_detections(canvas, dets);
      fs::create_directories(a.render);
      write_ppm((fs::path(a.render) / (path.stem().string() + ".ppm")).string(), canvas);
    }
  }
  if (images == 0) throw UsageError("no input images");
  if (a.output.empty() || a.output == "-")
    std::cout << predictions;
  else
    write_text(a.output, predictions);
  std::cerr << images << " image(s), " << detections << " detection(s)\n";
  return 0;
}

struct EvalArgs {
  std::string gt_dir;
  std::string predictions;
  int classes = kVisDroneClasses;
  double iou = kEvalIouThreshold;
  std::optional<double> conf;
  std::string out_dir;
};

int run_eval(const EvalArgs& a) {
  require_open_unit(a.iou, "--iou");
  if (a.conf) require_open_unit(*a.conf, "--conf");
  if (a.classes < 1) throw UsageError("--classes must be >= 1");
  const auto gt = load_visdrone_dir(a.gt_dir);
  std::vector<Detection> dets;
  try {
    dets = parse_predictions(read_text(a.predictions));
  } catch (const ParseError& e) {
    throw ParseError(a.predictions + ": " + e.what(), e.line());
  }
  if (a.conf) std::erase_if(dets, [&](const Detection& d) { return d.score < *a.conf; });
  const EvalReport report = evaluate(dets, gt, a.classes, a.iou);

  const std::string table = format_report_table(report, a.conf);
  std::cout << table;
  if (!a.out_dir.empty()) {
    const fs::path out(a.out_dir);
    write_text(out / "report.txt", table);
    write_text(out / "report.csv", format_report_csv(report));
    const auto names = class_column_names(a.classes);
    for (std::size_t c = 0; c < report.classes.size(); ++c)
      write_text(out / ("pr_" + names[c] + ".csv"), format_pr_curve_csv(report.classes[c]));
  }
  char line[64];
  std::snprintf(line, sizeof line, "\nmAP50 %.1f\n", report.map);
  std::cout << line;
  return 0;
}

struct VerifyArgs {
  bool json = false;
  bool inject_fault = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> only;
};

int run_verify(const VerifyArgs& a) {
  checks::AcceptanceOptions options;
  if (a.seed_given) options.seed = a.seed;
  options.inject_fault = a.inject_fault;
  for (const auto& name : a.only) {
    const auto all = checks::acceptance_checks();
    if (std::none_of(all.begin(), all.end(), [&](const auto& c) { return c.name == name; }))
      throw UsageError("unknown check '" + name + "'");
  }

  nlohmann::json doc;
  doc["seed"] = options.seed;
  doc["fault_injected"] = options.inject_fault;
  doc["checks"] = nlohmann::json::array();
  bool all_passed = true;
  for (const auto& check : checks::acceptance_checks()) {
    if (!a.only.empty() && std::find(a.only.begin(), a.only.end(), check.name) == a.only.end()) continue;
    const checks::CheckResult r = checks::run_check(check, options);
    all_passed = all_passed && r.passed;
    if (a.json) {
      doc["checks"].push_back({{"name", r.name},
                               {"passed", r.passed},
                               {"measured", r.measured},
                               {"tolerance", r.tolerance},
                               {"details", r.details},
                               {"seconds", r.seconds},
                               {"budget_seconds", r.budget_seconds}});
    } else {
      std::cout << checks::format_result_line(r) << "\n";
      for (const auto& d : r.details) std::cout << "    " << d << "\n";
      std::cout.flush();
    }
  }
  doc["passed"] = all_passed;
  if (a.json) std::cout << doc.dump(2) << "\n";
  else std::cout << (all_passed ? "all checks passed" : "some checks FAILED") << "\n";
  return all_passed ? 0 : 1;
}

struct TrainArgs {
  int images = 32;
  int size = 64;
  int classes = 2;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::string history;
  std::string save;
};

int run_train(TrainArgs a) {
  require_size(a.size);
  if (a.classes < 1 || a.classes > 4) throw UsageError("--classes must lie in 1..4");
  if (a.images < 1) throw UsageError("--images must be >= 1");
  if (a.config.steps < 0 || a.config.batch < 1) throw UsageError("--steps must be >= 0 and --batch >= 1");
  if (!(a.config.learning_rate > 0)) throw UsageError("--lr must be positive");
  if (!(a.config.momentum >= 0 && a.config.momentum < 1)) throw UsageError("--momentum must lie in [0, 1)");
  a.config.seed = a.seed;
  const auto data = make_synthetic_set(a.images, a.size, a.classes, a.seed);
  const ModelGraph graph = micro_detector_graph(a.classes, a.size);
  Network trained(graph);
  const auto history = train_toy(data, graph, a.config, &trained);

  std::string csv = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, static_cast<double>(history[i]));
    csv += buf;
  }
  if (!a.history.empty()) write_text(a.history, csv);
  if (!a.save.empty()) save_weights_file(trained, a.save);
  if (!history.empty())
    std::printf("%zu steps: loss %.4f -> %.4f\n", history.size(), static_cast<double>(history.front()),
                static_cast<double>(history.back()));
  else
    std::printf("0 steps\n");
  return 0;
}

struct SynthArgs {
  int count = 32;
  int size = 64;
  int classes = 2;
  std::uint64_t seed = 0;
  std::string output;
};

int run_synth(const SynthArgs& a) {
  require_size(a.size);
  if (a.classes < 1 || a.classes > 4) throw UsageError("--classes must lie in 1..4");
  if (a.count < 1) throw UsageError("--count must be >= 1");
  const fs::path out(a.output);
  fs::create_directories(out / "images");
  fs::create_directories(out / "labels");
  for (const auto& img : make_synthetic_set(a.count, a.size, a.classes, a.seed)) {
    write_ppm((out / "images" / (img.id + ".ppm")).string(), img.pixels);
    write_text(out / "labels" / (img.id + ".txt"), format_visdrone(img.objects));
  }
  std::printf("%d image(s) in %s\n", a.count, (out / "images").string().c_str());
  return 0;
}

int run_export_cfg(const ModelOptions& m, const std::string& output) {
  require_size(m.size);
  const std::string text = render_cfg(m.graph());
  if (output.empty() || output == "-")
    std::cout << text;
  else
    write_text(output, text);
  return 0;
}

int run_init_weights(const ModelOptions& m, std::uint64_t seed, const std::string& output) {
  const ModelGraph graph = m.graph();
  const Network net = random_init(graph, seed);
  save_weights_file(net, output);
  std::printf("%zu parameters written to %s\n", count_parameters(graph).total, output.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale YOLOv3 / YOLOv3-SPP detection kit"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 runtime failure, 2 usage error. YOLOSPP_SEED sets the default --seed.");

  std::uint64_t seed = 0;
  try {
    seed = default_seed();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  DetectArgs det;
  det.seed = seed;
  auto* detect = app.add_subcommand("detect", "Detect objects in P6 PPM images and write predictions");
  det.model.add(*detect);
  detect->add_option("--size", det.model.size, "Network input side, a multiple of 32")->capture_default_str();
  detect->add_option("--weights", det.weights, "Darknet .weights file (default: random weights from --seed)");
  detect->add_option("--seed", det.seed, "Seed for random weights")->capture_default_str();
  detect->add_option("--conf", det.conf, "Confidence threshold, in (0, 1)")->capture_default_str();
  detect->add_option("--nms", det.nms, "NMS IoU threshold, in (0, 1)")->capture_default_str();
  detect->add_option("-o,--output", det.output, "Prediction file (default: standard output)");
  detect->add_option("--render", det.render, "Directory for copies of the images with boxes drawn. " +
                                                 std::string(kPaletteHelp));
  detect->add_option("inputs", det.inputs, "Images or directories of .ppm files")->required();

  EvalArgs ev;
  double eval_conf = 0;
  auto* eval = app.add_subcommand("eval", "Score predictions against VisDrone annotations");
  eval->add_option("--gt", ev.gt_dir, "Directory of VisDrone .txt annotations")->required();
  eval->add_option("--pred", ev.predictions, "Prediction file")->required();
  eval->add_option("--classes", ev.classes, "Class count")->capture_default_str();
  eval->add_option("--iou", ev.iou, "Matching IoU threshold, in (0, 1)")->capture_default_str();
  auto* eval_conf_opt = eval->add_option("--conf", eval_conf, "Drop predictions scored below this first");
  eval->add_option("--out", ev.out_dir, "Directory for report.txt, report.csv and pr_<class>.csv");

  VerifyArgs ver;
  ver.seed = seed;
  auto* verify = app.add_subcommand("verify", "Run the acceptance checks");
  verify->add_flag("--json", ver.json, "Print a JSON document instead of text");
  verify->add_flag("--inject-fault", ver.inject_fault, "Perturb one analytic gradient by 1e-2");
  auto* verify_seed = verify->add_option("--seed", ver.seed, "Seed for the randomized checks");
  verify->add_option("--check", ver.only, "Run only the named check (repeatable)");

  TrainArgs tr;
  tr.seed = seed;
  auto* train = app.add_subcommand("train", "Train the micro detector on a synthetic set");
  train->add_option("--images", tr.images, "Synthetic images")->capture_default_str();
  train->add_option("--size", tr.size, "Image side")->capture_default_str();
  train->add_option("--classes", tr.classes, "Classes, 1..4")->capture_default_str();
  train->add_option("--steps", tr.config.steps, "SGD steps")->capture_default_str();
  train->add_option("--batch", tr.config.batch, "Images accumulated per step")->capture_default_str();
  train->add_option("--lr", tr.config.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--momentum", tr.config.momentum, "Momentum")->capture_default_str();
  train->add_option("--seed", tr.seed, "Seed for data, initialization and shuffling")->capture_default_str();
  train->add_option("--history", tr.history, "Write the per-step loss as CSV");
  train->add_option("--save", tr.save, "Write the trained weights");

  SynthArgs sy;
  sy.seed = seed;
  auto* synth = app.add_subcommand("synth", "Write a synthetic set as PPM images and VisDrone labels");
  synth->add_option("--count", sy.count, "Images")->capture_default_str();
  synth->add_option("--size", sy.size, "Image side")->capture_default_str();
  synth->add_option("--classes", sy.classes, "Classes, 1..4")->capture_default_str();
  synth->add_option("--seed", sy.seed, "Seed")->capture_default_str();
  synth->add_option("-o,--output", sy.output, "Output directory")->required();

  ModelOptions exp;
  std::string exp_out;
  auto* export_cfg = app.add_subcommand("export-cfg", "Print the cfg text of a builtin variant");
  exp.add(*export_cfg);
  export_cfg->add_option("--size", exp.size, "Input side recorded in [net]")->capture_default_str();
  export_cfg->add_option("-o,--output", exp_out, "Output file (default: standard output)");

  ModelOptions ini;
  std::uint64_t ini_seed = seed;
  std::string ini_out;
  auto* init = app.add_subcommand("init-weights", "Write randomly initialized weights for a network");
  ini.add(*init);
  init->add_option("--seed", ini_seed, "Seed")->capture_default_str();
  init->add_option("-o,--output", ini_out, "Weights file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*detect) return run_detect(det);
    if (*eval) {
      if (*eval_conf_opt) ev.conf = eval_conf;
      return run_eval(ev);
    }
    if (*verify) {
      ver.seed_given = *verify_seed || std::getenv("YOLOSPP_SEED");
      return run_verify(ver);
    }
    if (*train) return run_train(tr);
    if (*synth) return run_synth(sy);
    if (*export_cfg) return run_export_cfg(exp, exp_out);
    if (*init) return run_init_weights(ini, ini_seed, ini_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
