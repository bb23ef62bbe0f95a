#include "yolospp/checks/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "yolospp/train.hpp"
#include "yolospp/weights_io.hpp"

namespace yolospp::checks {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }
int uniform_int(std::mt19937_64& rng, int lo, int hi) { return lo + static_cast<int>(unit(rng) * (hi - lo + 1)); }

void randomize_statistics(Network& net, std::mt19937_64& rng) {
  for (int l : net.graph().conv_layers()) {
    ConvParams& p = net.conv(l);
    for (Real& b : p.biases) b = static_cast<Real>(uniform(rng, -0.5, 0.5));
    if (!p.batch_normalize) continue;
    for (Real& s : p.scales) s = static_cast<Real>(uniform(rng, 0.5, 1.5));
    for (Real& m : p.rolling_mean) m = static_cast<Real>(uniform(rng, -0.3, 0.3));
    for (Real& v : p.rolling_variance) v = static_cast<Real>(uniform(rng, 0.5, 1.5));
  }
}

void add_conv_probes(Network& net, const NetworkGradients& grads, std::vector<Probe>& probes, std::size_t max_weights,
                     std::mt19937_64* rng) {
  for (int l : net.graph().conv_layers()) {
    ConvParams& p = net.conv(l);
    const ConvGrads& g = grads.conv[static_cast<std::size_t>(l)];
    const std::string prefix = "layer " + std::to_string(l) + " ";
    std::vector<std::size_t> picked(p.weights.size());
    std::iota(picked.begin(), picked.end(), std::size_t{0});
    if (rng && picked.size() > max_weights) {
      for (std::size_t i = 0; i < max_weights; ++i)
        std::swap(picked[i], picked[i + static_cast<std::size_t>(unit(*rng) * static_cast<double>(picked.size() - i))]);
      picked.resize(max_weights);
      std::sort(picked.begin(), picked.end());
    }
    for (std::size_t k : picked) probes.push_back({&p.weights[k], g.weights[k], prefix + "weight " + std::to_string(k)});
    for (std::size_t k = 0; k < p.biases.size(); ++k)
      probes.push_back({&p.biases[k], g.biases[k], prefix + (p.batch_normalize ? "beta " : "bias ") + std::to_string(k)});
    if (p.batch_normalize)
      for (std::size_t k = 0; k < p.scales.size(); ++k)
        probes.push_back({&p.scales[k], g.scales[k], prefix + "gamma " + std::to_string(k)});
  }
}

}  // namespace

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
}

void GradCheckResult::merge(const GradCheckResult& other) {
  checked += other.checked;
  skipped_at_kink += other.skipped_at_kink;
  if (other.max_relative_error > max_relative_error || worst.empty()) {
    max_relative_error = other.max_relative_error;
    worst = other.worst;
  }
}

std::vector<std::uint8_t> kink_signature(const Network& net, const GradTape& tape) {
  const ModelGraph& g = net.graph();
  const auto& outputs = tape.layer_outputs();
  std::vector<std::uint8_t> sig;
  for (int i = 0; i < g.size(); ++i) {
    const LayerSpec& l = g.layer(i);
    const Tensor& out = outputs[static_cast<std::size_t>(i)];
    const bool leaky_layer = (l.kind == LayerKind::convolutional || l.kind == LayerKind::shortcut) &&
                             l.activation == Activation::leaky;
    if (leaky_layer) {
      for (Real v : out.data()) sig.push_back(v >= 0);
    } else if (l.kind == LayerKind::maxpool) {
      const int s = g.sources(i)[0];
      const Tensor& in = s < 0 ? tape.input() : outputs[static_cast<std::size_t>(s)];
      const PoolWindow win = PoolWindow::darknet(l.size, l.stride, l.padding);
      for (int c = 0; c < out.channels(); ++c)
        for (int oy = 0; oy < out.height(); ++oy)
          for (int ox = 0; ox < out.width(); ++ox) {
            int best = -1;
            Real best_v = 0;
            for (int dy = 0; dy < win.size; ++dy)
              for (int dx = 0; dx < win.size; ++dx) {
                const int y = oy * win.stride - win.pad_before + dy;
                const int x = ox * win.stride - win.pad_before + dx;
                if (y < 0 || y >= in.height() || x < 0 || x >= in.width()) continue;
                if (best < 0 || in.at(c, y, x) > best_v) {
                  best = dy * win.size + dx;
                  best_v = in.at(c, y, x);
                }
              }
            sig.push_back(static_cast<std::uint8_t>(best));
          }
    }
  }
  return sig;
}

GradCheckResult compare_gradients(std::vector<Probe>& probes, const LossFunction& loss) {
  GradCheckResult result;
  std::vector<std::uint8_t> base;
  loss(&base);
  std::vector<std::uint8_t> plus;
  std::vector<std::uint8_t> minus;
  for (Probe& p : probes) {
    const Real original = *p.value;
    const Real hi = original + static_cast<Real>(kFiniteDifferenceStep);
    const Real lo = original - static_cast<Real>(kFiniteDifferenceStep);
    *p.value = hi;
    const double f_hi = loss(&plus);
    *p.value = lo;
    const double f_lo = loss(&minus);
    *p.value = original;
    if (plus != base || minus != base) {
      ++result.skipped_at_kink;
      continue;
    }
    const double numeric = (f_hi - f_lo) / (static_cast<double>(hi) - static_cast<double>(lo));
    const double err = relative_error(p.analytic, numeric);
    ++result.checked;
    if (err > result.max_relative_error || result.worst.empty()) {
      result.max_relative_error = err;
      result.worst = p.label;
    }
  }
  return result;
}

MicroNetCase random_micro_net(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const NetSpec spec{uniform_int(rng, 3, 9), uniform_int(rng, 3, 9), uniform_int(rng, 1, 3)};
  const int count = uniform_int(rng, 2, 5);
  std::vector<LayerSpec> layers;
  std::vector<LayerShape> shapes;

  auto conv = [&] {
    LayerSpec l;
    l.kind = LayerKind::convolutional;
    l.filters = uniform_int(rng, 1, 5);
    l.size = unit(rng) < 0.5 ? 1 : 3;
    const LayerShape prev = shapes.empty() ? LayerShape{spec.channels, spec.height, spec.width} : shapes.back();
    l.stride = unit(rng) < 0.25 && prev.height > 1 && prev.width > 1 ? 2 : 1;
    l.batch_normalize = unit(rng) < 0.5;
    const double a = unit(rng);
    l.activation = a < 0.5 ? Activation::leaky : a < 0.75 ? Activation::linear : Activation::sigmoid;
    return l;
  };

  for (int i = 0; i < count; ++i) {
    LayerSpec l = conv();
    if (i > 0) {
      const LayerShape prev = shapes.back();
      const double pick = unit(rng);
      if (pick < 0.4) {
        // keep the conv
      } else if (pick < 0.6) {
        LayerSpec m;
        m.kind = LayerKind::maxpool;
        m.size = uniform_int(rng, 2, 3);
        m.stride = uniform_int(rng, 1, 2);
        m.padding = uniform_int(rng, 0, m.size - 1);
        if (prev.height + m.padding >= m.size && prev.width + m.padding >= m.size) l = m;
      } else if (pick < 0.7) {
        if (prev.height * prev.width <= 30) {
          l = LayerSpec{};
          l.kind = LayerKind::upsample;
          l.stride = 2;
        }
      } else if (pick < 0.85) {
        std::vector<int> same;
        for (int j = 0; j < i; ++j)
          if (shapes[static_cast<std::size_t>(j)].height == prev.height &&
              shapes[static_cast<std::size_t>(j)].width == prev.width)
            same.push_back(j);
        l = LayerSpec{};
        l.kind = LayerKind::route;
        l.layers = {-1};
        if (unit(rng) < 0.8) l.layers.push_back(same[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(same.size()) - 1))]);
      } else {
        std::vector<int> same;
        for (int j = 0; j + 1 < i; ++j)
          if (shapes[static_cast<std::size_t>(j)] == prev) same.push_back(j);
        if (!same.empty()) {
          l = LayerSpec{};
          l.kind = LayerKind::shortcut;
          l.from = same[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(same.size()) - 1))] - i;
          l.activation = unit(rng) < 0.5 ? Activation::leaky : Activation::linear;
        }
      }
    }
    layers.push_back(l);
    shapes = ModelGraph::from_layers(spec, layers).shapes();
  }

  MicroNetCase c{ModelGraph::from_layers(spec, layers), Network(ModelGraph::from_layers(spec, layers)), Tensor(),
                 Tensor()};
  c.net = random_init(c.graph, seed);
  randomize_statistics(c.net, rng);
  c.image = Tensor::feature_map(spec.channels, spec.height, spec.width);
  for (Real& v : c.image.data()) v = static_cast<Real>(unit(rng));
  const LayerShape out = c.graph.shapes().back();
  c.upstream = Tensor::feature_map(out.channels, out.height, out.width);
  for (Real& v : c.upstream.data()) v = static_cast<Real>(uniform(rng, -1, 1));
  return c;
}

GradCheckResult check_micro_net(MicroNetCase& c, double fault) {
  GradTape tape;
  forward(c.net, c.image, tape);
  const NetworkGradients grads = backward(tape, std::span<const Tensor>(&c.upstream, 1));

  std::vector<Probe> probes;
  add_conv_probes(c.net, grads, probes, 0, nullptr);
  for (std::size_t k = 0; k < c.image.size(); ++k)
    probes.push_back({&c.image[k], grads.input[k], "input " + std::to_string(k)});
  if (fault != 0 && !probes.empty()) probes.front().analytic += fault;

  return compare_gradients(probes, [&](std::vector<std::uint8_t>* sig) {
    GradTape t;
    const auto out = forward(c.net, c.image, t);
    double s = 0;
    for (std::size_t k = 0; k < c.upstream.size(); ++k) s += static_cast<double>(c.upstream[k]) * out[0][k];
    if (sig) *sig = kink_signature(c.net, t);
    return s;
  });
}

GradCheckResult check_loss_gradients(std::uint64_t seed, int fixtures) {
  GradCheckResult total;
  std::mt19937_64 rng(seed);
  const auto anchors = coco_anchors();
  for (int f = 0; f < fixtures; ++f) {
    const int classes = uniform_int(rng, 1, 3);
    std::vector<HeadOutput> heads(2);
    heads[0] = {0, 32, 2, 1, classes, {anchors[6], anchors[7], anchors[8]}, Tensor()};
    heads[1] = {1, 16, 4, 2, classes, {anchors[3], anchors[4], anchors[5]}, Tensor()};
    for (HeadOutput& h : heads) {
      h.raw = Tensor::feature_map(3 * h.values_per_anchor(), h.grid_height, h.grid_width);
      for (Real& v : h.raw.data()) v = static_cast<Real>(uniform(rng, -2, 2));
    }
    std::vector<GroundTruthBox> gt;
    const int boxes = uniform_int(rng, 1, 3);
    for (int b = 0; b < boxes; ++b)
      gt.push_back({"fixture", uniform_int(rng, 0, classes - 1),
                    {uniform(rng, 1, 63), uniform(rng, 1, 31), uniform(rng, 6, 60), uniform(rng, 6, 60)}, false});

    // Make one non-responsible slot predict the first box exactly, so that it lands in the ignore set.
    TargetAssignment targets = assign_targets(gt, heads);
    HeadOutput& h = heads[1];
    const int cx = static_cast<int>(gt[0].box.x / h.stride);
    const int cy = static_cast<int>(gt[0].box.y / h.stride);
    for (int a = 0; a < 3; ++a) {
      if (targets.heads[1].role[static_cast<std::size_t>(targets.heads[1].slot(a, cy, cx))] == SlotRole::responsible)
        continue;
      const int base = a * h.values_per_anchor();
      const double fx = gt[0].box.x / h.stride - cx;
      const double fy = gt[0].box.y / h.stride - cy;
      h.raw.at(base + 0, cy, cx) = static_cast<Real>(std::log(fx / (1 - fx)));
      h.raw.at(base + 1, cy, cx) = static_cast<Real>(std::log(fy / (1 - fy)));
      h.raw.at(base + 2, cy, cx) = static_cast<Real>(std::log(gt[0].box.w / h.anchors[static_cast<std::size_t>(a)].width));
      h.raw.at(base + 3, cy, cx) = static_cast<Real>(std::log(gt[0].box.h / h.anchors[static_cast<std::size_t>(a)].height));
      break;
    }
    targets = assign_targets(gt, heads);

    LossWeights weights;
    std::vector<Tensor> grads;
    total_loss(heads, targets, weights, &grads);
    std::vector<Probe> probes;
    for (std::size_t k = 0; k < heads.size(); ++k)
      for (std::size_t i = 0; i < heads[k].raw.size(); ++i)
        probes.push_back({&heads[k].raw[i], grads[k][i],
                          "fixture " + std::to_string(f) + " head " + std::to_string(k) + " raw " + std::to_string(i)});
    total.merge(compare_gradients(probes, [&](std::vector<std::uint8_t>*) {
      return static_cast<double>(total_loss(heads, targets, weights).total);
    }));
  }
  return total;
}

GradCheckResult check_detector_gradients(std::uint64_t seed, std::size_t max_per_layer) {
  std::mt19937_64 rng(seed);
  const ModelGraph graph = micro_detector_graph(2, 64);
  Network net = random_init(graph, seed);
  randomize_statistics(net, rng);
  const auto images = make_synthetic_set(1, 64, 2, seed);
  const SyntheticImage& image = images.front();

  GradTape tape;
  auto heads = make_heads(graph, forward(net, image.pixels, tape), 64);
  const TargetAssignment targets = assign_targets(image.objects, heads);
  const LossWeights weights;
  std::vector<Tensor> head_grads;
  total_loss(heads, targets, weights, &head_grads);
  const NetworkGradients grads = backward(tape, head_grads);

  std::vector<Probe> probes;
  add_conv_probes(net, grads, probes, max_per_layer, &rng);
  return compare_gradients(probes, [&](std::vector<std::uint8_t>* sig) {
    GradTape t;
    const auto h = make_heads(graph, forward(net, image.pixels, t), 64);
    if (sig) *sig = kink_signature(net, t);
    return static_cast<double>(total_loss(h, targets, weights).total);
  });
}

}  // namespace yolospp::checks
