#include "yolospp/train.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "yolospp/errors.hpp"
#include "yolospp/weights_io.hpp"

namespace yolospp {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(unit(rng) * (hi - lo + 1));
}

constexpr std::array<std::array<Real, 3>, 4> kClassColors{{
    {0.95, 0.15, 0.10},
    {0.10, 0.35, 0.95},
    {0.15, 0.90, 0.20},
    {0.95, 0.85, 0.10},
}};

void step(std::vector<Real>& param, std::vector<Real>& velocity, const std::vector<Real>& grad, Real lr, Real momentum) {
  if (velocity.size() != param.size()) velocity.assign(param.size(), Real(0));
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

}  // namespace

void sgd_step(Network& net, const NetworkGradients& grads, SgdState& state, Real learning_rate, Real momentum) {
  const ModelGraph& g = net.graph();
  if (state.velocity.conv.size() != static_cast<std::size_t>(g.size()))
    state.velocity = NetworkGradients::zeros_like(net);
  if (grads.conv.size() != static_cast<std::size_t>(g.size()))
    throw UsageError("sgd_step: gradients do not belong to this network");
  for (int i : g.conv_layers()) {
    const auto l = static_cast<std::size_t>(i);
    ConvParams& p = net.conv(i);
    const ConvGrads& d = grads.conv[l];
    if (d.empty()) continue;
    ConvGrads& v = state.velocity.conv[l];
    step(p.weights, v.weights, d.weights, learning_rate, momentum);
    step(p.biases, v.biases, d.biases, learning_rate, momentum);
    if (p.batch_normalize) step(p.scales, v.scales, d.scales, learning_rate, momentum);
  }
}

std::vector<SyntheticImage> make_synthetic_set(int count, int size, int num_classes, std::uint64_t seed) {
  if (num_classes < 1 || num_classes > static_cast<int>(kClassColors.size()))
    throw ValidationError("synthetic set supports 1.." + std::to_string(kClassColors.size()) + " classes");
  if (size < 32) throw ValidationError("synthetic images must be at least 32 pixels");
  std::mt19937_64 rng(seed);
  std::vector<SyntheticImage> out;
  const int min_side = size * 3 / 16;
  const int max_side = size * 5 / 8;
  for (int n = 0; n < count; ++n) {
    SyntheticImage img;
    img.id = "synth_" + std::to_string(n);
    img.pixels = Tensor::feature_map(3, size, size);
    for (Real& v : img.pixels.data()) v = static_cast<Real>(0.4 * unit(rng));
    const int objects = 1 + uniform_int(rng, 0, 1);
    for (int k = 0; k < objects; ++k) {
      const int cls = uniform_int(rng, 0, num_classes - 1);
      const int w = uniform_int(rng, min_side, max_side);
      const int h = uniform_int(rng, min_side, max_side);
      const int x0 = uniform_int(rng, 0, size - w);
      const int y0 = uniform_int(rng, 0, size - h);
      for (int c = 0; c < 3; ++c)
        for (int y = y0; y < y0 + h; ++y)
          for (int x = x0; x < x0 + w; ++x) img.pixels.at(c, y, x) = kClassColors[static_cast<std::size_t>(cls)][static_cast<std::size_t>(c)];
      img.objects.push_back({img.id, cls, Box::from_corners(x0, y0, x0 + w, y0 + h), false});
    }
    out.push_back(std::move(img));
  }
  return out;
}

ModelGraph micro_detector_graph(int num_classes, int input_size) {
  auto conv = [](int filters, int size, int stride, bool bn, Activation act) {
    LayerSpec l;
    l.kind = LayerKind::convolutional;
    l.filters = filters;
    l.size = size;
    l.stride = stride;
    l.batch_normalize = bn;
    l.activation = act;
    return l;
  };
  auto pool = [] {
    LayerSpec l;
    l.kind = LayerKind::maxpool;
    l.size = 2;
    l.stride = 2;
    l.padding = 1;
    return l;
  };
  LayerSpec yolo;
  yolo.kind = LayerKind::yolo;
  yolo.classes = num_classes;
  yolo.mask = {0, 1, 2};
  const double s = input_size / 64.0;
  yolo.anchors = {{14 * s, 14 * s}, {24 * s, 24 * s}, {36 * s, 36 * s}};
  std::vector<LayerSpec> layers{
      conv(8, 3, 2, true, Activation::leaky),  pool(),
      conv(16, 3, 2, true, Activation::leaky), pool(),
      conv(32, 3, 2, true, Activation::leaky), conv(3 * (5 + num_classes), 1, 1, false, Activation::linear),
      yolo,
  };
  return ModelGraph::from_layers(NetSpec{input_size, input_size, 3}, std::move(layers));
}

ImageStep image_loss_and_gradients(const Network& net, const SyntheticImage& image, const LossWeights& weights) {
  GradTape tape;
  auto outputs = forward(net, image.pixels, tape);
  const auto heads = make_heads(net.graph(), std::move(outputs), image.pixels.width());
  const auto targets = assign_targets(image.objects, heads);
  std::vector<Tensor> head_grads;
  ImageStep result;
  result.loss = total_loss(heads, targets, weights, &head_grads);
  result.grads = backward(tape, head_grads);
  return result;
}

std::vector<Real> train_toy(const std::vector<SyntheticImage>& dataset, const ModelGraph& graph,
                            const TrainConfig& config, Network* trained) {
  if (config.steps < 0 || config.batch < 1) throw ValidationError("train_toy: steps must be >= 0 and batch >= 1");
  std::vector<Real> history;
  if (config.steps == 0) return history;
  if (dataset.empty()) throw ValidationError("train_toy: empty dataset");

  Network net = random_init(graph, config.seed);
  SgdState state;
  std::mt19937_64 order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.size());
  std::size_t cursor = order.size();

  for (int s = 0; s < config.steps; ++s) {
    NetworkGradients batch_grads = NetworkGradients::zeros_like(net);
    Real batch_loss = 0;
    for (int b = 0; b < config.batch; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size() - 1; i > 0; --i)
          std::swap(order[i], order[static_cast<std::size_t>(unit(order_rng) * static_cast<double>(i + 1))]);
        cursor = 0;
      }
      const ImageStep st = image_loss_and_gradients(net, dataset[order[cursor++]], config.weights);
      batch_loss += st.loss.total;
      batch_grads.accumulate(st.grads, Real(1) / config.batch);
    }
    batch_loss /= config.batch;
    if (!std::isfinite(batch_loss)) throw NumericError("training diverged at step " + std::to_string(s));
    history.push_back(batch_loss);
    sgd_step(net, batch_grads, state, config.learning_rate, config.momentum);
  }
  if (trained) *trained = std::move(net);
  return history;
}

}  // namespace yolospp
