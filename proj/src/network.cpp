#include "yolospp/network.hpp"

#include <algorithm>
#include <string>

#include "yolospp/errors.hpp"

namespace yolospp {

struct TapeAccess {
  static GradTape& bind(GradTape& t, const Network* net) {
    t.clear();
    t.network_ = net;
    return t;
  }
  static const Network* network(const GradTape& t) { return t.network_; }
  static Tensor& input(GradTape& t) { return t.input_; }
  static const Tensor& input(const GradTape& t) { return t.input_; }
  static std::vector<Tensor>& outputs(GradTape& t) { return t.outputs_; }
  static const std::vector<Tensor>& outputs(const GradTape& t) { return t.outputs_; }
  static std::vector<Tensor>& pre_norm(GradTape& t) { return t.pre_norm_; }
  static const std::vector<Tensor>& pre_norm(const GradTape& t) { return t.pre_norm_; }
  static std::vector<int>& output_layers(GradTape& t) { return t.output_layers_; }
  static const std::vector<int>& output_layers(const GradTape& t) { return t.output_layers_; }
};

namespace {

void accumulate_into(Tensor& dst, const Tensor& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  if (dst.shape() != src.shape()) throw ShapeError("gradient shape mismatch during backward");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void accumulate_into(Tensor& dst, Tensor&& src) {
  if (dst.empty())
    dst = std::move(src);
  else
    accumulate_into(dst, static_cast<const Tensor&>(src));
}

Tensor concat_refs(const std::vector<const Tensor*>& parts) {
  int channels = 0;
  for (const Tensor* t : parts) channels += t->channels();
  Tensor out = Tensor::feature_map(channels, parts.front()->height(), parts.front()->width());
  auto dst = out.data().begin();
  for (const Tensor* t : parts) {
    if (t->height() != out.height() || t->width() != out.width())
      throw ShapeError("route: spatial mismatch " + to_string(t->shape()));
    dst = std::copy(t->data().begin(), t->data().end(), dst);
  }
  return out;
}

// Runs every layer. With `tape`, all outputs are kept; otherwise an output is released after its
// last consumer, except yolo outputs which are handed back through `heads`.
std::vector<Tensor> run_layers(const Network& net, const Tensor& image, GradTape* tape) {
  const ModelGraph& g = net.graph();
  const int n = g.size();
  std::vector<int> last_use(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i)
    for (int s : g.sources(i))
      if (s >= 0) last_use[static_cast<std::size_t>(s)] = std::max(last_use[static_cast<std::size_t>(s)], i);
  const auto exposed = output_layers(g);

  std::vector<Tensor> outputs(static_cast<std::size_t>(n));
  std::vector<Tensor> pre_norm(tape ? static_cast<std::size_t>(n) : 0);
  auto value = [&](int idx) -> const Tensor& {
    return idx < 0 ? image : outputs[static_cast<std::size_t>(idx)];
  };

  for (int i = 0; i < n; ++i) {
    const LayerSpec& l = g.layer(i);
    const auto& src = g.sources(i);
    Tensor out;
    switch (l.kind) {
      case LayerKind::convolutional:
        out = tape ? conv2d_forward(value(src[0]), net.conv(i), pre_norm[static_cast<std::size_t>(i)])
                   : conv2d_forward(value(src[0]), net.conv(i));
        break;
      case LayerKind::maxpool:
        out = maxpool2d_forward(value(src[0]), PoolWindow::darknet(l.size, l.stride, l.padding));
        break;
      case LayerKind::upsample: out = upsample2x(value(src[0])); break;
      case LayerKind::route: {
        std::vector<const Tensor*> parts;
        for (int s : src) parts.push_back(&value(s));
        out = concat_refs(parts);
        break;
      }
      case LayerKind::shortcut: out = add_activate(value(src[0]), value(src[1]), l.activation); break;
      case LayerKind::yolo: out = value(src[0]); break;
      case LayerKind::net: throw UsageError("unexpected [net] layer");
    }
    outputs[static_cast<std::size_t>(i)] = std::move(out);
    if (!tape) {
      for (int s : src)
        if (s >= 0 && last_use[static_cast<std::size_t>(s)] == i &&
            std::find(exposed.begin(), exposed.end(), s) == exposed.end())
          outputs[static_cast<std::size_t>(s)] = Tensor();
    }
  }

  std::vector<Tensor> result;
  for (int idx : exposed) result.push_back(outputs[static_cast<std::size_t>(idx)]);
  if (tape) {
    TapeAccess::input(*tape) = image;
    TapeAccess::outputs(*tape) = std::move(outputs);
    TapeAccess::pre_norm(*tape) = std::move(pre_norm);
    TapeAccess::output_layers(*tape) = exposed;
  }
  return result;
}

void check_image(const Network& net, const Tensor& image) {
  if (!net.parameterized()) throw UsageError("forward called on an unparameterized network");
  require_feature_map(image, "forward");
  if (image.channels() != net.graph().net().channels)
    throw ShapeError("forward: image has " + std::to_string(image.channels()) + " channels, network expects " +
                     std::to_string(net.graph().net().channels));
}

}  // namespace

Network::Network(ModelGraph graph) : graph_(std::move(graph)), conv_(static_cast<std::size_t>(graph_.size())) {
  for (int i : graph_.conv_layers()) {
    const LayerSpec& l = graph_.layer(i);
    conv_[static_cast<std::size_t>(i)] =
        ConvParams::zeros(l.filters, graph_.input_channels(i), l.size, l.stride, l.batch_normalize, l.activation);
  }
}

Network Network::zeros(ModelGraph graph) {
  Network net(std::move(graph));
  net.parameterized_ = true;
  return net;
}

ConvParams& Network::conv(int layer) {
  return const_cast<ConvParams&>(static_cast<const Network&>(*this).conv(layer));
}

const ConvParams& Network::conv(int layer) const {
  if (layer < 0 || layer >= graph_.size() || graph_.layer(layer).kind != LayerKind::convolutional)
    throw UsageError("layer " + std::to_string(layer) + " is not convolutional");
  return conv_[static_cast<std::size_t>(layer)];
}

NetworkGradients NetworkGradients::zeros_like(const Network& net) {
  NetworkGradients g;
  g.conv.resize(static_cast<std::size_t>(net.graph().size()));
  for (int i : net.graph().conv_layers()) g.conv[static_cast<std::size_t>(i)] = ConvGrads::zeros_like(net.conv(i));
  return g;
}

void NetworkGradients::accumulate(const NetworkGradients& other, Real s) {
  if (conv.size() < other.conv.size()) conv.resize(other.conv.size());
  auto axpy = [s](std::vector<Real>& dst, const std::vector<Real>& src) {
    if (dst.empty()) dst.assign(src.size(), Real(0));
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += s * src[i];
  };
  for (std::size_t l = 0; l < other.conv.size(); ++l) {
    if (other.conv[l].empty()) continue;
    axpy(conv[l].weights, other.conv[l].weights);
    axpy(conv[l].biases, other.conv[l].biases);
    axpy(conv[l].scales, other.conv[l].scales);
  }
  if (!other.input.empty()) {
    if (input.empty()) input = Tensor(other.input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) input[i] += s * other.input[i];
  }
}

void NetworkGradients::scale(Real factor) {
  for (auto& c : conv) {
    for (Real& v : c.weights) v *= factor;
    for (Real& v : c.biases) v *= factor;
    for (Real& v : c.scales) v *= factor;
  }
  for (Real& v : input.data()) v *= factor;
}

std::vector<int> output_layers(const ModelGraph& graph) {
  auto yolo = graph.yolo_layers();
  if (yolo.empty() && graph.size() > 0) yolo.push_back(graph.size() - 1);
  return yolo;
}

std::vector<HeadOutput> make_heads(const ModelGraph& graph, std::vector<Tensor> outputs, int input_width) {
  const auto yolo = graph.yolo_layers();
  if (yolo.size() != outputs.size()) throw UsageError("make_heads: output count does not match yolo layers");
  std::vector<HeadOutput> heads;
  for (std::size_t k = 0; k < yolo.size(); ++k) {
    const LayerSpec& l = graph.layer(yolo[k]);
    HeadOutput h;
    h.layer = yolo[k];
    h.raw = std::move(outputs[k]);
    h.grid_height = h.raw.height();
    h.grid_width = h.raw.width();
    h.stride = input_width / h.grid_width;
    h.num_classes = l.classes;
    for (int m : l.mask) h.anchors.push_back(l.anchors[static_cast<std::size_t>(m)]);
    heads.push_back(std::move(h));
  }
  return heads;
}

std::vector<HeadOutput> make_heads(const ModelGraph& graph, std::vector<Tensor> outputs) {
  return make_heads(graph, std::move(outputs), graph.net().width);
}

std::vector<HeadOutput> forward(const Network& net, const Tensor& image) {
  check_image(net, image);
  shape_check(net.graph(), image.width(), image.height());
  if (net.graph().yolo_layers().empty()) throw UsageError("forward: graph has no yolo layers");
  return make_heads(net.graph(), run_layers(net, image, nullptr), image.width());
}

std::vector<Tensor> forward(const Network& net, const Tensor& image, GradTape& tape) {
  check_image(net, image);
  resolve_shapes(net.graph(), image.width(), image.height());
  TapeAccess::bind(tape, &net);
  try {
    return run_layers(net, image, &tape);
  } catch (...) {
    tape.clear();
    throw;
  }
}

NetworkGradients backward(const GradTape& tape, std::span<const Tensor> output_grads) {
  const Network* net = TapeAccess::network(tape);
  if (!net) throw UsageError("backward called without a matching forward pass");
  const ModelGraph& g = net->graph();
  const auto& outputs = TapeAccess::outputs(tape);
  const auto& pre_norm = TapeAccess::pre_norm(tape);
  const auto& exposed = TapeAccess::output_layers(tape);
  const Tensor& image = TapeAccess::input(tape);
  if (output_grads.size() != exposed.size())
    throw UsageError("backward: expected " + std::to_string(exposed.size()) + " output gradients, got " +
                     std::to_string(output_grads.size()));

  const int n = g.size();
  std::vector<Tensor> grad(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < exposed.size(); ++k) {
    const Tensor& out = outputs[static_cast<std::size_t>(exposed[k])];
    if (output_grads[k].shape() != out.shape())
      throw ShapeError("backward: gradient for layer " + std::to_string(exposed[k]) + " has shape " +
                       to_string(output_grads[k].shape()) + ", expected " + to_string(out.shape()));
    accumulate_into(grad[static_cast<std::size_t>(exposed[k])], output_grads[k]);
  }

  NetworkGradients result = NetworkGradients::zeros_like(*net);
  Tensor grad_input;
  auto send = [&](int src, Tensor&& t) {
    if (src < 0)
      accumulate_into(grad_input, std::move(t));
    else
      accumulate_into(grad[static_cast<std::size_t>(src)], std::move(t));
  };
  auto value = [&](int idx) -> const Tensor& {
    return idx < 0 ? image : outputs[static_cast<std::size_t>(idx)];
  };

  for (int i = n - 1; i >= 0; --i) {
    Tensor& gi = grad[static_cast<std::size_t>(i)];
    if (gi.empty()) continue;
    const LayerSpec& l = g.layer(i);
    const auto& src = g.sources(i);
    switch (l.kind) {
      case LayerKind::convolutional:
        send(src[0], conv2d_backward(value(src[0]), net->conv(i), pre_norm[static_cast<std::size_t>(i)],
                                     outputs[static_cast<std::size_t>(i)], gi, result.conv[static_cast<std::size_t>(i)]));
        break;
      case LayerKind::maxpool:
        send(src[0], maxpool2d_backward(value(src[0]), PoolWindow::darknet(l.size, l.stride, l.padding), gi));
        break;
      case LayerKind::upsample: send(src[0], upsample2x_backward(gi)); break;
      case LayerKind::route: {
        std::vector<int> channels;
        for (int s : src) channels.push_back(value(s).channels());
        auto parts = split_channels(gi, channels);
        for (std::size_t k = 0; k < src.size(); ++k) send(src[k], std::move(parts[k]));
        break;
      }
      case LayerKind::shortcut: {
        const Tensor& out = outputs[static_cast<std::size_t>(i)];
        Tensor d = gi;
        for (std::size_t k = 0; k < d.size(); ++k) d[k] *= activation_gradient(l.activation, out[k]);
        send(src[1], Tensor(d));
        send(src[0], std::move(d));
        break;
      }
      case LayerKind::yolo: send(src[0], std::move(gi)); break;
      case LayerKind::net: break;
    }
    gi = Tensor();
  }
  result.input = grad_input.empty() ? Tensor(image.shape()) : std::move(grad_input);
  return result;
}

Tensor spp_forward(const Tensor& input) {
  require_feature_map(input, "spp_forward");
  std::vector<Tensor> branches{input};
  for (int k : kSppKernels) branches.push_back(maxpool2d_forward(input, k, 1, (k - 1) / 2));
  return concat_channels(branches);
}

ParameterCounts count_parameters(const ModelGraph& graph) {
  ParameterCounts counts;
  counts.per_layer.assign(static_cast<std::size_t>(graph.size()), 0);
  for (int i : graph.conv_layers()) {
    const LayerSpec& l = graph.layer(i);
    const std::size_t n = static_cast<std::size_t>(l.filters) * graph.input_channels(i) * l.size * l.size +
                          static_cast<std::size_t>(l.filters) * (l.batch_normalize ? 4 : 1);
    counts.per_layer[static_cast<std::size_t>(i)] = n;
    counts.total += n;
  }
  return counts;
}

}  // namespace yolospp
