#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "yolospp/kernels.hpp"
#include "yolospp/netdef.hpp"

namespace yolospp {

/// Version triple and image counter stored at the start of a weight file.
struct WeightsHeader {
  std::int32_t major = 0;
  std::int32_t minor = 2;
  std::int32_t revision = 0;
  std::uint64_t seen = 0;

  /// Files with major*10+minor >= 2 store `seen` as 64 bits, older ones as 32 bits.
  bool wide_seen() const { return major * 10 + minor >= 2; }
  bool operator==(const WeightsHeader&) const = default;
};

/// A ModelGraph together with the parameters of each convolutional layer.
class Network {
 public:
  /// Unparameterized: forward passes throw UsageError until parameters are installed.
  explicit Network(ModelGraph graph);

  /// Every conv parameter set to zero.
  static Network zeros(ModelGraph graph);

  const ModelGraph& graph() const noexcept { return graph_; }
  bool parameterized() const noexcept { return parameterized_; }
  void mark_parameterized() { parameterized_ = true; }

  /// Parameters of conv layer `layer`; throws UsageError for other layer kinds.
  ConvParams& conv(int layer);
  const ConvParams& conv(int layer) const;

  WeightsHeader& header() noexcept { return header_; }
  const WeightsHeader& header() const noexcept { return header_; }

  bool operator==(const Network&) const = default;

 private:
  ModelGraph graph_;
  std::vector<ConvParams> conv_;  // indexed by layer; empty for non-conv layers
  WeightsHeader header_;
  bool parameterized_ = false;
};

/// Raw output of one yolo layer, with the geometry needed to decode it.
struct HeadOutput {
  int layer = -1;
  int stride = 0;  // input pixels per cell
  int grid_width = 0;
  int grid_height = 0;
  int num_classes = 0;
  std::vector<Anchor> anchors;  // the masked anchors for this scale, in input pixels
  Tensor raw;                   // anchors.size() * (5 + num_classes) x grid_height x grid_width

  int values_per_anchor() const { return 5 + num_classes; }
  int input_width() const { return grid_width * stride; }
  int input_height() const { return grid_height * stride; }
};

/// Intermediate values recorded by a training forward pass. Single-owner; consumed by backward().
class GradTape {
 public:
  GradTape() = default;
  bool recorded() const noexcept { return network_ != nullptr; }
  void clear() { *this = GradTape{}; }
  /// Output of every layer from the recorded pass, indexed by layer.
  const std::vector<Tensor>& layer_outputs() const noexcept { return outputs_; }
  const Tensor& input() const noexcept { return input_; }

 private:
  friend struct TapeAccess;
  const Network* network_ = nullptr;
  Tensor input_;
  std::vector<Tensor> outputs_;
  std::vector<Tensor> pre_norm_;
  std::vector<int> output_layers_;
};

/// Per-layer gradients of the learnable parameters, plus the gradient at the network input.
struct NetworkGradients {
  std::vector<ConvGrads> conv;  // indexed by layer; empty for non-conv layers
  Tensor input;

  static NetworkGradients zeros_like(const Network& net);
  /// this += scale * other
  void accumulate(const NetworkGradients& other, Real scale = Real(1));
  void scale(Real factor);
};

/// Layers whose outputs a network exposes: every yolo layer, or the last layer when there are none.
std::vector<int> output_layers(const ModelGraph& graph);

/// Detection forward pass. The image must be channels x H x W with H and W divisible by 32.
/// Heads are returned in graph order, which for the builtin graphs is coarse to fine.
std::vector<HeadOutput> forward(const Network& net, const Tensor& image);

/// Training forward pass over any resolvable input size. Records into `tape` and returns the
/// tensors of output_layers(graph) in order.
std::vector<Tensor> forward(const Network& net, const Tensor& image, GradTape& tape);

/// Wraps the tensors returned by the taped forward as HeadOutputs (yolo graphs only).
/// `input_width` is the width of the image that produced them.
std::vector<HeadOutput> make_heads(const ModelGraph& graph, std::vector<Tensor> outputs, int input_width);
/// As above, for an input at the graph's net size.
std::vector<HeadOutput> make_heads(const ModelGraph& graph, std::vector<Tensor> outputs);

/// Gradients of a scalar loss given dLoss/dOutput for each tensor the taped forward returned.
/// Throws UsageError when the tape holds no completed forward pass.
NetworkGradients backward(const GradTape& tape, std::span<const Tensor> output_grads);

/// Channel concat of [input, maxpool 5, maxpool 9, maxpool 13], stride 1 with same padding.
Tensor spp_forward(const Tensor& input);
inline constexpr std::array<int, 3> kSppKernels{5, 9, 13};

struct ParameterCounts {
  std::vector<std::size_t> per_layer;  // floats stored per layer; 0 for parameter-free layers
  std::size_t total = 0;
};

ParameterCounts count_parameters(const ModelGraph& graph);
inline ParameterCounts count_parameters(const Network& net) { return count_parameters(net.graph()); }

}  // namespace yolospp
