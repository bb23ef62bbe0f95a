#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "yolospp/tensor.hpp"

namespace yolospp {

enum class Activation { linear, leaky, sigmoid };

inline constexpr Real kLeakySlope = Real(0.1);
inline constexpr Real kBatchNormEpsilon = Real(1e-5);

std::string_view to_string(Activation a);
/// Throws ValidationError for names other than linear/leaky/logistic/sigmoid.
Activation parse_activation(std::string_view name);

inline Real leaky(Real x) { return x >= 0 ? x : kLeakySlope * x; }
Real sigmoid(Real x);
Real activate(Activation a, Real x);
/// Derivative of the activation expressed through its output value.
Real activation_gradient(Activation a, Real output);

/// One convolutional layer: weights are filters x in_channels x size x size.
/// With batch_normalize, `biases` holds the batch-norm shift (beta) and `scales` gamma.
struct ConvParams {
  int filters = 0;
  int in_channels = 0;
  int size = 1;
  int stride = 1;
  int pad = 0;
  bool batch_normalize = false;
  Activation activation = Activation::linear;
  std::vector<Real> weights;
  std::vector<Real> biases;
  std::vector<Real> scales;
  std::vector<Real> rolling_mean;
  std::vector<Real> rolling_variance;

  /// Zero-valued parameters with every vector sized for the geometry.
  static ConvParams zeros(int filters, int in_channels, int size, int stride, bool batch_normalize,
                          Activation activation);

  std::size_t weight_count() const {
    return static_cast<std::size_t>(filters) * in_channels * size * size;
  }
  /// Floats stored in a weight file for this layer.
  std::size_t parameter_count() const {
    return weight_count() + static_cast<std::size_t>(filters) * (batch_normalize ? 4 : 1);
  }
  /// Throws ShapeError/ValidationError when vector sizes or geometry are inconsistent.
  void validate() const;

  bool operator==(const ConvParams&) const = default;
};

/// Gradients for the learnable parts of a ConvParams (running statistics are fixed).
struct ConvGrads {
  std::vector<Real> weights;
  std::vector<Real> biases;
  std::vector<Real> scales;

  static ConvGrads zeros_like(const ConvParams& p);
  bool empty() const { return weights.empty(); }
};

int conv_output_extent(int extent, int size, int stride, int pad);

Tensor conv2d_forward(const Tensor& input, const ConvParams& params);
/// As above, also returning the convolution result before batch-norm and activation.
Tensor conv2d_forward(const Tensor& input, const ConvParams& params, Tensor& pre_norm);

/// Accumulates parameter gradients into `grads` and returns dLoss/dInput.
/// `pre_norm` is only read when batch_normalize is set.
Tensor conv2d_backward(const Tensor& input, const ConvParams& params, const Tensor& pre_norm,
                       const Tensor& output, const Tensor& grad_output, ConvGrads& grads);

/// Max-pool geometry. Padding may be asymmetric; padded cells are never selected.
struct PoolWindow {
  int size = 2;
  int stride = 2;
  int pad_before = 0;
  int pad_after = 0;

  /// Window with `pad` cells on every side.
  static PoolWindow symmetric(int size, int stride, int pad) { return {size, stride, pad, pad}; }
  /// Darknet convention: `total_padding` split as floor(total/2) before, the rest after.
  static PoolWindow darknet(int size, int stride, int total_padding) {
    return {size, stride, total_padding / 2, total_padding - total_padding / 2};
  }
  int output_extent(int extent) const;
};

Tensor maxpool2d_forward(const Tensor& input, int size, int stride, int pad);
Tensor maxpool2d_forward(const Tensor& input, const PoolWindow& window);
/// Routes each output gradient to the first (row-major) maximal cell of its window.
Tensor maxpool2d_backward(const Tensor& input, const PoolWindow& window, const Tensor& grad_output);

Tensor upsample2x(const Tensor& input);
Tensor upsample2x_backward(const Tensor& grad_output);

Tensor concat_channels(std::span<const Tensor> inputs);
/// Inverse of concat_channels: splits `t` into pieces with the given channel counts.
std::vector<Tensor> split_channels(const Tensor& t, std::span<const int> channels);

/// Element-wise sum followed by `activation` (the residual shortcut).
Tensor add_activate(const Tensor& a, const Tensor& b, Activation activation);

}  // namespace yolospp
