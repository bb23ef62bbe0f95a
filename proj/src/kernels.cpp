#include "yolospp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"
#include "yolospp/errors.hpp"

namespace yolospp {

namespace {

// Upper bound on im2col buffer elements; large feature maps are processed in row bands.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

void im2col_rows(const Tensor& input, const ConvParams& p, int out_w, int row_begin, int row_end,
                 Real* col) {
  const int h = input.height();
  const int w = input.width();
  const int k = p.size;
  const std::size_t cols = static_cast<std::size_t>(row_end - row_begin) * out_w;
  std::size_t row = 0;
  for (int c = 0; c < p.in_channels; ++c) {
    const auto plane = input.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        Real* dst = col + row * cols;
        for (int oy = row_begin; oy < row_end; ++oy) {
          const int iy = oy * p.stride - p.pad + ky;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * p.stride - p.pad + kx;
            *dst++ = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                         ? plane[static_cast<std::size_t>(iy) * w + ix]
                         : Real(0);
          }
        }
      }
    }
  }
}

void col2im_rows(const Real* col, const ConvParams& p, int out_w, int row_begin, int row_end,
                 Tensor& grad_input) {
  const int h = grad_input.height();
  const int w = grad_input.width();
  const int k = p.size;
  const std::size_t cols = static_cast<std::size_t>(row_end - row_begin) * out_w;
  std::size_t row = 0;
  for (int c = 0; c < p.in_channels; ++c) {
    auto plane = grad_input.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const Real* src = col + row * cols;
        for (int oy = row_begin; oy < row_end; ++oy) {
          const int iy = oy * p.stride - p.pad + ky;
          for (int ox = 0; ox < out_w; ++ox, ++src) {
            const int ix = ox * p.stride - p.pad + kx;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w)
              plane[static_cast<std::size_t>(iy) * w + ix] += *src;
          }
        }
      }
    }
  }
}

int rows_per_band(std::size_t patch, int out_w, int out_h) {
  const std::size_t per_row = patch * static_cast<std::size_t>(out_w);
  return static_cast<int>(std::clamp<std::size_t>(kColumnBudget / std::max<std::size_t>(per_row, 1),
                                                  1, static_cast<std::size_t>(out_h)));
}

bool is_pointwise(const ConvParams& p) { return p.size == 1 && p.stride == 1 && p.pad == 0; }

void check_conv_input(const Tensor& input, const ConvParams& p) {
  require_feature_map(input, "conv2d");
  p.validate();
  if (input.channels() != p.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(input.channels()) +
                     " channels but weights expect " + std::to_string(p.in_channels));
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::leaky: return "leaky";
    case Activation::sigmoid: return "logistic";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "linear") return Activation::linear;
  if (name == "leaky") return Activation::leaky;
  if (name == "logistic" || name == "sigmoid") return Activation::sigmoid;
  throw ValidationError("unsupported activation '" + std::string(name) + "'");
}

Real sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

Real activate(Activation a, Real x) {
  switch (a) {
    case Activation::linear: return x;
    case Activation::leaky: return leaky(x);
    case Activation::sigmoid: return sigmoid(x);
  }
  return x;
}

Real activation_gradient(Activation a, Real output) {
  switch (a) {
    case Activation::linear: return Real(1);
    case Activation::leaky: return output >= 0 ? Real(1) : kLeakySlope;
    case Activation::sigmoid: return output * (Real(1) - output);
  }
  return Real(1);
}

ConvParams ConvParams::zeros(int filters, int in_channels, int size, int stride, bool batch_normalize,
                             Activation activation) {
  ConvParams p;
  p.filters = filters;
  p.in_channels = in_channels;
  p.size = size;
  p.stride = stride;
  p.pad = (size - 1) / 2;
  p.batch_normalize = batch_normalize;
  p.activation = activation;
  p.weights.assign(p.weight_count(), Real(0));
  p.biases.assign(static_cast<std::size_t>(filters), Real(0));
  if (batch_normalize) {
    p.scales.assign(static_cast<std::size_t>(filters), Real(0));
    p.rolling_mean.assign(static_cast<std::size_t>(filters), Real(0));
    p.rolling_variance.assign(static_cast<std::size_t>(filters), Real(0));
  }
  return p;
}

void ConvParams::validate() const {
  if (filters < 1 || in_channels < 1)
    throw ValidationError("conv: filters and input channels must be >= 1");
  if (size < 1 || size % 2 == 0) throw ValidationError("conv: kernel size must be odd");
  if (stride != 1 && stride != 2) throw ValidationError("conv: stride must be 1 or 2");
  if (pad != (size - 1) / 2) throw ValidationError("conv: padding must be (size-1)/2");
  const auto f = static_cast<std::size_t>(filters);
  if (weights.size() != weight_count() || biases.size() != f)
    throw ShapeError("conv: weight/bias vectors do not match " + std::to_string(filters) + "x" +
                     std::to_string(in_channels) + "x" + std::to_string(size) + "x" +
                     std::to_string(size));
  if (batch_normalize && (scales.size() != f || rolling_mean.size() != f ||
                          rolling_variance.size() != f))
    throw ShapeError("conv: batch-norm vectors must have one entry per filter");
}

ConvGrads ConvGrads::zeros_like(const ConvParams& p) {
  ConvGrads g;
  g.weights.assign(p.weights.size(), Real(0));
  g.biases.assign(p.biases.size(), Real(0));
  g.scales.assign(p.scales.size(), Real(0));
  return g;
}

int conv_output_extent(int extent, int size, int stride, int pad) {
  return (extent + 2 * pad - size) / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const ConvParams& params) {
  Tensor unused;
  return conv2d_forward(input, params, unused);
}

Tensor conv2d_forward(const Tensor& input, const ConvParams& p, Tensor& pre_norm) {
  check_conv_input(input, p);
  const int out_h = conv_output_extent(input.height(), p.size, p.stride, p.pad);
  const int out_w = conv_output_extent(input.width(), p.size, p.stride, p.pad);
  if (out_h < 1 || out_w < 1) throw ShapeError("conv2d: input smaller than kernel");

  Tensor out = Tensor::feature_map(p.filters, out_h, out_w);
  const int patch = p.in_channels * p.size * p.size;
  const int plane = out_h * out_w;
  if (is_pointwise(p)) {
    detail::gemm(false, false, p.filters, plane, patch, Real(1), p.weights.data(), patch,
                 input.data().data(), plane, Real(0), out.data().data(), plane);
  } else {
    const int band = rows_per_band(static_cast<std::size_t>(patch), out_w, out_h);
    std::vector<Real> col(static_cast<std::size_t>(patch) * band * out_w);
    for (int r0 = 0; r0 < out_h; r0 += band) {
      const int r1 = std::min(out_h, r0 + band);
      const int ncols = (r1 - r0) * out_w;
      im2col_rows(input, p, out_w, r0, r1, col.data());
      detail::gemm(false, false, p.filters, ncols, patch, Real(1), p.weights.data(), patch,
                   col.data(), ncols, Real(0), out.data().data() + static_cast<std::size_t>(r0) * out_w,
                   plane);
    }
  }

  if (p.batch_normalize) pre_norm = out;
  for (int f = 0; f < p.filters; ++f) {
    auto values = out.channel(f);
    Real scale = Real(1);
    Real shift = p.biases[f];
    if (p.batch_normalize) {
      const Real inv_std = Real(1) / std::sqrt(p.rolling_variance[f] + kBatchNormEpsilon);
      scale = p.scales[f] * inv_std;
      shift = p.biases[f] - p.scales[f] * p.rolling_mean[f] * inv_std;
    }
    for (Real& v : values) v = activate(p.activation, v * scale + shift);
  }
  return out;
}

Tensor conv2d_backward(const Tensor& input, const ConvParams& p, const Tensor& pre_norm,
                       const Tensor& output, const Tensor& grad_output, ConvGrads& grads) {
  check_conv_input(input, p);
  if (grad_output.shape() != output.shape())
    throw ShapeError("conv2d_backward: gradient shape " + to_string(grad_output.shape()) +
                     " does not match output " + to_string(output.shape()));
  if (grads.empty()) grads = ConvGrads::zeros_like(p);

  const int out_h = output.height();
  const int out_w = output.width();
  const int plane = out_h * out_w;
  const int patch = p.in_channels * p.size * p.size;

  // delta: gradient with respect to the raw convolution result.
  Tensor delta = grad_output;
  for (int f = 0; f < p.filters; ++f) {
    auto d = delta.channel(f);
    const auto y = output.channel(f);
    for (int i = 0; i < plane; ++i) d[i] *= activation_gradient(p.activation, y[i]);
    if (p.batch_normalize) {
      const Real inv_std = Real(1) / std::sqrt(p.rolling_variance[f] + kBatchNormEpsilon);
      const auto z = pre_norm.channel(f);
      Real dshift = 0, dscale = 0;
      for (int i = 0; i < plane; ++i) {
        dshift += d[i];
        dscale += d[i] * (z[i] - p.rolling_mean[f]) * inv_std;
        d[i] *= p.scales[f] * inv_std;
      }
      grads.biases[f] += dshift;
      grads.scales[f] += dscale;
    } else {
      Real dbias = 0;
      for (int i = 0; i < plane; ++i) dbias += d[i];
      grads.biases[f] += dbias;
    }
  }

  Tensor grad_input = Tensor::feature_map(input.channels(), input.height(), input.width());
  if (is_pointwise(p)) {
    detail::gemm(false, true, p.filters, patch, plane, Real(1), delta.data().data(), plane,
                 input.data().data(), plane, Real(1), grads.weights.data(), patch);
    detail::gemm(true, false, patch, plane, p.filters, Real(1), p.weights.data(), patch,
                 delta.data().data(), plane, Real(0), grad_input.data().data(), plane);
    return grad_input;
  }

  const int band = rows_per_band(static_cast<std::size_t>(patch), out_w, out_h);
  std::vector<Real> col(static_cast<std::size_t>(patch) * band * out_w);
  for (int r0 = 0; r0 < out_h; r0 += band) {
    const int r1 = std::min(out_h, r0 + band);
    const int ncols = (r1 - r0) * out_w;
    const Real* d = delta.data().data() + static_cast<std::size_t>(r0) * out_w;
    im2col_rows(input, p, out_w, r0, r1, col.data());
    detail::gemm(false, true, p.filters, patch, ncols, Real(1), d, plane, col.data(), ncols, Real(1),
                 grads.weights.data(), patch);
    detail::gemm(true, false, patch, ncols, p.filters, Real(1), p.weights.data(), patch, d, plane,
                 Real(0), col.data(), ncols);
    col2im_rows(col.data(), p, out_w, r0, r1, grad_input);
  }
  return grad_input;
}

int PoolWindow::output_extent(int extent) const {
  return (extent + pad_before + pad_after - size) / stride + 1;
}

Tensor maxpool2d_forward(const Tensor& input, int size, int stride, int pad) {
  return maxpool2d_forward(input, PoolWindow::symmetric(size, stride, pad));
}

namespace {

void check_pool(const Tensor& input, const PoolWindow& w) {
  require_feature_map(input, "maxpool2d");
  if (w.size < 1 || w.stride < 1) throw ShapeError("maxpool2d: size and stride must be >= 1");
  if (w.pad_before < 0 || w.pad_after < 0 || w.pad_before > w.size - 1 || w.pad_after > w.size - 1)
    throw ShapeError("maxpool2d: padding must lie in [0, size-1]");
  if (input.height() + w.pad_before + w.pad_after < w.size ||
      input.width() + w.pad_before + w.pad_after < w.size)
    throw ShapeError("maxpool2d: window " + std::to_string(w.size) + " larger than padded input " +
                     to_string(input.shape()));
}

// Row-major index of the first maximal cell of the window for output (oy, ox).
std::size_t window_argmax(std::span<const Real> plane, int h, int w, const PoolWindow& win, int oy,
                          int ox) {
  const int y0 = oy * win.stride - win.pad_before;
  const int x0 = ox * win.stride - win.pad_before;
  Real best = -std::numeric_limits<Real>::infinity();
  std::size_t best_index = 0;
  bool found = false;
  for (int y = std::max(y0, 0); y < std::min(y0 + win.size, h); ++y) {
    for (int x = std::max(x0, 0); x < std::min(x0 + win.size, w); ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!found || plane[i] > best) {
        best = plane[i];
        best_index = i;
        found = true;
      }
    }
  }
  return best_index;
}

}  // namespace

Tensor maxpool2d_forward(const Tensor& input, const PoolWindow& win) {
  check_pool(input, win);
  const int h = input.height();
  const int w = input.width();
  const int out_h = win.output_extent(h);
  const int out_w = win.output_extent(w);
  Tensor out = Tensor::feature_map(input.channels(), out_h, out_w);
  for (int c = 0; c < input.channels(); ++c) {
    const auto src = input.channel(c);
    auto dst = out.channel(c);
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox)
        dst[static_cast<std::size_t>(oy) * out_w + ox] = src[window_argmax(src, h, w, win, oy, ox)];
  }
  return out;
}

Tensor maxpool2d_backward(const Tensor& input, const PoolWindow& win, const Tensor& grad_output) {
  check_pool(input, win);
  const int h = input.height();
  const int w = input.width();
  const int out_h = win.output_extent(h);
  const int out_w = win.output_extent(w);
  if (grad_output.shape() != Shape{input.channels(), out_h, out_w})
    throw ShapeError("maxpool2d_backward: gradient shape mismatch");
  Tensor grad_input = Tensor::feature_map(input.channels(), h, w);
  for (int c = 0; c < input.channels(); ++c) {
    const auto src = input.channel(c);
    const auto g = grad_output.channel(c);
    auto dst = grad_input.channel(c);
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox)
        dst[window_argmax(src, h, w, win, oy, ox)] += g[static_cast<std::size_t>(oy) * out_w + ox];
  }
  return grad_input;
}

Tensor upsample2x(const Tensor& input) {
  require_feature_map(input, "upsample2x");
  const int h = input.height();
  const int w = input.width();
  Tensor out = Tensor::feature_map(input.channels(), 2 * h, 2 * w);
  for (int c = 0; c < input.channels(); ++c)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) out.at(c, y, x) = input.at(c, y / 2, x / 2);
  return out;
}

Tensor upsample2x_backward(const Tensor& grad_output) {
  require_feature_map(grad_output, "upsample2x_backward");
  if (grad_output.height() % 2 || grad_output.width() % 2)
    throw ShapeError("upsample2x_backward: gradient extents must be even");
  const int h = grad_output.height() / 2;
  const int w = grad_output.width() / 2;
  Tensor out = Tensor::feature_map(grad_output.channels(), h, w);
  for (int c = 0; c < grad_output.channels(); ++c)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) out.at(c, y / 2, x / 2) += grad_output.at(c, y, x);
  return out;
}

Tensor concat_channels(std::span<const Tensor> inputs) {
  if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
  int channels = 0;
  for (const Tensor& t : inputs) {
    require_feature_map(t, "concat_channels");
    if (t.height() != inputs[0].height() || t.width() != inputs[0].width())
      throw ShapeError("concat_channels: spatial mismatch " + to_string(t.shape()) + " vs " +
                       to_string(inputs[0].shape()));
    channels += t.channels();
  }
  Tensor out = Tensor::feature_map(channels, inputs[0].height(), inputs[0].width());
  auto dst = out.data().begin();
  for (const Tensor& t : inputs) dst = std::copy(t.data().begin(), t.data().end(), dst);
  return out;
}

std::vector<Tensor> split_channels(const Tensor& t, std::span<const int> channels) {
  require_feature_map(t, "split_channels");
  int total = 0;
  for (int c : channels) total += c;
  if (total != t.channels()) throw ShapeError("split_channels: channel counts do not sum to input");
  std::vector<Tensor> parts;
  auto src = t.data().begin();
  const std::size_t plane = static_cast<std::size_t>(t.height()) * t.width();
  for (int c : channels) {
    Tensor part = Tensor::feature_map(c, t.height(), t.width());
    std::copy(src, src + static_cast<std::ptrdiff_t>(plane * c), part.data().begin());
    src += static_cast<std::ptrdiff_t>(plane * c);
    parts.push_back(std::move(part));
  }
  return parts;
}

Tensor add_activate(const Tensor& a, const Tensor& b, Activation activation) {
  if (a.shape() != b.shape())
    throw ShapeError("shortcut: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = activate(activation, a[i] + b[i]);
  return out;
}

}  // namespace yolospp
