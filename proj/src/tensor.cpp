#include "yolospp/tensor.hpp"

#include <algorithm>
#include <numeric>

#include "yolospp/errors.hpp"

namespace yolospp {

std::string to_string(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out.empty() ? std::string("<empty>") : out;
}

void validate_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 4)
    throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
  for (int e : shape)
    if (e < 1) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape));
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, int e) { return acc * static_cast<std::size_t>(e); });
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != element_count(shape_))
    throw ShapeError("tensor of shape " + to_string(shape_) + " needs " +
                     std::to_string(element_count(shape_)) + " values, got " +
                     std::to_string(data_.size()));
}

std::span<Real> Tensor::channel(int c) {
  const std::size_t plane = static_cast<std::size_t>(shape_[1]) * shape_[2];
  return std::span<Real>(data_).subspan(static_cast<std::size_t>(c) * plane, plane);
}

std::span<const Real> Tensor::channel(int c) const {
  const std::size_t plane = static_cast<std::size_t>(shape_[1]) * shape_[2];
  return std::span<const Real>(data_).subspan(static_cast<std::size_t>(c) * plane, plane);
}

void Tensor::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

Real Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), Real(0)); }

void require_feature_map(const Tensor& t, const char* what) {
  if (t.rank() != 3)
    throw ShapeError(std::string(what) + ": expected a C x H x W feature map, got shape " +
                     to_string(t.shape()));
}

}  // namespace yolospp
