#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace yolospp {

#ifdef YOLOSPP_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<int>;

std::string to_string(const Shape& shape);

/// Dense row-major array of rank 1..4. Feature maps are rank 3, laid out channels x height x width.
class Tensor {
 public:
  /// Empty placeholder; has rank 0 and no data. Every kernel rejects it.
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor feature_map(int channels, int height, int width, Real fill = Real(0)) {
    return Tensor(Shape{channels, height, width}, fill);
  }

  bool empty() const noexcept { return shape_.empty(); }
  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  std::size_t size() const noexcept { return data_.size(); }
  int extent(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }

  // Feature-map accessors; only meaningful for rank-3 tensors.
  int channels() const { return extent(0); }
  int height() const { return extent(1); }
  int width() const { return extent(2); }
  Real& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  Real at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  std::vector<Real>& storage() noexcept { return data_; }

  /// Contiguous plane of channel `c` in a rank-3 tensor.
  std::span<Real> channel(int c);
  std::span<const Real> channel(int c) const;

  void fill(Real value);
  Real sum() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

/// Throws ShapeError unless `shape` has rank 1..4 with all extents >= 1.
void validate_shape(const Shape& shape);

std::size_t element_count(const Shape& shape);

/// Throws ShapeError unless `t` is a rank-3 feature map.
void require_feature_map(const Tensor& t, const char* what);

}  // namespace yolospp
