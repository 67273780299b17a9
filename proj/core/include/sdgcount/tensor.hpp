#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sdgcount {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float64 array with value semantics.
///
/// 4-D tensors follow the N×C×H×W convention throughout the library.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::int64_t dim(std::size_t axis) const;
  std::int64_t numel() const noexcept { return static_cast<std::int64_t>(values_.size()); }
  bool empty() const noexcept { return values_.empty(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& operator[](std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }

  double& at(std::int64_t r, std::int64_t c) { return values_[static_cast<std::size_t>(r * shape_[1] + c)]; }
  double at(std::int64_t r, std::int64_t c) const {
    return values_[static_cast<std::size_t>(r * shape_[1] + c)];
  }
  double& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return values_[offset4(n, c, h, w)];
  }
  double at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return values_[offset4(n, c, h, w)];
  }

  /// Same values, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  void fill(double v);
  double sum() const;
  double min() const;
  double max() const;
  double mean() const;
  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset4(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w);
  }

  Shape shape_;
  std::vector<double> values_;
};

/// Throws ShapeError when `a` and `b` differ in shape. `what` names the call site.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_rank(const Tensor& t, std::size_t rank, const char* what);

/// Copy of rows [start, start+count) along axis 0.
Tensor slice_rows(const Tensor& t, std::int64_t start, std::int64_t count);
/// Concatenate along axis 0.
Tensor concat_rows(const Tensor& a, const Tensor& b);

}  // namespace sdgcount
