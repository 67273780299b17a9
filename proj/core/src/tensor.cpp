#include "sdgcount/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdgcount/errors.hpp"

namespace sdgcount {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(static_cast<std::size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_numel(shape_) != static_cast<std::int64_t>(values_.size())) {
    throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " +
                     std::to_string(values_.size()) + " values");
  }
}

std::int64_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
  }
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

double Tensor::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

double Tensor::min() const {
  if (values_.empty()) throw ShapeError("min of empty tensor");
  return *std::min_element(values_.begin(), values_.end());
}

double Tensor::max() const {
  if (values_.empty()) throw ShapeError("max of empty tensor");
  return *std::max_element(values_.begin(), values_.end());
}

double Tensor::mean() const {
  if (values_.empty()) throw ShapeError("mean of empty tensor");
  return sum() / static_cast<double>(values_.size());
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "Tensor::operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (auto& v : values_) v *= s;
  return *this;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

Tensor slice_rows(const Tensor& t, std::int64_t start, std::int64_t count) {
  if (t.rank() == 0 || start < 0 || count < 0 || start + count > t.dim(0)) {
    throw ShapeError("slice_rows: range out of bounds for " + shape_str(t.shape()));
  }
  Shape shape = t.shape();
  const std::int64_t stride = t.dim(0) == 0 ? 0 : t.numel() / t.dim(0);
  shape[0] = count;
  std::vector<double> out(t.data() + start * stride, t.data() + (start + count) * stride);
  return Tensor(std::move(shape), std::move(out));
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0 ||
      !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw ShapeError("concat_rows: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  return Tensor(std::move(shape), std::move(out));
}

}  // namespace sdgcount
