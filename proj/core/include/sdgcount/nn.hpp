#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sdgcount/ops.hpp"
#include "sdgcount/rng.hpp"

namespace sdgcount::nn {

/// Flat, ordered view over a module tree's learnable parameters and buffers.
struct ParameterSet {
  std::vector<std::pair<std::string, ag::Var>> params;
  std::vector<std::pair<std::string, Tensor*>> buffers;

  void add(std::string name, const ag::Var& v) { params.emplace_back(std::move(name), v); }
  void add_buffer(std::string name, Tensor* t) { buffers.emplace_back(std::move(name), t); }
  void zero_grad();
  std::int64_t numel() const;
};

/// He-normal initialized weight parameter.
ag::Var kaiming_normal(Shape shape, std::int64_t fan_in, Rng& rng);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, bool with_bias, Rng& rng);

  ag::Var operator()(const ag::Var& x) const { return ag::conv2d(x, weight, bias, padding); }
  void collect(const std::string& prefix, ParameterSet& out);

  ag::Var weight;
  ag::Var bias;
  int padding = 0;
};

class BatchNorm2d {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels);

  /// Training uses batch statistics and updates the running ones.
  ag::Var operator()(const ag::Var& x, bool training);
  ag::Var operator()(const ag::Var& x) const;
  void collect(const std::string& prefix, ParameterSet& out);

  ag::Var gamma;
  ag::Var beta;
  ag::BatchNormStats stats;
};

/// conv -> batch-norm -> ReLU
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(int in_channels, int out_channels, int kernel, Rng& rng);

  ag::Var operator()(const ag::Var& x, bool training) { return ag::relu(bn(conv(x), training)); }
  ag::Var operator()(const ag::Var& x) const { return ag::relu(bn(conv(x))); }
  void collect(const std::string& prefix, ParameterSet& out);

  Conv2d conv;
  BatchNorm2d bn;
};

/// Dispatches to the training overload for mutable layers and to the
/// frozen-statistics overload for const ones.
template <typename Layer>
ag::Var run(Layer& layer, const ag::Var& x, bool training) {
  if constexpr (std::is_const_v<Layer>) {
    return layer(x);
  } else {
    return layer(x, training);
  }
}

}  // namespace sdgcount::nn
