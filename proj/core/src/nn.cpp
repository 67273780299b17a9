#include "sdgcount/nn.hpp"

#include <cmath>

namespace sdgcount::nn {

void ParameterSet::zero_grad() {
  for (auto& [name, v] : params) v.zero_grad();
}

std::int64_t ParameterSet::numel() const {
  std::int64_t n = 0;
  for (const auto& [name, v] : params) n += v.value().numel();
  return n;
}

ag::Var kaiming_normal(Shape shape, std::int64_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.values()) v = rng.normal(0.0, stddev);
  return ag::Var(std::move(t), true);
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, bool with_bias, Rng& rng)
    : weight(kaiming_normal({out_channels, in_channels, kernel, kernel},
                            static_cast<std::int64_t>(in_channels) * kernel * kernel, rng)),
      padding((kernel - 1) / 2) {
  if (with_bias) bias = ag::Var(Tensor({out_channels}, 0.0), true);
}

void Conv2d::collect(const std::string& prefix, ParameterSet& out) {
  out.add(prefix + ".weight", weight);
  if (bias.defined()) out.add(prefix + ".bias", bias);
}

BatchNorm2d::BatchNorm2d(int channels)
    : gamma(Tensor({channels}, 1.0), true), beta(Tensor({channels}, 0.0), true) {
  stats.running_mean = Tensor({channels}, 0.0);
  stats.running_var = Tensor({channels}, 1.0);
}

ag::Var BatchNorm2d::operator()(const ag::Var& x, bool training) {
  if (training) return ag::batch_norm_train(x, gamma, beta, stats, kMomentum, kEps);
  return ag::batch_norm_eval(x, gamma, beta, stats, kEps);
}

ag::Var BatchNorm2d::operator()(const ag::Var& x) const { return ag::batch_norm_eval(x, gamma, beta, stats, kEps); }

void BatchNorm2d::collect(const std::string& prefix, ParameterSet& out) {
  out.add(prefix + ".gamma", gamma);
  out.add(prefix + ".beta", beta);
  out.add_buffer(prefix + ".running_mean", &stats.running_mean);
  out.add_buffer(prefix + ".running_var", &stats.running_var);
}

ConvBnRelu::ConvBnRelu(int in_channels, int out_channels, int kernel, Rng& rng)
    : conv(in_channels, out_channels, kernel, true, rng), bn(out_channels) {}

void ConvBnRelu::collect(const std::string& prefix, ParameterSet& out) {
  conv.collect(prefix + ".conv", out);
  bn.collect(prefix + ".bn", out);
}

}  // namespace sdgcount::nn
