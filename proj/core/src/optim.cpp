#include "sdgcount/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sdgcount/errors.hpp"

namespace sdgcount {

AdamW::AdamW(nn::ParameterSet params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  slots_.reserve(params_.params.size());
  for (const auto& [name, v] : params_.params) {
    slots_.push_back({Tensor(v.shape(), 0.0), Tensor(v.shape(), 0.0), 0});
  }
}

void AdamW::step(double lr) {
  const double b1 = config_.beta1, b2 = config_.beta2;
  for (std::size_t i = 0; i < params_.params.size(); ++i) {
    ag::Var& p = params_.params[i].second;
    const Tensor& g = p.grad();
    if (g.empty()) continue;
    Slot& s = slots_[i];
    ++s.steps;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(s.steps));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(s.steps));
    Tensor& w = p.value_mut();
    const double decay = 1.0 - lr * config_.weight_decay;
    for (std::int64_t k = 0; k < w.numel(); ++k) {
      w[k] *= decay;
      s.exp_avg[k] = b1 * s.exp_avg[k] + (1.0 - b1) * g[k];
      s.exp_avg_sq[k] = b2 * s.exp_avg_sq[k] + (1.0 - b2) * g[k] * g[k];
      const double denom = std::sqrt(s.exp_avg_sq[k] / bc2) + config_.eps;
      w[k] -= lr * (s.exp_avg[k] / bc1) / denom;
    }
  }
}

OneCycleLR::OneCycleLR(double max_lr, std::int64_t total_steps, double pct_start, double div_factor,
                       double final_div)
    : max_lr_(max_lr),
      initial_lr_(max_lr / div_factor),
      final_lr_(max_lr / final_div),
      total_steps_(total_steps) {
  if (total_steps < 1) throw ConfigError("OneCycleLR: total_steps must be >= 1");
  if (!(pct_start > 0 && pct_start < 1)) throw ConfigError("OneCycleLR: pct_start must be in (0,1)");
  if (!(max_lr > 0) || !(div_factor >= 1) || !(final_div >= 1)) throw ConfigError("OneCycleLR: invalid factors");
  peak_step_ = static_cast<std::int64_t>(std::floor(pct_start * static_cast<double>(total_steps - 1)));
}

namespace {
double cosine(double from, double to, double pct) { return to + (from - to) / 2.0 * (1.0 + std::cos(std::numbers::pi * pct)); }
}  // namespace

double OneCycleLR::lr_at(std::int64_t step) const {
  step = std::clamp<std::int64_t>(step, 0, total_steps_ - 1);
  if (step <= peak_step_) {
    if (peak_step_ == 0) return max_lr_;
    return cosine(initial_lr_, max_lr_, static_cast<double>(step) / static_cast<double>(peak_step_));
  }
  const double span = static_cast<double>(total_steps_ - 1 - peak_step_);
  return cosine(max_lr_, final_lr_, static_cast<double>(step - peak_step_) / span);
}

double clip_grad_norm(nn::ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, v] : params.params)
    for (double g : v.grad().values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double s = max_norm / norm;
    for (auto& [name, v] : params.params)
      if (!v.grad().empty()) v.node()->grad *= s;
  }
  return norm;
}

}  // namespace sdgcount
