#pragma once

#include <cstdint>
#include <vector>

#include "sdgcount/nn.hpp"

namespace sdgcount {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay: p ← p·(1 − lr·wd) − lr·m̂/(√v̂ + eps).
/// Parameters whose gradient is empty (never reached by backward) are skipped.
class AdamW {
 public:
  struct Slot {
    Tensor exp_avg;
    Tensor exp_avg_sq;
    std::int64_t steps = 0;
  };

  AdamW(nn::ParameterSet params, AdamWConfig config);

  void step(double lr);
  void zero_grad() { params_.zero_grad(); }

  const nn::ParameterSet& params() const noexcept { return params_; }
  std::vector<Slot>& slots() noexcept { return slots_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  const AdamWConfig& config() const noexcept { return config_; }

 private:
  nn::ParameterSet params_;
  AdamWConfig config_;
  std::vector<Slot> slots_;
};

/// One-cycle policy: cosine warm-up from max_lr/div_factor to max_lr over the
/// first `pct_start` of the steps, then cosine anneal to max_lr/final_div.
class OneCycleLR {
 public:
  OneCycleLR(double max_lr, std::int64_t total_steps, double pct_start = 0.3, double div_factor = 25.0,
             double final_div = 1e4);

  double lr_at(std::int64_t step) const;
  std::int64_t peak_step() const noexcept { return peak_step_; }
  std::int64_t total_steps() const noexcept { return total_steps_; }
  double initial_lr() const noexcept { return initial_lr_; }
  double final_lr() const noexcept { return final_lr_; }

 private:
  double max_lr_;
  double initial_lr_;
  double final_lr_;
  std::int64_t total_steps_;
  std::int64_t peak_step_;
};

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(nn::ParameterSet& params, double max_norm);

}  // namespace sdgcount
