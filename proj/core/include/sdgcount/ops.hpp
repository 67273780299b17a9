#pragma once

#include "sdgcount/autograd.hpp"

namespace sdgcount::ag {

// Elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// Multiply by a constant tensor of the same shape; no gradient flows to `mask`.
Var mul_const(const Var& a, const Tensor& mask);
Var scale(const Var& a, double s);
Var relu(const Var& x);
Var sigmoid(const Var& x);

// Reductions
Var sum(const Var& x);
Var mean(const Var& x);

// Shape manipulation on N×C×H×W tensors
Var concat_channels(const Var& a, const Var& b);
Var concat_batch(const Var& a, const Var& b);
Var slice_batch(const Var& x, std::int64_t start, std::int64_t count);
/// N×C×H×W -> (N·H·W)×C, rows in (n, h, w) order.
Var to_rows(const Var& x);
/// Inverse of to_rows.
Var from_rows(const Var& rows, std::int64_t n, std::int64_t h, std::int64_t w);

// Linear algebra on 2-D tensors
Var matmul(const Var& a, const Var& b);
/// a · bᵀ
Var matmul_nt(const Var& a, const Var& b);
Var softmax_rows(const Var& x);

// Spatial ops (stride 1, zero padding)
/// x: N×Cin×H×W, weight: Cout×Cin×k×k, bias: Cout (may be undefined).
Var conv2d(const Var& x, const Var& weight, const Var& bias, int padding);
/// 2×2 max pooling with stride 2; H and W must be even.
Var max_pool2(const Var& x);
/// Nearest-neighbor upsampling by an integer factor.
Var upsample_nearest(const Var& x, int factor);
/// Bilinear upsampling by an integer factor with half-pixel centers and edge
/// clamping. Each input value contributes total weight factor² to the output.
Var upsample_bilinear(const Var& x, int factor);

/// Running statistics owned by a batch-norm layer.
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};

/// Per-channel batch normalization over (N, H, W) using batch statistics;
/// `stats` is updated with `momentum` (unbiased variance, as in common frameworks).
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats,
                     double momentum, double eps);
/// Batch normalization with frozen running statistics.
Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const BatchNormStats& stats,
                    double eps);

}  // namespace sdgcount::ag
