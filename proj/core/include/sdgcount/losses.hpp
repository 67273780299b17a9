#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sdgcount/autograd.hpp"
#include "sdgcount/data.hpp"

namespace sdgcount {

struct LossWeights {
  double lambda_cls = 10.0;
  double lambda_con = 10.0;
};

/// Probability clamp used by the patch classification loss.
inline constexpr double kBceClamp = 1e-7;

/// Σ over pixels of (pred − gt)², averaged over the batch (axis 0 of N×… tensors).
ag::Var density_loss(const ag::Var& pred, const Tensor& gt);
/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 − 1e-7].
/// Throws DataError if any target is not exactly 0 or 1.
ag::Var pc_loss(const ag::Var& pred, const Tensor& gt);
/// Mean over rows of the squared Euclidean distance between attention rows.
ag::Var attention_consistency_loss(const ag::Var& a_ori, const ag::Var& a_aug);

/// Single-map conveniences. Throws ShapeError on size mismatch and ConfigError
/// when the density scales differ.
double density_loss(const DensityMap& gt, const DensityMap& pred);
double pc_loss(const PatchClassMap& gt, const PatchClassMap& pred);
double attention_consistency_loss(const Tensor& a_ori, const Tensor& a_aug);

/// The five supervision terms of one training step.
struct LossParts {
  double den_ori = 0.0;
  double den_aug = 0.0;
  double cls_ori = 0.0;
  double cls_aug = 0.0;
  double con = 0.0;
};

struct LossBreakdown {
  double total = 0.0;
  LossParts parts;
  /// Labeled terms in a fixed order, for logging.
  std::vector<std::pair<std::string, double>> labeled() const;
};

/// den_ori + den_aug + λ_cls(cls_ori + cls_aug) + λ_con·con.
/// Throws NumericError naming the first non-finite term.
LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights);

/// Same combination over graph nodes; undefined terms count as zero.
struct LossTerms {
  ag::Var den_ori, den_aug, cls_ori, cls_aug, con;
};
ag::Var total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace sdgcount
