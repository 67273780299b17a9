#include "sdgcount/losses.hpp"

#include <algorithm>
#include <cmath>

#include "sdgcount/errors.hpp"
#include "sdgcount/ops.hpp"

namespace sdgcount {

ag::Var density_loss(const ag::Var& pred, const Tensor& gt) {
  require_same_shape(pred.value(), gt, "density_loss");
  const Tensor& p = pred.value();
  const std::int64_t batch = p.rank() >= 3 ? p.dim(0) : 1;
  double total = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) {
    const double d = p[i] - gt[i];
    total += d * d;
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  return ag::make_op(Tensor({1}, total * inv_batch), {pred}, [gt, inv_batch](ag::Node& self) {
    auto& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    const double s = 2.0 * inv_batch * self.grad[0];
    for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s * (in.value[i] - gt[i]);
  });
}

ag::Var pc_loss(const ag::Var& pred, const Tensor& gt) {
  require_same_shape(pred.value(), gt, "pc_loss");
  for (std::int64_t i = 0; i < gt.numel(); ++i) {
    if (gt[i] != 0.0 && gt[i] != 1.0) throw DataError("pc_loss: ground-truth entries must be 0 or 1");
  }
  const Tensor& p = pred.value();
  const double n = static_cast<double>(p.numel());
  double total = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) {
    const double q = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    total -= gt[i] * std::log(q) + (1.0 - gt[i]) * std::log(1.0 - q);
  }
  return ag::make_op(Tensor({1}, total / n), {pred}, [gt, n](ag::Node& self) {
    auto& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      const double q = in.value[i];
      if (q < kBceClamp || q > 1.0 - kBceClamp) continue;
      g[i] += self.grad[0] / n * (-gt[i] / q + (1.0 - gt[i]) / (1.0 - q));
    }
  });
}

ag::Var attention_consistency_loss(const ag::Var& a_ori, const ag::Var& a_aug) {
  require_same_shape(a_ori.value(), a_aug.value(), "attention_consistency_loss");
  require_rank(a_ori.value(), 2, "attention_consistency_loss");
  const double rows = static_cast<double>(a_ori.value().dim(0));
  const ag::Var diff = ag::sub(a_ori, a_aug);
  return ag::scale(ag::sum(ag::mul(diff, diff)), 1.0 / rows);
}

double density_loss(const DensityMap& gt, const DensityMap& pred) {
  if (gt.scale != pred.scale) {
    throw ConfigError("density_loss: scale mismatch (" + std::to_string(gt.scale) + " vs " +
                      std::to_string(pred.scale) + ")");
  }
  ag::NoGradGuard guard;
  return density_loss(ag::Var(pred.values), gt.values).value()[0];
}

double pc_loss(const PatchClassMap& gt, const PatchClassMap& pred) {
  ag::NoGradGuard guard;
  return pc_loss(ag::Var(pred.values), gt.values).value()[0];
}

double attention_consistency_loss(const Tensor& a_ori, const Tensor& a_aug) {
  ag::NoGradGuard guard;
  return attention_consistency_loss(ag::Var(a_ori), ag::Var(a_aug)).value()[0];
}

std::vector<std::pair<std::string, double>> LossBreakdown::labeled() const {
  return {{"total", total},           {"den_ori", parts.den_ori}, {"den_aug", parts.den_aug},
          {"cls_ori", parts.cls_ori}, {"cls_aug", parts.cls_aug}, {"con", parts.con}};
}

LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights) {
  const std::pair<const char*, double> terms[] = {{"den_ori", parts.den_ori},
                                                  {"den_aug", parts.den_aug},
                                                  {"cls_ori", parts.cls_ori},
                                                  {"cls_aug", parts.cls_aug},
                                                  {"con", parts.con}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) throw NumericError(std::string("loss term '") + name + "' is not finite");
  }
  LossBreakdown out;
  out.parts = parts;
  out.total = parts.den_ori + parts.den_aug + weights.lambda_cls * (parts.cls_ori + parts.cls_aug) +
              weights.lambda_con * parts.con;
  return out;
}

ag::Var total_loss(const LossTerms& terms, const LossWeights& weights) {
  ag::Var total = ag::add(terms.den_ori, terms.den_aug);
  if (terms.cls_ori.defined() && terms.cls_aug.defined() && weights.lambda_cls != 0.0) {
    total = ag::add(total, ag::scale(ag::add(terms.cls_ori, terms.cls_aug), weights.lambda_cls));
  }
  if (terms.con.defined() && weights.lambda_con != 0.0) {
    total = ag::add(total, ag::scale(terms.con, weights.lambda_con));
  }
  return total;
}

}  // namespace sdgcount
