#include "sdgcount/eval.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "sdgcount/augment.hpp"
#include "sdgcount/errors.hpp"

namespace sdgcount {

CountingMetrics counting_metrics(std::span<const double> gt, std::span<const double> pred) {
  if (gt.empty()) throw Error("counting_metrics: no counts");
  if (gt.size() != pred.size()) throw Error("counting_metrics: gt and pred lengths differ");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double d = gt[i] - pred[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(gt.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

void PcmConfusion::add(const PatchClassMap& gt, const PatchClassMap& pred) {
  require_same_shape(gt.values, pred.values, "pcm_metrics");
  for (std::int64_t i = 0; i < gt.values.numel(); ++i) {
    const int g = gt.values[i] >= 0.5 ? 1 : 0;
    const int p = pred.values[i] >= 0.5 ? 1 : 0;
    ++counts[g][p];
  }
}

PcmMetrics PcmConfusion::metrics() const {
  PcmMetrics m;
  for (int c = 0; c < 2; ++c) {
    const std::int64_t tp = counts[c][c];
    const std::int64_t in_gt = counts[c][0] + counts[c][1];
    const std::int64_t in_pred = counts[0][c] + counts[1][c];
    if (in_gt == 0 && in_pred == 0) {
      m.macc += 1.0;
      m.miou += 1.0;
      m.mdice += 1.0;
      continue;
    }
    m.macc += in_gt ? static_cast<double>(tp) / static_cast<double>(in_gt) : 0.0;
    m.miou += static_cast<double>(tp) / static_cast<double>(in_gt + in_pred - tp);
    m.mdice += 2.0 * static_cast<double>(tp) / static_cast<double>(in_gt + in_pred);
  }
  m.macc /= 2.0;
  m.miou /= 2.0;
  m.mdice /= 2.0;
  return m;
}

PcmMetrics pcm_metrics(const PatchClassMap& gt, const PatchClassMap& pred_binary) {
  PcmConfusion c;
  c.add(gt, pred_binary);
  return c.metrics();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["mae"] = mae;
  j["mse"] = mse;
  j["macc"] = pcm.macc;
  j["miou"] = pcm.miou;
  j["mdice"] = pcm.mdice;
  if (pde) j["pde"] = *pde;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : per_image) rows.push_back({{"id", r.id}, {"gt_count", r.gt_count}, {"pred_count", r.pred_count}});
  j["per_image"] = rows;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "id,gt_count,pred_count\n";
  for (const auto& r : per_image) out << r.id << ',' << r.gt_count << ',' << r.pred_count << '\n';
  return out.str();
}

namespace {

Image pad_to_multiple(const Image& image, int m) {
  const int ph = (image.height + m - 1) / m * m;
  const int pw = (image.width + m - 1) / m * m;
  return (ph == image.height && pw == image.width) ? image : reflect_pad(image, ph, pw);
}

}  // namespace

EvalReport evaluate(const Predictor& predictor, const std::vector<LabeledImage>& images, const RunConfig& cfg,
                    const MPCountModel* diag_model) {
  if (images.empty()) throw DataError("evaluate: no images");
  std::vector<const LabeledImage*> sorted;
  for (const auto& li : images) sorted.push_back(&li);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

  EvalReport report;
  PcmConfusion confusion;
  std::vector<double> gt, pred;
  double pde_sum = 0.0;
  const bool run_pde = diag_model && cfg.eval.pde_diagnostic;
  const int p = predictor.patch_size();

  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const LabeledImage& li = *sorted[k];
    const DensityMap density =
        generate_density_map(li.annotation, li.image.height, li.image.width, cfg.data.sigma, cfg.data.renormalize);
    const InferenceResult r = predictor.predict(li.image);

    const int ph = r.pcm_binary.rows() * p, pw = r.pcm_binary.cols() * p;
    const PatchClassMap pcm_gt = generate_pcm_gt(pad_density(density, ph, pw), p);
    confusion.add(pcm_gt, r.pcm_binary);

    report.per_image.push_back({li.id, static_cast<double>(li.annotation.points.size()), r.count});
    gt.push_back(report.per_image.back().gt_count);
    pred.push_back(r.count);

    if (run_pde) {
      const Image base = pad_to_multiple(li.image, diag_model->config().input_multiple());
      Rng rng = Rng::derive(cfg.train.seed, {0xe7a1, k});
      const Image view = photometric_augment(base, cfg.augmentation, rng);
      pde_sum += pde_diagnostic(*diag_model, image_to_tensor(base), image_to_tensor(view), cfg.model.alpha);
    }
  }
  const CountingMetrics cm = counting_metrics(gt, pred);
  report.mae = cm.mae;
  report.mse = cm.mse;
  report.pcm = confusion.metrics();
  if (run_pde) report.pde = pde_sum / static_cast<double>(sorted.size());
  return report;
}

double pde_diagnostic(const MPCountModel& model, const Tensor& ori, const Tensor& aug, double alpha) {
  require_same_shape(ori, aug, "pde_diagnostic");
  ag::NoGradGuard no_grad;
  const std::int64_t n = ori.dim(0);
  const EncoderOutput enc = model.encode(ag::Var(concat_rows(ori, aug)));
  const Tensor& f = enc.recon_feature.value();
  const ContentErrorMask mask =
      compute_cem({slice_rows(f, 0, n), kReconStride}, {slice_rows(f, n, n), kReconStride}, alpha);
  return 100.0 * mask.pde();
}

}  // namespace sdgcount
