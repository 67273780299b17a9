#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdgcount/config.hpp"
#include "sdgcount/manifest.hpp"
#include "sdgcount/model.hpp"

namespace sdgcount {

struct CountingMetrics {
  double mae = 0.0;
  double mse = 0.0;  // root of the mean squared error, reported under its usual name
};

/// Throws Error on empty or unequal inputs.
CountingMetrics counting_metrics(std::span<const double> gt, std::span<const double> pred);

struct PcmMetrics {
  double macc = 0.0;
  double miou = 0.0;
  double mdice = 0.0;
};

/// 2×2 confusion counts over the classes {0,1}, indexed [gt][pred].
struct PcmConfusion {
  std::int64_t counts[2][2] = {{0, 0}, {0, 0}};

  void add(const PatchClassMap& gt, const PatchClassMap& pred);
  /// Class-averaged accuracy, IoU and Dice. A class absent from both gt and
  /// pred scores 1 on every metric.
  PcmMetrics metrics() const;
};

/// Single-grid metrics; ShapeError if the grids differ in size.
PcmMetrics pcm_metrics(const PatchClassMap& gt, const PatchClassMap& pred_binary);

/// Anything that maps an image to a density, count and patch map.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual InferenceResult predict(const Image& image) const = 0;
  virtual int patch_size() const = 0;
};

class ModelPredictor final : public Predictor {
 public:
  ModelPredictor(const MPCountModel& model, double density_scale) : model_(model), scale_(density_scale) {}
  InferenceResult predict(const Image& image) const override { return model_.forward_infer(image, scale_); }
  int patch_size() const override { return model_.config().patch_size; }

 private:
  const MPCountModel& model_;
  double scale_;
};

struct ImageResult {
  std::string id;
  double gt_count = 0.0;
  double pred_count = 0.0;
};

struct EvalReport {
  double mae = 0.0;
  double mse = 0.0;
  PcmMetrics pcm;
  std::optional<double> pde;  // percent, when the paired diagnostic ran
  std::vector<ImageResult> per_image;  // sorted by id

  std::string to_json() const;
  std::string to_csv() const;
};

/// Full-image inference on every sample, GT from the annotations with the
/// configured sigma. PCM metrics compare against the GT grid of the padded
/// image. With `diag_model` and cfg.eval.pde_diagnostic set, also averages the
/// PDE over one photometric view per image.
EvalReport evaluate(const Predictor& predictor, const std::vector<LabeledImage>& images, const RunConfig& cfg,
                    const MPCountModel* diag_model = nullptr);

/// Portion of diminished elements, in percent, of the content error mask
/// between two batches (N×3×H×W each) at threshold `alpha`. Eval-mode encoder.
double pde_diagnostic(const MPCountModel& model, const Tensor& ori, const Tensor& aug, double alpha);

}  // namespace sdgcount
