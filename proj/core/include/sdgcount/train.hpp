#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdgcount/checkpoint.hpp"
#include "sdgcount/config.hpp"
#include "sdgcount/losses.hpp"
#include "sdgcount/manifest.hpp"

namespace sdgcount {

/// One training image with its full-resolution, unscaled density target.
struct TrainSample {
  std::string id;
  Image image;
  DensityMap density;
};

std::vector<TrainSample> make_train_samples(const std::vector<LabeledImage>& images, const DataConfig& data);

struct StepRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;
  double wall_time = 0.0;  // seconds since the run started

  /// {"step", "epoch", "lr", "loss", <terms>..., "wall_time"} on one line.
  std::string to_json_line() const;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  TrainProgress progress;
  std::filesystem::path last_checkpoint;  // empty if none was written
};

struct TrainOptions {
  /// Logs go to `out_dir/train_log.jsonl`, checkpoints to `out_dir/checkpoints/`.
  /// Empty disables all file output.
  std::filesystem::path out_dir;
  /// Continue from this checkpoint (optimizer state and counters included).
  std::filesystem::path resume_from;
  /// Stop after this many completed epochs, e.g. to simulate an interruption.
  std::optional<std::int64_t> stop_after_epochs;
  std::function<void(const StepRecord&)> on_step;
};

/// Steps per epoch for a dataset of `n` samples (the last batch may be short).
std::int64_t steps_per_epoch(std::size_t n, int batch_size);

/// AdamW + one-cycle training of `model` on paired views of `samples`.
/// Every random draw is keyed by (seed, epoch, sample) or (seed, step), so a
/// resumed run continues exactly where the uninterrupted one would be.
/// Throws DataError on an empty dataset and NumericError (naming the last good
/// checkpoint) on a non-finite loss.
TrainHistory train(MPCountModel& model, const std::vector<TrainSample>& samples, const RunConfig& config,
                   const TrainOptions& options = {});

struct ProbeResult {
  double mae = 0.0;
  double mean_count = 0.0;
  std::vector<double> losses;
};

/// Trains on at most 8 fixed samples for `steps` iterations (crop = full
/// image) and reports the train-set MAE of the inference path.
ProbeResult overfit_probe(MPCountModel& model, const std::vector<TrainSample>& samples, const RunConfig& config,
                          std::int64_t steps);

/// Mean absolute count error of `model` over the samples, using forward_infer.
double count_mae(const MPCountModel& model, const std::vector<TrainSample>& samples, double density_scale);

}  // namespace sdgcount
