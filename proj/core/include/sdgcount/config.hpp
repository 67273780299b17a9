#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sdgcount/augment.hpp"
#include "sdgcount/losses.hpp"
#include "sdgcount/model.hpp"

namespace sdgcount {

struct DataConfig {
  double sigma = 4.0;
  bool renormalize = true;
};

struct TrainConfig {
  int max_epochs = 300;
  int batch_size = 16;
  double max_lr = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 2023;
  double density_scale = 1000.0;
  int checkpoint_every = 10;
  double warmup_fraction = 0.3;
  double initial_div = 25.0;
  double final_div = 1e4;
  double grad_clip = 0.0;  // 0 disables clipping
};

struct EvalConfig {
  bool pde_diagnostic = false;
};

/// Everything a run needs. Ablation switches live in `model.switches` and
/// govern both the network and the loss terms.
struct RunConfig {
  DataConfig data;
  AugmentationConfig augmentation;
  ModelConfig model;
  LossWeights loss;
  TrainConfig train;
  EvalConfig eval;

  /// Every violated constraint, one message each.
  std::vector<std::string> validate() const;

  /// Tiny backbone, small bank and 64-pixel crops for desk-scale runs.
  static RunConfig desk_scale();
};

/// Canonical text form: pretty-printed JSON with sorted keys and a trailing newline.
std::string serialize_config(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys and type errors are
/// reported together in one ConfigError.
RunConfig parse_config(std::string_view text);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace sdgcount
