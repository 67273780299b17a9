#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sdgcount/config.hpp"
#include "sdgcount/model.hpp"
#include "sdgcount/optim.hpp"

namespace sdgcount {

/// Progress counters stored alongside the weights.
struct TrainProgress {
  std::int64_t epochs_done = 0;
  std::int64_t global_step = 0;
};

struct CheckpointHeader {
  std::string config_text;  // canonical config
  std::string config_hash;
  std::uint64_t seed = 0;
  TrainProgress progress;
  bool has_optimizer = false;
};

/// Binary layout: 8-byte magic, u32 version, u64 header length, JSON header
/// (metadata plus a tensor table), then raw little-endian float64 payload.
/// Written to a temporary file and renamed, so a crash never leaves a torn file.
void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, MPCountModel& model,
                     const AdamW* optimizer, TrainProgress progress);

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Restores parameters, batch-norm buffers and (when given and present) the
/// optimizer moments. Throws DataError on missing or mis-shaped tensors.
CheckpointHeader load_checkpoint(const std::filesystem::path& path, MPCountModel& model, AdamW* optimizer = nullptr);

/// Builds a model from the embedded config and loads its weights.
MPCountModel load_model(const std::filesystem::path& path, RunConfig* config_out = nullptr);

/// Copies only the encoder tensors from a checkpoint. Returns how many were loaded.
int load_pretrained_encoder(const std::filesystem::path& path, MPCountModel& model);

}  // namespace sdgcount
