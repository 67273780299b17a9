#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sdgcount/config.hpp"
#include "sdgcount/eval.hpp"
#include "sdgcount/synthbench.hpp"
#include "sdgcount/train.hpp"

namespace sdgcount::cli {

namespace fs = std::filesystem;

/// Flags shared by every subcommand.
struct CommonOptions {
  fs::path config;               // empty → defaults
  std::optional<std::uint64_t> seed;
  std::string device = "cpu";
  fs::path out;
};

/// Loads (or defaults) the config and applies `--seed`. Only the cpu device exists.
RunConfig resolve_config(const CommonOptions& opts);

/// Root for prepared artifacts when `--out` is not given: $SDGCOUNT_CACHE, else ./.sdgcount_cache.
fs::path cache_root();

struct PrepareStats {
  int written = 0;
  int skipped = 0;
};

/// Writes `<id>_density.npy`, `<id>_pcm.npy` and a `<id>_gt.json` sidecar (scale,
/// sigma, patch size, input fingerprint) per record. Records whose sidecar
/// fingerprint matches the current inputs are skipped.
/// Throws DataError listing every unreadable record.
PrepareStats cmd_prepare(const fs::path& manifest, const fs::path& out_dir, double sigma, int patch_size,
                         bool renormalize);

/// Trains on the manifest's `split` records. Writes config.json, train_log.jsonl
/// and checkpoints/last.ckpt under `out_dir`.
TrainHistory cmd_train(const RunConfig& config, const fs::path& manifest, const std::string& split,
                       const fs::path& out_dir, const fs::path& resume_from = {});

/// Evaluates a checkpoint; writes eval_report.json and per_image.csv to `out_dir`
/// when it is non-empty.
EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& manifest, const std::string& split,
                    const fs::path& out_dir, bool pde_diagnostic = false);

/// Count for one image. With a non-empty `out_dir`, also writes density.npy,
/// density.png and pcm.png.
double cmd_predict(const fs::path& checkpoint, const fs::path& image, const fs::path& out_dir);

/// Writes `out_png` (density heat-map at the input size) and a PCM overlay next
/// to it (`<stem>_pcm.png`): GT | predicted | binarized panels when an
/// annotation is given, otherwise predicted | binarized.
void cmd_visualize(const fs::path& checkpoint, const fs::path& image, const fs::path& out_png,
                   const fs::path& annotation = {});

struct SynthOptions {
  SceneSpec spec;
  int n_train = 64;
  int n_test = 64;
  std::uint64_t seed = 2023;
};

/// Generates a source/target pair and writes `<out_dir>/manifest.jsonl`
/// (splits "train" and "test").
fs::path cmd_synth(const SynthOptions& opts, const fs::path& out_dir);

}  // namespace sdgcount::cli
