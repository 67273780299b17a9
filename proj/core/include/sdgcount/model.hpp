#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdgcount/data.hpp"
#include "sdgcount/image.hpp"
#include "sdgcount/nn.hpp"
#include "sdgcount/rng.hpp"

namespace sdgcount {

/// Stride of the feature level that is masked, reconstructed and regressed.
inline constexpr int kReconStride = 8;
/// Stride of the deepest encoder feature (input to the patch classifier).
inline constexpr int kDeepestStride = 32;
inline constexpr double kInstanceNormEps = 1e-5;

/// Five-level VGG-style encoder layout plus decoder/head widths.
struct BackboneSpec {
  std::string name = "vgg16_bn";
  std::vector<int> widths{64, 128, 256, 512, 512};
  std::vector<int> convs{2, 2, 3, 3, 3};
  int decoder_width = 512;  // fusion width at stride 16
  int pc_hidden = 256;      // 3×3 conv width in the patch classifier

  static BackboneSpec vgg16_bn();
  /// Narrow single-conv-per-level layout for desk-scale runs.
  static BackboneSpec tiny();

  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

struct AblationSwitches {
  bool amb = true;
  bool cem = true;
  bool acl = true;
  bool pc = true;

  static AblationSwitches all_off() { return {false, false, false, false}; }
  friend bool operator==(const AblationSwitches&, const AblationSwitches&) = default;
};

struct ModelConfig {
  int memory_count = 1024;
  int memory_dim = 256;
  double alpha = 0.5;
  double dropout_rate = 0.1;
  int patch_size = 16;
  double pcm_threshold = 0.5;
  AblationSwitches switches;
  BackboneSpec backbone;
  std::string pretrained_weights;

  std::vector<std::string> validate() const;
  /// Smallest dimension multiple accepted by the network.
  int input_multiple() const;
};

/// N×C×H×W feature tensor and its stride relative to the input image.
struct FeatureMap {
  Tensor values;
  int stride = kReconStride;
};

/// Binary keep-mask over feature elements.
struct ContentErrorMask {
  Tensor values;  // same shape as the features, entries in {0,1}
  double alpha = 0.5;

  /// Portion of diminished elements, in [0,1].
  double pde() const { return 1.0 - values.mean(); }
};

/// Per-sample, per-channel standardization over spatial positions:
/// (x − mean) / (std + eps).
FeatureMap instance_normalize(const FeatureMap& features);

/// 1 where |IN(ori) − IN(aug)| ≤ alpha, else 0.
ContentErrorMask compute_cem(const FeatureMap& ori, const FeatureMap& aug, double alpha);

/// N×C whole-channel dropout multipliers: 0 with probability `rate`, else 1/(1−rate).
Tensor draw_channel_dropout(std::int64_t n, std::int64_t c, double rate, Rng& rng);

/// f ⊙ mask followed by channel dropout. `channel_keep` (N×C) may be empty for
/// no dropout; the mask and the multipliers are constants for backpropagation.
ag::Var apply_mask_dropout(const ag::Var& f, const Tensor& mask, const Tensor& channel_keep);
/// Draws the dropout multipliers from `rng`; inactive when `training` is false.
ag::Var apply_mask_dropout(const ag::Var& f, const ContentErrorMask& mask, double rate, bool training, Rng& rng);

struct Reconstruction {
  ag::Var attention;  // (N·H·W)×M, rows on the simplex
  ag::Var features;   // N×C×H×W
};

/// A = softmax(F Vᵀ / √C) row-wise, reconstruction = A V.
Reconstruction memory_reconstruct(const ag::Var& features, const ag::Var& bank);

/// Threshold (≥) and nearest-neighbor expand an h×w or N×1×h×w grid to the
/// target size. Target dimensions must be multiples of the grid dimensions.
Tensor binarize_resize_pcm(const Tensor& pcm, double threshold, int target_h, int target_w);

struct EncoderOutput {
  ag::Var recon_feature;  // stride 8, memory_dim channels
  ag::Var deepest;        // stride 32
};

struct TrainOutputs {
  ag::Var density_ori;  // N×1×H×W final (masked) density, full resolution
  ag::Var density_aug;
  ag::Var pcm_ori;      // N×1×(H/P)×(W/P) probabilities; undefined with PC off
  ag::Var pcm_aug;
  ag::Var attn_ori;     // undefined with AMB off
  ag::Var attn_aug;
  ContentErrorMask mask;
};

struct InferenceResult {
  DensityMap density;        // full resolution, cropped to the input size
  double count = 0.0;        // density sum / scale
  PatchClassMap pcm;         // probabilities over the padded image grid
  PatchClassMap pcm_binary;  // thresholded
};

/// Dual-stream counting network. Not copyable: parameters are shared nodes.
class MPCountModel {
 public:
  MPCountModel(ModelConfig config, std::uint64_t init_seed);
  MPCountModel(const MPCountModel&) = delete;
  MPCountModel& operator=(const MPCountModel&) = delete;
  MPCountModel(MPCountModel&&) = default;
  MPCountModel& operator=(MPCountModel&&) = default;

  const ModelConfig& config() const noexcept { return config_; }

  /// images: N×3×H×W with H, W multiples of 32.
  EncoderOutput encode(const ag::Var& images, bool training);
  EncoderOutput encode(const ag::Var& images) const;

  /// Per-pixel density at stride 8 (non-negative).
  ag::Var density_head(const ag::Var& features) const;
  /// Patch probabilities on the (H/P)×(W/P) grid.
  ag::Var pc_head(const ag::Var& deepest, bool training);
  ag::Var pc_head(const ag::Var& deepest) const;

  /// Paired forward pass. With `training` false, batch norm uses running
  /// statistics and dropout is off.
  TrainOutputs forward_train(const Tensor& ori, const Tensor& aug, Rng& rng, bool training = true);

  /// Single-stream prediction on an arbitrary-size image (reflect-padded internally).
  InferenceResult forward_infer(const Image& image, double density_scale) const;

  nn::ParameterSet parameters();
  const ag::Var& memory_bank() const noexcept { return bank_; }

 private:
  template <typename Self>
  static EncoderOutput encode_impl(Self& self, const ag::Var& images, bool training);
  template <typename Self>
  static ag::Var pc_head_impl(Self& self, const ag::Var& deepest, bool training);

  ModelConfig config_;
  std::vector<std::vector<nn::ConvBnRelu>> encoder_;
  nn::ConvBnRelu fuse16_;
  nn::ConvBnRelu fuse8_;
  ag::Var bank_;
  nn::Conv2d density_conv_;
  nn::ConvBnRelu pc_block_;
  nn::Conv2d pc_out_;
};

}  // namespace sdgcount
