#include "sdgcount/model.hpp"

#include <cmath>
#include <numeric>

#include "sdgcount/errors.hpp"

namespace sdgcount {

BackboneSpec BackboneSpec::vgg16_bn() { return BackboneSpec{}; }

BackboneSpec BackboneSpec::tiny() {
  BackboneSpec s;
  s.name = "tiny";
  s.widths = {16, 16, 32, 64, 64};
  s.convs = {1, 1, 1, 1, 1};
  s.decoder_width = 32;
  s.pc_hidden = 32;
  return s;
}

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> errs;
  if (memory_count < 1) errs.push_back("model.memory_count must be >= 1");
  if (memory_dim < 1) errs.push_back("model.memory_dim must be >= 1");
  if (!(alpha >= 0)) errs.push_back("model.alpha must be >= 0");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) errs.push_back("model.dropout_rate must be in [0,1)");
  if (patch_size < kReconStride || patch_size > kDeepestStride || kDeepestStride % patch_size != 0 ||
      patch_size % kReconStride != 0) {
    errs.push_back("model.patch_size must be 8, 16 or 32");
  }
  if (!(pcm_threshold >= 0 && pcm_threshold <= 1)) errs.push_back("model.pcm_threshold must be in [0,1]");
  if (backbone.widths.size() != 5 || backbone.convs.size() != 5) {
    errs.push_back("model.backbone must describe exactly 5 encoder levels");
  } else {
    for (std::size_t i = 0; i < 5; ++i) {
      if (backbone.widths[i] < 1 || backbone.convs[i] < 1)
        errs.push_back("model.backbone level " + std::to_string(i) + " needs positive width and conv count");
    }
  }
  if (backbone.decoder_width < 1) errs.push_back("model.backbone.decoder_width must be >= 1");
  if (backbone.pc_hidden < 1) errs.push_back("model.backbone.pc_hidden must be >= 1");
  return errs;
}

int ModelConfig::input_multiple() const { return std::lcm(kDeepestStride, patch_size); }

FeatureMap instance_normalize(const FeatureMap& features) {
  const Tensor& v = features.values;
  require_rank(v, 4, "instance_normalize");
  const std::int64_t planes = v.dim(0) * v.dim(1), hw = v.dim(2) * v.dim(3);
  if (hw < 2) throw ShapeError("instance_normalize: needs at least 2 spatial positions");
  FeatureMap out{Tensor(v.shape()), features.stride};
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* src = v.data() + p * hw;
    double* dst = out.values.data() + p * hw;
    double mean = 0.0;
    for (std::int64_t i = 0; i < hw; ++i) mean += src[i];
    mean /= static_cast<double>(hw);
    double var = 0.0;
    for (std::int64_t i = 0; i < hw; ++i) var += (src[i] - mean) * (src[i] - mean);
    const double denom = std::sqrt(var / static_cast<double>(hw)) + kInstanceNormEps;
    for (std::int64_t i = 0; i < hw; ++i) dst[i] = (src[i] - mean) / denom;
  }
  return out;
}

ContentErrorMask compute_cem(const FeatureMap& ori, const FeatureMap& aug, double alpha) {
  require_same_shape(ori.values, aug.values, "compute_cem");
  const FeatureMap a = instance_normalize(ori);
  const FeatureMap b = instance_normalize(aug);
  ContentErrorMask mask{Tensor(ori.values.shape()), alpha};
  for (std::int64_t i = 0; i < mask.values.numel(); ++i) {
    mask.values[i] = std::abs(a.values[i] - b.values[i]) <= alpha ? 1.0 : 0.0;
  }
  return mask;
}

Tensor draw_channel_dropout(std::int64_t n, std::int64_t c, double rate, Rng& rng) {
  if (!(rate >= 0 && rate < 1)) throw ConfigError("dropout rate must be in [0,1)");
  Tensor keep({n, c}, 1.0);
  if (rate == 0) return keep;
  const double survivor = 1.0 / (1.0 - rate);
  for (auto& v : keep.values()) v = rng.bernoulli(rate) ? 0.0 : survivor;
  return keep;
}

ag::Var apply_mask_dropout(const ag::Var& f, const Tensor& mask, const Tensor& channel_keep) {
  const Tensor& v = f.value();
  require_rank(v, 4, "apply_mask_dropout");
  Tensor mult = mask.empty() ? Tensor(v.shape(), 1.0) : mask;
  require_same_shape(v, mult, "apply_mask_dropout");
  if (!channel_keep.empty()) {
    const std::int64_t n = v.dim(0), c = v.dim(1), hw = v.dim(2) * v.dim(3);
    if (channel_keep.numel() != n * c) throw ShapeError("apply_mask_dropout: channel multipliers must be N×C");
    for (std::int64_t p = 0; p < n * c; ++p)
      for (std::int64_t i = 0; i < hw; ++i) mult[p * hw + i] *= channel_keep[p];
  }
  return ag::mul_const(f, mult);
}

ag::Var apply_mask_dropout(const ag::Var& f, const ContentErrorMask& mask, double rate, bool training, Rng& rng) {
  Tensor keep;
  if (training && rate > 0) keep = draw_channel_dropout(f.value().dim(0), f.value().dim(1), rate, rng);
  return apply_mask_dropout(f, mask.values, keep);
}

Reconstruction memory_reconstruct(const ag::Var& features, const ag::Var& bank) {
  const Tensor& f = features.value();
  require_rank(f, 4, "memory_reconstruct");
  require_rank(bank.value(), 2, "memory_reconstruct bank");
  const std::int64_t c = f.dim(1);
  if (bank.value().dim(1) != c) {
    throw ShapeError("memory_reconstruct: feature channels " + std::to_string(c) + " differ from memory dim " +
                     std::to_string(bank.value().dim(1)));
  }
  const ag::Var rows = ag::to_rows(features);
  const ag::Var logits = ag::scale(ag::matmul_nt(rows, bank), 1.0 / std::sqrt(static_cast<double>(c)));
  ag::Var attention = ag::softmax_rows(logits);
  ag::Var recon = ag::from_rows(ag::matmul(attention, bank), f.dim(0), f.dim(2), f.dim(3));
  return {std::move(attention), std::move(recon)};
}

Tensor binarize_resize_pcm(const Tensor& pcm, double threshold, int target_h, int target_w) {
  Tensor grid = pcm;
  if (grid.rank() == 2) grid = grid.reshaped({1, 1, grid.dim(0), grid.dim(1)});
  require_rank(grid, 4, "binarize_resize_pcm");
  const std::int64_t n = grid.dim(0), c = grid.dim(1), h = grid.dim(2), w = grid.dim(3);
  if (target_h % h != 0 || target_w % w != 0) {
    throw ShapeError("binarize_resize_pcm: target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                     " is not a multiple of grid " + std::to_string(h) + "x" + std::to_string(w));
  }
  const std::int64_t fy = target_h / h, fx = target_w / w;
  Tensor out({n, c, target_h, target_w});
  for (std::int64_t p = 0; p < n * c; ++p)
    for (std::int64_t y = 0; y < target_h; ++y)
      for (std::int64_t x = 0; x < target_w; ++x)
        out[(p * target_h + y) * target_w + x] = grid[(p * h + y / fy) * w + x / fx] >= threshold ? 1.0 : 0.0;
  if (pcm.rank() == 2) return out.reshaped({target_h, target_w});
  return out;
}

MPCountModel::MPCountModel(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  if (auto errs = config_.validate(); !errs.empty()) throw ConfigError("invalid model configuration", errs);
  Rng rng(init_seed);
  const auto& bb = config_.backbone;
  int in_ch = 3;
  for (std::size_t level = 0; level < 5; ++level) {
    std::vector<nn::ConvBnRelu> blocks;
    for (int j = 0; j < bb.convs[level]; ++j) {
      blocks.emplace_back(in_ch, bb.widths[level], 3, rng);
      in_ch = bb.widths[level];
    }
    encoder_.push_back(std::move(blocks));
  }
  fuse16_ = nn::ConvBnRelu(bb.widths[4] + bb.widths[4], bb.decoder_width, 3, rng);
  fuse8_ = nn::ConvBnRelu(bb.decoder_width + bb.widths[3], config_.memory_dim, 3, rng);

  Tensor bank({config_.memory_count, config_.memory_dim});
  for (auto& v : bank.values()) v = rng.normal();
  bank_ = ag::Var(std::move(bank), true);

  density_conv_ = nn::Conv2d(config_.memory_dim, 1, 1, true, rng);
  pc_block_ = nn::ConvBnRelu(bb.widths[4], bb.pc_hidden, 3, rng);
  pc_out_ = nn::Conv2d(bb.pc_hidden, 1, 1, true, rng);
}

template <typename Self>
EncoderOutput MPCountModel::encode_impl(Self& self, const ag::Var& images, bool training) {
  const Tensor& x0 = images.value();
  require_rank(x0, 4, "encode");
  if (x0.dim(2) % kDeepestStride != 0 || x0.dim(3) % kDeepestStride != 0) {
    throw ShapeError("encode: input " + std::to_string(x0.dim(2)) + "x" + std::to_string(x0.dim(3)) +
                     " is not divisible by 32; reflect-pad first");
  }
  ag::Var x = images;
  std::vector<ag::Var> skips;
  for (auto& level : self.encoder_) {
    for (auto& block : level) x = nn::run(block, x, training);
    skips.push_back(x);
    x = ag::max_pool2(x);
  }
  ag::Var deepest = x;
  ag::Var y = ag::upsample_bilinear(deepest, 2);
  y = nn::run(self.fuse16_, ag::concat_channels(y, skips[4]), training);
  y = ag::upsample_bilinear(y, 2);
  y = nn::run(self.fuse8_, ag::concat_channels(y, skips[3]), training);
  return {std::move(y), std::move(deepest)};
}

EncoderOutput MPCountModel::encode(const ag::Var& images, bool training) {
  return encode_impl(*this, images, training);
}

EncoderOutput MPCountModel::encode(const ag::Var& images) const { return encode_impl(*this, images, false); }

ag::Var MPCountModel::density_head(const ag::Var& features) const { return ag::relu(density_conv_(features)); }

template <typename Self>
ag::Var MPCountModel::pc_head_impl(Self& self, const ag::Var& deepest, bool training) {
  ag::Var h = nn::run(self.pc_block_, deepest, training);
  ag::Var p = ag::sigmoid(self.pc_out_(h));
  return ag::upsample_nearest(p, kDeepestStride / self.config_.patch_size);
}

ag::Var MPCountModel::pc_head(const ag::Var& deepest, bool training) {
  return pc_head_impl(*this, deepest, training);
}

ag::Var MPCountModel::pc_head(const ag::Var& deepest) const { return pc_head_impl(*this, deepest, false); }

TrainOutputs MPCountModel::forward_train(const Tensor& ori, const Tensor& aug, Rng& rng, bool training) {
  require_same_shape(ori, aug, "forward_train");
  require_rank(ori, 4, "forward_train");
  const std::int64_t n = ori.dim(0);
  const int height = static_cast<int>(ori.dim(2)), width = static_cast<int>(ori.dim(3));
  if (height % config_.input_multiple() || width % config_.input_multiple()) {
    throw ShapeError("forward_train: crop must be a multiple of " + std::to_string(config_.input_multiple()));
  }
  const auto& sw = config_.switches;

  const EncoderOutput enc = encode(ag::Var(concat_rows(ori, aug)), training);
  ag::Var f_ori = ag::slice_batch(enc.recon_feature, 0, n);
  ag::Var f_aug = ag::slice_batch(enc.recon_feature, n, n);

  TrainOutputs out;
  if (sw.cem) {
    out.mask = compute_cem({f_ori.value(), kReconStride}, {f_aug.value(), kReconStride}, config_.alpha);
    Tensor keep;
    if (training && config_.dropout_rate > 0) {
      keep = draw_channel_dropout(n, f_ori.value().dim(1), config_.dropout_rate, rng);
    }
    f_ori = apply_mask_dropout(f_ori, out.mask.values, keep);
    f_aug = apply_mask_dropout(f_aug, out.mask.values, keep);
  } else {
    out.mask = ContentErrorMask{Tensor(f_ori.value().shape(), 1.0), config_.alpha};
  }

  if (sw.amb) {
    Reconstruction r_ori = memory_reconstruct(f_ori, bank_);
    Reconstruction r_aug = memory_reconstruct(f_aug, bank_);
    out.attn_ori = r_ori.attention;
    out.attn_aug = r_aug.attention;
    f_ori = r_ori.features;
    f_aug = r_aug.features;
  }

  ag::Var d_ori = density_head(f_ori);
  ag::Var d_aug = density_head(f_aug);

  if (sw.pc) {
    const ag::Var c = pc_head(enc.deepest, training);
    out.pcm_ori = ag::slice_batch(c, 0, n);
    out.pcm_aug = ag::slice_batch(c, n, n);
    const int gh = height / kReconStride, gw = width / kReconStride;
    d_ori = ag::mul_const(d_ori, binarize_resize_pcm(out.pcm_ori.value(), config_.pcm_threshold, gh, gw));
    d_aug = ag::mul_const(d_aug, binarize_resize_pcm(out.pcm_aug.value(), config_.pcm_threshold, gh, gw));
  }

  out.density_ori = ag::upsample_bilinear(d_ori, kReconStride);
  out.density_aug = ag::upsample_bilinear(d_aug, kReconStride);
  return out;
}

InferenceResult MPCountModel::forward_infer(const Image& image, double density_scale) const {
  if (!(density_scale > 0)) throw ConfigError("forward_infer: density scale must be > 0");
  ag::NoGradGuard no_grad;
  const int m = config_.input_multiple();
  const int ph = (image.height + m - 1) / m * m;
  const int pw = (image.width + m - 1) / m * m;
  const Image padded = (ph == image.height && pw == image.width) ? image : reflect_pad(image, ph, pw);

  const EncoderOutput enc = encode(ag::Var(image_to_tensor(padded)));
  ag::Var f = enc.recon_feature;
  if (config_.switches.amb) f = memory_reconstruct(f, bank_).features;
  ag::Var d = density_head(f);

  InferenceResult result;
  const int gh = ph / kReconStride, gw = pw / kReconStride;
  if (config_.switches.pc) {
    const Tensor probs = pc_head(enc.deepest).value();
    const Tensor grid = probs.reshaped({probs.dim(2), probs.dim(3)});
    result.pcm = PatchClassMap{grid, config_.patch_size};
    result.pcm_binary = PatchClassMap{binarize_resize_pcm(grid, config_.pcm_threshold, static_cast<int>(grid.dim(0)),
                                                          static_cast<int>(grid.dim(1))),
                                      config_.patch_size};
    d = ag::mul_const(d, binarize_resize_pcm(probs, config_.pcm_threshold, gh, gw));
  } else {
    const int rows = ph / config_.patch_size, cols = pw / config_.patch_size;
    result.pcm = PatchClassMap{Tensor({rows, cols}, 1.0), config_.patch_size};
    result.pcm_binary = result.pcm;
  }

  const Tensor full = ag::upsample_bilinear(d, kReconStride).value();
  DensityMap density{Tensor({image.height, image.width}), density_scale};
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) density.values.at(y, x) = full.at(0, 0, y, x);
  result.count = density.count();
  result.density = std::move(density);
  return result;
}

nn::ParameterSet MPCountModel::parameters() {
  nn::ParameterSet set;
  for (std::size_t level = 0; level < encoder_.size(); ++level)
    for (std::size_t j = 0; j < encoder_[level].size(); ++j)
      encoder_[level][j].collect("encoder.level" + std::to_string(level) + "." + std::to_string(j), set);
  fuse16_.collect("decoder.fuse16", set);
  fuse8_.collect("decoder.fuse8", set);
  set.add("memory_bank", bank_);
  density_conv_.collect("density_head", set);
  pc_block_.collect("pc_head.block", set);
  pc_out_.collect("pc_head.out", set);
  return set;
}

}  // namespace sdgcount
