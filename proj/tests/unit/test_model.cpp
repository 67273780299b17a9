#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "sdgcount/errors.hpp"
#include "sdgcount/model.hpp"
#include "test_support.hpp"

using namespace sdgcount;
using sdgcount::test::random_tensor;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.backbone = BackboneSpec::tiny();
  c.memory_count = 8;
  c.memory_dim = 16;
  return c;
}

Image random_image(int h, int w, Rng& rng) {
  Image im(h, w);
  for (auto& v : im.pixels) v = static_cast<float>(rng.uniform());
  return im;
}

}  // namespace

TEST(Encoder, StrideArithmetic320) {
  ModelConfig c;
  c.backbone.convs = {1, 1, 1, 1, 1};  // full widths, fewer convs to keep the test quick
  MPCountModel m(c, 1);
  Rng rng(0);
  const EncoderOutput out = m.encode(ag::Var(random_tensor({1, 3, 320, 320}, rng)));
  EXPECT_EQ(out.recon_feature.shape(), (Shape{1, 256, 40, 40}));
  EXPECT_EQ(out.deepest.shape(), (Shape{1, 512, 10, 10}));
  EXPECT_EQ(m.pc_head(out.deepest).shape(), (Shape{1, 1, 20, 20}));
}

TEST(Encoder, StrideArithmetic64WithDefaultBackbone) {
  MPCountModel m(ModelConfig{}, 1);
  Rng rng(0);
  const EncoderOutput out = m.encode(ag::Var(random_tensor({1, 3, 64, 64}, rng)));
  EXPECT_EQ(out.recon_feature.shape(), (Shape{1, 256, 8, 8}));
  EXPECT_EQ(out.deepest.shape(), (Shape{1, 512, 2, 2}));
}

TEST(Encoder, RejectsIndivisibleInput) {
  MPCountModel m(tiny_config(), 1);
  EXPECT_THROW(m.encode(ag::Var(Tensor({1, 3, 100, 100}))), ShapeError);
}

TEST(InstanceNorm, ConstantChannelIsZero) {
  const FeatureMap out = instance_normalize({Tensor({1, 1, 2, 2}, 3.0), 8});
  for (double v : out.values.values()) EXPECT_EQ(v, 0.0);
}

TEST(InstanceNorm, NormalizedInputUnchanged) {
  const Tensor x({1, 1, 2, 2}, {1, -1, 1, -1});
  const FeatureMap out = instance_normalize({x, 8});
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(out.values[i], x[i], 1e-4);
}

TEST(InstanceNorm, AffineInvariance) {
  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 4, 4}, rng);
  Tensor y = x;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 16; ++i) y[(n * 3 + c) * 16 + i] = (1.5 + c) * x[(n * 3 + c) * 16 + i] - 2.0 * c;
  const FeatureMap a = instance_normalize({x, 8}), b = instance_normalize({y, 8});
  for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-4);
}

TEST(ContentErrorMask, IdenticalAndInfiniteThreshold) {
  Rng rng(4);
  const Tensor a = random_tensor({1, 4, 4, 4}, rng), b = random_tensor({1, 4, 4, 4}, rng);
  EXPECT_EQ(compute_cem({a, 8}, {a, 8}, 0.5).pde(), 0.0);
  EXPECT_EQ(compute_cem({a, 8}, {b, 8}, std::numeric_limits<double>::infinity()).pde(), 0.0);
  EXPECT_THROW(compute_cem({a, 8}, {Tensor({1, 4, 2, 2}), 8}, 0.5), ShapeError);
}

TEST(ContentErrorMask, HandBuiltDifferences) {
  // ori is already normalized; aug is chosen so IN(ori) − IN(aug) = {0.2, 0.6, d3, d4}
  // with d3 ≈ 0.110 and d4 ≈ −0.910 (aug must itself be zero-mean, unit-std).
  const double d3 = (1.2 - std::sqrt(1.44 - 0.48)) / 2, d4 = -0.8 - d3;
  const Tensor ori({1, 1, 2, 2}, {1, -1, 1, -1});
  const Tensor aug({1, 1, 2, 2}, {0.8, -1.6, 1 - d3, -1 - d4});
  const ContentErrorMask m = compute_cem({ori, 8}, {aug, 8}, 0.5);
  EXPECT_EQ(m.values[0], 1.0);
  EXPECT_EQ(m.values[1], 0.0);
  EXPECT_EQ(m.values[2], 1.0);
  EXPECT_EQ(m.values[3], 0.0);
  EXPECT_DOUBLE_EQ(m.pde(), 0.5);
}

TEST(ChannelDropout, RateZeroAndEvalAreMaskOnly) {
  Rng rng(5);
  const ag::Var f(random_tensor({2, 3, 2, 2}, rng));
  const ContentErrorMask mask{Tensor({2, 3, 2, 2}, 1.0), 0.5};
  Rng d(1);
  EXPECT_EQ(apply_mask_dropout(f, mask, 0.0, true, d).value(), f.value());
  EXPECT_EQ(apply_mask_dropout(f, mask, 0.9, false, d).value(), f.value());
}

TEST(ChannelDropout, SurvivalFractionAndScaling) {
  Rng rng(6);
  double kept = 0;
  const int trials = 1000, channels = 16;
  for (int t = 0; t < trials; ++t) {
    const Tensor k = draw_channel_dropout(1, channels, 0.5, rng);
    for (double v : k.values()) {
      ASSERT_TRUE(v == 0.0 || v == 2.0);
      kept += v > 0;
    }
  }
  EXPECT_NEAR(kept / (trials * channels), 0.5, 0.1);
}

TEST(MemoryReconstruct, SingleMemoryAndRepeatedVectors) {
  Rng rng(7);
  const ag::Var f(random_tensor({1, 3, 2, 2}, rng));
  const ag::Var one(Tensor({1, 3}, {0.5, -1.0, 2.0}));
  const Reconstruction r = memory_reconstruct(f, one);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.features.value()[c * 4 + i], one.value()[c], 1e-12);
  const ag::Var rep(Tensor({3, 3}, {1, 2, 3, 1, 2, 3, 1, 2, 3}));
  const Reconstruction r2 = memory_reconstruct(f, rep);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(r2.features.value()[c * 4], c + 1.0, 1e-12);
  EXPECT_THROW(memory_reconstruct(f, ag::Var(Tensor({2, 4}))), ShapeError);
}

TEST(MemoryReconstruct, MatchesDenseOracle) {
  // 2 positions, M = 3, C = 2.
  const Tensor feat({1, 2, 1, 2}, {0.3, -1.2, 0.8, 0.5});  // channel-major: pos0 = (0.3, 0.8), pos1 = (-1.2, 0.5)
  const Tensor bank({3, 2}, {1.0, 0.0, -0.5, 2.0, 0.25, -1.0});
  const Reconstruction r = memory_reconstruct(ag::Var(feat), ag::Var(bank));
  const double pos[2][2] = {{0.3, 0.8}, {-1.2, 0.5}};
  for (int p = 0; p < 2; ++p) {
    double logits[3], z = 0.0;
    for (int m = 0; m < 3; ++m) {
      logits[m] = (pos[p][0] * bank.at(m, 0) + pos[p][1] * bank.at(m, 1)) / std::sqrt(2.0);
      z += std::exp(logits[m]);
    }
    for (int c = 0; c < 2; ++c) {
      double v = 0.0;
      for (int m = 0; m < 3; ++m) {
        const double a = std::exp(logits[m]) / z;
        EXPECT_NEAR(r.attention.value().at(p, m), a, 1e-12);
        v += a * bank.at(m, c);
      }
      EXPECT_NEAR(r.features.value().at(0, c, 0, p), v, 1e-12);
    }
  }
}

TEST(BinarizeResize, ThresholdAndNearestExpansion) {
  const Tensor ones = binarize_resize_pcm(Tensor({2, 2}, 0.9), 0.5, 4, 4);
  EXPECT_EQ(ones.sum(), 16.0);
  EXPECT_EQ(binarize_resize_pcm(Tensor({2, 2}, 0.5), 0.5, 4, 4).sum(), 16.0);
  const Tensor m = binarize_resize_pcm(Tensor({2, 2}, {1, 0, 0, 1}), 0.5, 4, 4);
  const double expect[16] = {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1};
  for (int i = 0; i < 16; ++i) EXPECT_EQ(m[i], expect[i]);
  EXPECT_THROW(binarize_resize_pcm(Tensor({2, 2}), 0.5, 5, 4), ShapeError);
}

TEST(DensityHead, NonNegativeAndZeroWeights) {
  MPCountModel m(tiny_config(), 2);
  Rng rng(8);
  const ag::Var f(random_tensor({1, 16, 4, 4}, rng, -3, 3));
  const ag::Var d = m.density_head(f);
  for (double v : d.value().values()) EXPECT_GE(v, 0.0);
  for (auto& [name, p] : m.parameters().params)
    if (name.rfind("density_head", 0) == 0) p.value_mut().fill(0.0);
  EXPECT_EQ(m.density_head(f).value().sum(), 0.0);
}

TEST(PcHead, ZeroOutputLayerGivesHalf) {
  MPCountModel m(tiny_config(), 3);
  for (auto& [name, p] : m.parameters().params)
    if (name.rfind("pc_head.out", 0) == 0) p.value_mut().fill(0.0);
  Rng rng(9);
  const Tensor probs = m.pc_head(ag::Var(random_tensor({1, 64, 2, 2}, rng))).value();
  EXPECT_EQ(probs.shape(), (Shape{1, 1, 4, 4}));
  for (double v : probs.values()) EXPECT_EQ(v, 0.5);
}

TEST(ForwardInfer, PaddingIsCroppedBack) {
  MPCountModel m(tiny_config(), 4);
  Rng rng(10);
  const InferenceResult r = m.forward_infer(random_image(317, 483, rng), 1000.0);
  EXPECT_EQ(r.density.height(), 317);
  EXPECT_EQ(r.density.width(), 483);
  EXPECT_EQ(r.pcm.rows(), 320 / 16);
  EXPECT_EQ(r.pcm.cols(), 512 / 16);  // padded to a multiple of 32
  EXPECT_NEAR(r.count, r.density.values.sum() / 1000.0, 1e-9 * (1 + r.count));
}

TEST(ForwardInfer, DeterministicAndZeroPcmMasksAll) {
  MPCountModel m(tiny_config(), 5);
  Rng rng(11);
  const Image im = random_image(64, 64, rng);
  const InferenceResult a = m.forward_infer(im, 1000.0), b = m.forward_infer(im, 1000.0);
  EXPECT_EQ(a.density.values, b.density.values);
  for (auto& [name, p] : m.parameters().params) {
    if (name == "pc_head.out.weight") p.value_mut().fill(0.0);
    if (name == "pc_head.out.bias") p.value_mut().fill(-50.0);
  }
  EXPECT_EQ(m.forward_infer(im, 1000.0).count, 0.0);
}

TEST(ForwardTrain, ShapesAndSharedMask) {
  MPCountModel m(tiny_config(), 6);
  Rng rng(12);
  const Tensor ori = random_tensor({2, 3, 64, 64}, rng), aug = random_tensor({2, 3, 64, 64}, rng);
  Rng d(1);
  const TrainOutputs out = m.forward_train(ori, aug, d);
  EXPECT_EQ(out.density_ori.shape(), (Shape{2, 1, 64, 64}));
  EXPECT_EQ(out.pcm_ori.shape(), (Shape{2, 1, 4, 4}));
  EXPECT_EQ(out.attn_ori.shape(), (Shape{2 * 8 * 8, 8}));
  EXPECT_EQ(out.mask.values.shape(), (Shape{2, 16, 8, 8}));
  EXPECT_GT(out.mask.pde(), 0.0);
  EXPECT_THROW(m.forward_train(ori, random_tensor({2, 3, 32, 64}, rng), d), ShapeError);
}

TEST(ForwardTrain, IdenticalInputsGiveEqualAttention) {
  ModelConfig c = tiny_config();
  c.dropout_rate = 0.0;
  MPCountModel m(c, 7);
  Rng rng(13);
  const Tensor x = random_tensor({1, 3, 32, 32}, rng);
  Rng d(1);
  const TrainOutputs out = m.forward_train(x, x, d);
  EXPECT_EQ(out.attn_ori.value(), out.attn_aug.value());
  EXPECT_EQ(out.mask.pde(), 0.0);
}

TEST(ForwardTrain, SwitchesBypassStages) {
  ModelConfig c = tiny_config();
  c.switches = AblationSwitches::all_off();
  MPCountModel m(c, 8);
  Rng rng(14);
  const Tensor ori = random_tensor({1, 3, 32, 32}, rng), aug = random_tensor({1, 3, 32, 32}, rng);
  Rng d(1);
  const TrainOutputs out = m.forward_train(ori, aug, d);
  EXPECT_FALSE(out.attn_ori.defined());
  EXPECT_FALSE(out.pcm_ori.defined());
  EXPECT_EQ(out.mask.pde(), 0.0);

  // pc off: the final density equals the unmasked head output.
  c.switches = AblationSwitches{};
  c.switches.pc = false;
  c.dropout_rate = 0.0;
  MPCountModel m2(c, 9);
  Rng d2(1);
  const TrainOutputs o2 = m2.forward_train(ori, aug, d2, false);
  const EncoderOutput enc = m2.encode(ag::Var(ori));
  const ContentErrorMask mask = compute_cem({enc.recon_feature.value(), 8},
                                            {m2.encode(ag::Var(aug)).recon_feature.value(), 8}, c.alpha);
  const ag::Var masked = apply_mask_dropout(enc.recon_feature, mask.values, Tensor());
  const ag::Var dhat = ag::upsample_bilinear(m2.density_head(memory_reconstruct(masked, m2.memory_bank()).features), 8);
  for (std::int64_t i = 0; i < dhat.value().numel(); ++i) EXPECT_NEAR(o2.density_ori.value()[i], dhat.value()[i], 1e-10);
}

TEST(ModelConfig, DefaultsAndValidation) {
  const ModelConfig c;
  EXPECT_EQ(c.memory_count, 1024);
  EXPECT_EQ(c.memory_dim, 256);
  EXPECT_EQ(c.alpha, 0.5);
  EXPECT_EQ(c.patch_size, 16);
  EXPECT_EQ(c.pcm_threshold, 0.5);
  EXPECT_EQ(c.input_multiple(), 32);
  ModelConfig bad;
  bad.patch_size = 12;
  bad.memory_count = 0;
  EXPECT_EQ(bad.validate().size(), 2u);
  EXPECT_THROW(MPCountModel(bad, 0), ConfigError);
}
