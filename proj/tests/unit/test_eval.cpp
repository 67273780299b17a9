#include <gtest/gtest.h>

#include <cmath>

#include "sdgcount/errors.hpp"
#include "sdgcount/eval.hpp"
#include "sdgcount/synthbench.hpp"
#include "test_support.hpp"

using namespace sdgcount;

namespace {

PatchClassMap grid(int r, int c, std::vector<double> v) { return {Tensor({r, c}, std::move(v)), 16}; }

/// Returns the ground-truth density for images it has seen; a stand-in for a perfect model.
class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(const std::vector<LabeledImage>& images) : images_(images) {}
  InferenceResult predict(const Image& image) const override {
    for (const auto& li : images_) {
      if (li.image == image) {
        InferenceResult r;
        r.density = generate_density_map(li.annotation, image.height, image.width, 4.0, true);
        r.count = r.density.count();
        const int ph = (image.height + 15) / 16 * 16, pw = (image.width + 15) / 16 * 16;
        r.pcm = generate_pcm_gt(pad_density(r.density, ph, pw), 16);
        r.pcm_binary = r.pcm;
        return r;
      }
    }
    throw Error("unknown image");
  }
  int patch_size() const override { return 16; }

 private:
  const std::vector<LabeledImage>& images_;
};

std::vector<LabeledImage> scenes(int n) {
  SceneSpec spec;
  Rng rng(5);
  std::vector<LabeledImage> out;
  for (int i = n - 1; i >= 0; --i) {
    Scene s = generate_scene(spec, rng);
    out.push_back({"img" + std::to_string(i), s.image, s.annotation});
  }
  return out;
}

}  // namespace

TEST(CountingMetrics, Examples) {
  const std::vector<double> a{10, 20};
  auto m = counting_metrics(a, a);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.mse, 0.0);
  m = counting_metrics(std::vector<double>{10}, std::vector<double>{13});
  EXPECT_EQ(m.mae, 3.0);
  EXPECT_EQ(m.mse, 3.0);
  m = counting_metrics(std::vector<double>{0, 10}, std::vector<double>{4, 10});
  EXPECT_DOUBLE_EQ(m.mae, 2.0);
  EXPECT_DOUBLE_EQ(m.mse, std::sqrt(8.0));
  EXPECT_THROW(counting_metrics(std::vector<double>{}, std::vector<double>{}), Error);
  EXPECT_THROW(counting_metrics(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST(CountingMetrics, RootMeanSquareDominatesMean) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> g, p;
    for (int i = 0; i < 1 + static_cast<int>(rng.uniform_int(20)); ++i) {
      g.push_back(rng.uniform(0, 100));
      p.push_back(rng.uniform(0, 100));
    }
    const auto m = counting_metrics(g, p);
    EXPECT_GE(m.mse + 1e-12, m.mae);
  }
}

TEST(PcmMetrics, IdentityAndTotalDisagreement) {
  const auto g = grid(2, 2, {1, 0, 0, 1});
  const auto same = pcm_metrics(g, g);
  EXPECT_EQ(same.macc, 1.0);
  EXPECT_EQ(same.miou, 1.0);
  EXPECT_EQ(same.mdice, 1.0);
  const auto inv = pcm_metrics(g, grid(2, 2, {0, 1, 1, 0}));
  EXPECT_EQ(inv.macc, 0.0);
  EXPECT_EQ(inv.miou, 0.0);
  EXPECT_EQ(inv.mdice, 0.0);
}

TEST(PcmMetrics, ConfusionOracle) {
  // Class 1: TP 1, union 2 → 1/2. Class 0: TP 2, union 3 → 2/3.
  const auto m = pcm_metrics(grid(2, 2, {1, 1, 0, 0}), grid(2, 2, {1, 0, 0, 0}));
  EXPECT_NEAR(m.miou, 7.0 / 12.0, 1e-12);
  EXPECT_NEAR(m.macc, (1.0 + 0.5) / 2, 1e-12);
  EXPECT_NEAR(m.mdice, (0.8 + 2.0 / 3.0) / 2, 1e-12);
}

TEST(PcmMetrics, AbsentClassAndRelabelSymmetry) {
  const auto zeros = grid(2, 2, {0, 0, 0, 0});
  EXPECT_EQ(pcm_metrics(zeros, zeros).miou, 1.0);
  const auto g = grid(2, 3, {1, 1, 0, 0, 1, 0}), p = grid(2, 3, {1, 0, 0, 1, 1, 0});
  const auto a = pcm_metrics(g, p);
  const auto b = pcm_metrics(grid(2, 3, {0, 0, 1, 1, 0, 1}), grid(2, 3, {0, 1, 1, 0, 0, 1}));
  EXPECT_DOUBLE_EQ(a.miou, b.miou);
  EXPECT_DOUBLE_EQ(a.macc, b.macc);
  EXPECT_DOUBLE_EQ(a.mdice, b.mdice);
  EXPECT_THROW(pcm_metrics(g, zeros), ShapeError);
}

TEST(Evaluate, OracleModelScoresPerfectly) {
  const auto images = scenes(3);
  const OraclePredictor oracle(images);
  const EvalReport r = evaluate(oracle, images, RunConfig{});
  EXPECT_NEAR(r.mae, 0.0, 1e-9);
  EXPECT_NEAR(r.pcm.miou, 1.0, 1e-12);
  ASSERT_EQ(r.per_image.size(), 3u);
  EXPECT_EQ(r.per_image[0].id, "img0");
  EXPECT_EQ(r.per_image[2].id, "img2");
  EXPECT_FALSE(r.pde.has_value());
}

TEST(Evaluate, DeterministicReportWithModel) {
  const auto images = scenes(2);
  RunConfig cfg = RunConfig::desk_scale();
  cfg.eval.pde_diagnostic = true;
  const MPCountModel m(cfg.model, 3);
  const ModelPredictor pred(m, cfg.train.density_scale);
  const EvalReport a = evaluate(pred, images, cfg, &m), b = evaluate(pred, images, cfg, &m);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.to_csv(), b.to_csv());
  ASSERT_TRUE(a.pde.has_value());
  EXPECT_GE(*a.pde, 0.0);
  EXPECT_LE(*a.pde, 100.0);
  const EvalReport one = evaluate(pred, {images[0]}, cfg);
  EXPECT_EQ(one.per_image.size(), 1u);
}

TEST(PdeDiagnostic, IdenticalPairAndZeroThreshold) {
  const MPCountModel m(RunConfig::desk_scale().model, 4);
  Rng rng(2);
  const Tensor x = test::random_tensor({1, 3, 32, 32}, rng), y = test::random_tensor({1, 3, 32, 32}, rng);
  EXPECT_EQ(pde_diagnostic(m, x, x, 0.5), 0.0);
  EXPECT_GT(pde_diagnostic(m, x, y, 0.0), 90.0);
}
