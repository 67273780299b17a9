#include <gtest/gtest.h>

#include "sdgcount/errors.hpp"
#include "sdgcount/synthbench.hpp"
#include "test_support.hpp"

using namespace sdgcount;

TEST(Scene, ExactCountAndDeterminism) {
  SceneSpec spec;
  spec.min_count = spec.max_count = 5;
  Rng a(3), b(3);
  const Scene s = generate_scene(spec, a), t = generate_scene(spec, b);
  EXPECT_EQ(s.annotation.points.size(), 5u);
  EXPECT_EQ(s.image, t.image);
  EXPECT_EQ(s.annotation.points, t.annotation.points);
}

TEST(Scene, ZeroStrengthHazeIsIdentity) {
  SceneSpec plain;
  SceneSpec hazed = plain;
  hazed.transform = DomainTransform::haze;
  hazed.strength = 0.0;
  Rng a(4), b(4);
  EXPECT_EQ(generate_scene(plain, a).image, generate_scene(hazed, b).image);
}

TEST(Scene, CountMatchesDensityMass) {
  SceneSpec spec;
  spec.max_count = 40;
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const Scene s = generate_scene(spec, rng);
    const DensityMap d = generate_density_map(s.annotation, spec.height, spec.width, 4.0, true);
    EXPECT_NEAR(d.count(), static_cast<double>(s.annotation.points.size()), 1e-6);
  }
}

TEST(Scene, TexturesAndTransformsDiffer) {
  SceneSpec spec;
  for (int tex = 0; tex < 3; ++tex) {
    spec.texture = tex;
    Rng rng(6);
    const Image base = generate_scene(spec, rng).image;
    for (auto t : {DomainTransform::color_shift, DomainTransform::haze, DomainTransform::brightness_contrast}) {
      EXPECT_NE(apply_domain_transform(base, t, 0.5), base) << to_string(t);
      EXPECT_EQ(apply_domain_transform(base, t, 0.0), base);
    }
  }
}

TEST(Scene, InvalidSpec) {
  SceneSpec spec;
  spec.min_count = 10;
  spec.max_count = 5;
  spec.strength = 2;
  Rng rng(0);
  EXPECT_EQ(spec.validate().size(), 2u);
  EXPECT_THROW(generate_scene(spec, rng), ConfigError);
  EXPECT_THROW(parse_transform("fog"), ConfigError);
  EXPECT_EQ(parse_transform("brightness_contrast"), DomainTransform::brightness_contrast);
}

TEST(DomainPair, SizesCountsAndShift) {
  SceneSpec spec;
  spec.transform = DomainTransform::haze;
  spec.strength = 0.6;
  Rng rng(7);
  const DomainPair p = generate_domain_pair(spec, 8, 8, rng);
  ASSERT_EQ(p.source.size(), 8u);
  ASSERT_EQ(p.target.size(), 8u);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(p.source[i].annotation.points.size(), p.target[i].annotation.points.size());
    EXPECT_NE(p.source[i].image, p.target[i].image);
  }
  EXPECT_NE(p.source[0].annotation.points, p.target[0].annotation.points);  // independent layouts
}

TEST(DomainPair, WritesManifestReadableByLoader) {
  test::TempDir dir("synth");
  SceneSpec spec;
  Rng rng(8);
  const DomainPair p = generate_domain_pair(spec, 3, 2, rng);
  SampleManifest m;
  write_split(p.source, dir / "train", dir.path(), "train", m);
  write_split(p.target, dir / "test", dir.path(), "test", m);
  save_manifest(m, dir / "manifest.jsonl");
  const SampleManifest back = load_manifest(dir / "manifest.jsonl");
  EXPECT_EQ(back.with_split("train").size(), 3u);
  EXPECT_EQ(back.with_split("test").size(), 2u);
  const auto loaded = load_dataset(back, back.with_split("test"));
  EXPECT_EQ(loaded[1].annotation.points.size(), p.target[1].annotation.points.size());
}
