#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "sdgcount/config.hpp"
#include "sdgcount/errors.hpp"
#include "test_support.hpp"

using namespace sdgcount;

namespace {

std::string golden() {
  std::ifstream in(std::string(SDGCOUNT_GOLDEN_DIR) + "/default_config.json");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, DefaultsMatchGoldenBytes) {
  const std::string g = golden();
  ASSERT_FALSE(g.empty());
  EXPECT_EQ(serialize_config(RunConfig{}), g);
}

TEST(Config, DefaultValues) {
  const RunConfig c;
  EXPECT_EQ(c.model.memory_count, 1024);
  EXPECT_EQ(c.model.memory_dim, 256);
  EXPECT_EQ(c.model.alpha, 0.5);
  EXPECT_EQ(c.model.patch_size, 16);
  EXPECT_EQ(c.loss.lambda_cls, 10.0);
  EXPECT_EQ(c.loss.lambda_con, 10.0);
  EXPECT_EQ(c.augmentation.crop_size, 320);
  EXPECT_EQ(c.train.max_lr, 1e-3);
  EXPECT_EQ(c.train.max_epochs, 300);
  EXPECT_EQ(c.train.batch_size, 16);
  EXPECT_EQ(c.train.seed, 2023u);
  EXPECT_EQ(c.train.density_scale, 1000.0);
  EXPECT_TRUE(c.validate().empty());
}

TEST(Config, RoundTripPreservesEverything) {
  RunConfig c = RunConfig::desk_scale();
  c.model.switches.acl = false;
  c.train.seed = 77;
  c.data.sigma = 2.5;
  const RunConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(serialize_config(back), serialize_config(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_NE(config_hash(c), config_hash(RunConfig{}));
}

TEST(Config, PartialDocumentKeepsDefaults) {
  const RunConfig c = parse_config(R"({"train": {"seed": 5}, "model": {"backbone": {"decoder_width": 64}}})");
  EXPECT_EQ(c.train.seed, 5u);
  EXPECT_EQ(c.train.batch_size, 16);
  EXPECT_EQ(c.model.backbone.decoder_width, 64);
  EXPECT_EQ(c.model.backbone.widths, BackboneSpec::vgg16_bn().widths);
}

TEST(Config, EveryProblemIsReported) {
  try {
    parse_config(R"({"model": {"alpha": "big", "colour": 1, "backbone": {"depth": 3}},
                     "train": {"batch_size": 1.5, "seed": -1}, "extras": {}})");
    FAIL();
  } catch (const ConfigError& e) {
    const auto& items = e.items();
    ASSERT_EQ(items.size(), 6u);
    const std::string all = e.what();
    for (const char* key : {"model.alpha", "model.colour", "model.backbone.depth", "train.batch_size", "train.seed",
                            "extras"})
      EXPECT_NE(all.find(key), std::string::npos) << key;
  }
}

TEST(Config, RangeViolationsAreReported) {
  try {
    parse_config(R"({"model": {"patch_size": 12}, "train": {"batch_size": 0}, "augmentation": {"crop_size": 300}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_GE(e.items().size(), 3u);
  }
  EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
  EXPECT_THROW(parse_config("{oops"), ConfigError);
}

TEST(Config, FileRoundTrip) {
  test::TempDir dir("cfg");
  save_config(RunConfig::desk_scale(), dir / "c.json");
  EXPECT_EQ(config_hash(load_config(dir / "c.json")), config_hash(RunConfig::desk_scale()));
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}
