#include <gtest/gtest.h>

#include <fstream>

#include "sdgcount/errors.hpp"
#include "sdgcount/manifest.hpp"
#include "test_support.hpp"

using namespace sdgcount;

namespace {

SampleManifest write_fixture(const test::TempDir& dir, int n, bool with_labels) {
  SampleManifest m;
  m.root = dir.path();
  for (int i = 0; i < n; ++i) {
    const std::string id = "img" + std::to_string(i);
    save_png(Image(8, 8, 0.5f), dir / (id + ".png"));
    save_annotation(PointAnnotation{id, {{1, 1}}, 8, 8}, dir / (id + ".json"));
    std::optional<std::string> label;
    if (with_labels) label = i % 3 == 0 ? "snow" : "fog";
    m.records.push_back({id, id + ".png", id + ".json", "all", label});
  }
  save_manifest(m, dir / "manifest.jsonl");
  return m;
}

}  // namespace

TEST(Manifest, RoundTrip) {
  test::TempDir dir("manifest");
  write_fixture(dir, 4, true);
  const SampleManifest m = load_manifest(dir / "manifest.jsonl");
  ASSERT_EQ(m.records.size(), 4u);
  EXPECT_EQ(m.records[0].label, "snow");
  EXPECT_EQ(m.with_split("all").size(), 4u);
  const auto data = load_dataset(m, m.records);
  EXPECT_EQ(data[2].annotation.points.size(), 1u);
  EXPECT_EQ(data[2].image.width, 8);
}

TEST(Manifest, SplitArithmeticAndDeterminism) {
  test::TempDir dir("split");
  write_fixture(dir, 10, false);
  const SampleManifest m = load_manifest(dir / "manifest.jsonl");
  const auto [train, test] = build_splits(m, std::nullopt, 0.8, 7);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
  const auto [train2, test2] = build_splits(m, std::nullopt, 0.8, 7);
  for (std::size_t i = 0; i < train.size(); ++i) EXPECT_EQ(train[i].id, train2[i].id);
  EXPECT_THROW(build_splits(m, std::nullopt, 1.0, 7), ConfigError);
}

TEST(Manifest, LabelFilter) {
  test::TempDir dir("label");
  write_fixture(dir, 9, true);
  const SampleManifest m = load_manifest(dir / "manifest.jsonl");
  const auto [train, test] = build_splits(m, std::string("snow"), 0.5, 1);
  EXPECT_EQ(train.size() + test.size(), 3u);
  for (const auto& r : train) EXPECT_EQ(r.label, "snow");
  for (const auto& r : test) EXPECT_EQ(r.label, "snow");
}

TEST(Manifest, ProblemsAreItemized) {
  test::TempDir dir("bad");
  write_fixture(dir, 1, false);
  std::ofstream(dir / "bad.jsonl") << R"({"image": "img0.png", "annotation": "img0.json", "split": "train"})" << "\n"
                                   << R"({"image": "nope.png", "annotation": "img0.json", "split": "train"})" << "\n"
                                   << "garbage\n"
                                   << R"({"image": "img0.png"})" << "\n";
  try {
    load_manifest(dir / "bad.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_GE(e.items().size(), 4u);  // missing file, bad JSON, two missing fields
  }
}
