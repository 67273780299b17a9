#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sdgcount/manifest.hpp"
#include "sdgcount/rng.hpp"

namespace sdgcount {

enum class DomainTransform { identity, color_shift, haze, brightness_contrast };

std::string to_string(DomainTransform t);
/// Throws ConfigError on an unknown name.
DomainTransform parse_transform(const std::string& name);

/// Procedural crowd-like scene: dark disc/ellipse "heads" on a textured background.
struct SceneSpec {
  int height = 64;
  int width = 64;
  int min_count = 5;
  int max_count = 30;
  double min_radius = 1.5;
  double max_radius = 3.0;
  int texture = 0;  // 0 smooth waves, 1 stripes, 2 blocks
  DomainTransform transform = DomainTransform::identity;
  double strength = 0.0;  // in [0,1]

  std::vector<std::string> validate() const;
};

struct Scene {
  Image image;
  PointAnnotation annotation;  // exact blob centers
};

/// Draws a count uniformly from [min_count, max_count], then renders.
Scene generate_scene(const SceneSpec& spec, Rng& rng);
/// Renders exactly `count` heads.
Scene render_scene(const SceneSpec& spec, int count, Rng& rng);

/// Photometric shift of strength s in [0,1]; s = 0 returns the input unchanged.
Image apply_domain_transform(const Image& image, DomainTransform transform, double strength);

struct DomainPair {
  std::vector<LabeledImage> source;  // identity transform
  std::vector<LabeledImage> target;  // spec.transform at spec.strength
};

/// Both splits draw their counts from the same seeded sequence, so count
/// statistics match; scene layouts come from split-specific streams.
DomainPair generate_domain_pair(const SceneSpec& spec, int n_train, int n_test_shifted, Rng& rng);

/// Writes `<dir>/<id>.png`, `<dir>/<id>.json` for every image and appends
/// manifest records (paths relative to `manifest_dir`) with the given split.
void write_split(const std::vector<LabeledImage>& images, const std::filesystem::path& dir,
                 const std::filesystem::path& manifest_dir, const std::string& split, SampleManifest& manifest);

}  // namespace sdgcount
