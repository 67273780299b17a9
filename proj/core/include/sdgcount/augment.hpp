#pragma once

#include <string>
#include <vector>

#include "sdgcount/data.hpp"
#include "sdgcount/image.hpp"
#include "sdgcount/rng.hpp"

namespace sdgcount {

struct AugmentationConfig {
  double jitter_prob = 0.8;
  double brightness = 0.5;
  double contrast = 0.2;
  double saturation = 0.2;
  double hue = 0.1;
  double blur_prob = 0.5;
  int blur_kernel = 3;
  double blur_sigma = 1.0;
  double sharpen_prob = 0.5;
  double sharpen_factor = 5.0;
  int crop_size = 320;
  double hflip_prob = 0.5;

  /// One message per violated constraint; empty when valid.
  std::vector<std::string> validate(int patch_size, int encoder_stride) const;
};

/// Image plus the labels that travel with it.
struct LabeledSample {
  Image image;
  DensityMap density;
  PatchClassMap pcm;
};

struct AugmentedPair {
  LabeledSample ori;
  LabeledSample aug;
};

/// Random crop and horizontal flip shared by both streams and labels, then
/// photometric transforms applied to the augmented stream only. The PCM is
/// derived from the cropped density so it always matches the crop.
AugmentedPair augment_pair(const Image& image, const DensityMap& density, int patch_size,
                           const AugmentationConfig& cfg, Rng& rng);

/// Color jitter, blur, sharpen with the configured probabilities.
Image photometric_augment(const Image& image, const AugmentationConfig& cfg, Rng& rng);

Image adjust_brightness(const Image& image, double factor);
Image adjust_contrast(const Image& image, double factor);
Image adjust_saturation(const Image& image, double factor);
/// `shift` in [-0.5, 0.5] turns of the hue circle.
Image adjust_hue(const Image& image, double shift);
Image gaussian_blur(const Image& image, int kernel, double sigma);
Image adjust_sharpness(const Image& image, double factor);

DensityMap crop_density(const DensityMap& density, int y, int x, int h, int w);
DensityMap hflip_density(const DensityMap& density);

}  // namespace sdgcount
