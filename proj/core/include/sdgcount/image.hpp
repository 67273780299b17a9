#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "sdgcount/tensor.hpp"

namespace sdgcount {

/// RGB image, interleaved H×W×3 floats in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

  float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

Image load_png(const std::filesystem::path& path);
/// 8-bit RGB PNG; values are clamped to [0,1] and rounded.
void save_png(const Image& image, const std::filesystem::path& path);
/// (height, width) read from the PNG header.
std::pair<int, int> png_dimensions(const std::filesystem::path& path);

Image crop(const Image& image, int y, int x, int h, int w);
Image hflip(const Image& image);
/// Pads bottom/right edges by mirror reflection (edge pixel not repeated).
Image reflect_pad(const Image& image, int height, int width);

/// Stacks images into an N×3×H×W tensor normalized with ImageNet channel statistics.
Tensor images_to_tensor(std::span<const Image> images);
Tensor image_to_tensor(const Image& image);

}  // namespace sdgcount
