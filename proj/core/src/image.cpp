#include "sdgcount/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "sdgcount/errors.hpp"

namespace sdgcount {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

constexpr float kMean[3] = {0.485f, 0.456f, 0.406f};
constexpr float kStd[3] = {0.229f, 0.224f, 0.225f};

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Image load_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_stdio(&img, file.get())) {
    throw DataError("not a readable PNG: " + path.string() + " (" + img.message + ")");
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("corrupt PNG: " + path.string() + " (" + img.message + ")");
  }
  Image out(static_cast<int>(img.height), static_cast<int>(img.width));
  for (std::size_t i = 0; i < buffer.size(); ++i) out.pixels[i] = static_cast<float>(buffer[i]) / 255.0f;
  return out;
}

void save_png(const Image& image, const std::filesystem::path& path) {
  if (image.height <= 0 || image.width <= 0) throw ShapeError("save_png: empty image");
  std::vector<png_byte> buffer(image.pixels.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const float v = std::clamp(image.pixels[i], 0.0f, 1.0f);
    buffer[i] = static_cast<png_byte>(std::lround(v * 255.0f));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  auto file = open_file(path, "wb");
  if (!png_image_write_to_stdio(&img, file.get(), 0, buffer.data(), 0, nullptr)) {
    throw Error("failed to write PNG " + path.string() + ": " + img.message);
  }
}

std::pair<int, int> png_dimensions(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_stdio(&img, file.get())) {
    throw DataError("not a readable PNG: " + path.string());
  }
  const std::pair<int, int> dims{static_cast<int>(img.height), static_cast<int>(img.width)};
  png_image_free(&img);
  return dims;
}

Image crop(const Image& image, int y, int x, int h, int w) {
  if (y < 0 || x < 0 || h < 0 || w < 0 || y + h > image.height || x + w > image.width) {
    throw ShapeError("crop window outside image");
  }
  Image out(h, w);
  for (int r = 0; r < h; ++r) {
    const float* src = &image.pixels[(static_cast<std::size_t>(y + r) * image.width + x) * 3];
    std::copy_n(src, static_cast<std::size_t>(w) * 3, &out.pixels[static_cast<std::size_t>(r) * w * 3]);
  }
  return out;
}

Image hflip(const Image& image) {
  Image out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
  return out;
}

Image reflect_pad(const Image& image, int height, int width) {
  if (height < image.height || width < image.width) throw ShapeError("reflect_pad: target smaller than image");
  Image out(height, width);
  for (int y = 0; y < height; ++y) {
    const int sy = reflect_index(y, image.height);
    for (int x = 0; x < width; ++x) {
      const int sx = reflect_index(x, image.width);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("images_to_tensor: no images");
  const int h = images.front().height, w = images.front().width;
  const auto n = static_cast<std::int64_t>(images.size());
  Tensor out({n, 3, h, w});
  for (std::int64_t i = 0; i < n; ++i) {
    const Image& im = images[static_cast<std::size_t>(i)];
    if (im.height != h || im.width != w) throw ShapeError("images_to_tensor: images differ in size");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(i, c, y, x) = (im.at(y, x, c) - kMean[c]) / kStd[c];
  }
  return out;
}

Tensor image_to_tensor(const Image& image) { return images_to_tensor(std::span<const Image>(&image, 1)); }

}  // namespace sdgcount
