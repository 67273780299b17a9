#include "sdgcount/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "sdgcount/errors.hpp"

namespace sdgcount {

namespace {

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

double gray(const Image& im, int y, int x) {
  return 0.2989 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) + 0.114 * im.at(y, x, 2);
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

std::vector<std::string> AugmentationConfig::validate(int patch_size, int encoder_stride) const {
  std::vector<std::string> errs;
  auto prob = [&errs](const char* key, double p) {
    if (!in_unit(p)) errs.push_back(std::string("augmentation.") + key + " must be in [0,1]");
  };
  prob("jitter_prob", jitter_prob);
  prob("blur_prob", blur_prob);
  prob("sharpen_prob", sharpen_prob);
  prob("hflip_prob", hflip_prob);
  if (brightness < 0 || contrast < 0 || saturation < 0) errs.push_back("augmentation: jitter strengths must be >= 0");
  if (hue < 0 || hue > 0.5) errs.push_back("augmentation.hue must be in [0,0.5]");
  if (blur_kernel < 1 || blur_kernel % 2 == 0) errs.push_back("augmentation.blur_kernel must be a positive odd integer");
  if (!(blur_sigma > 0)) errs.push_back("augmentation.blur_sigma must be > 0");
  if (sharpen_factor < 0) errs.push_back("augmentation.sharpen_factor must be >= 0");
  if (crop_size <= 0) {
    errs.push_back("augmentation.crop_size must be positive");
  } else {
    if (patch_size > 0 && crop_size % patch_size != 0)
      errs.push_back("augmentation.crop_size must be a multiple of model.patch_size");
    if (encoder_stride > 0 && crop_size % encoder_stride != 0)
      errs.push_back("augmentation.crop_size must be a multiple of the encoder stride " + std::to_string(encoder_stride));
  }
  return errs;
}

Image adjust_brightness(const Image& image, double factor) {
  Image out = image;
  for (auto& v : out.pixels) v = clamp01(v * factor);
  return out;
}

Image adjust_contrast(const Image& image, double factor) {
  double m = 0.0;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) m += gray(image, y, x);
  m /= static_cast<double>(image.height) * image.width;
  Image out = image;
  for (auto& v : out.pixels) v = clamp01(factor * v + (1.0 - factor) * m);
  return out;
}

Image adjust_saturation(const Image& image, double factor) {
  Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const double g = gray(image, y, x);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = clamp01(factor * image.at(y, x, c) + (1.0 - factor) * g);
    }
  return out;
}

Image adjust_hue(const Image& image, double shift) {
  Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const double r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
      const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
      const double delta = mx - mn;
      double h = 0.0;
      if (delta > 0) {
        if (mx == r) h = std::fmod((g - b) / delta, 6.0);
        else if (mx == g) h = (b - r) / delta + 2.0;
        else h = (r - g) / delta + 4.0;
        h /= 6.0;
      }
      const double s = mx > 0 ? delta / mx : 0.0;
      const double v = mx;
      h = std::fmod(h + shift, 1.0);
      if (h < 0) h += 1.0;
      const double hh = h * 6.0;
      const int sector = static_cast<int>(std::floor(hh)) % 6;
      const double f = hh - std::floor(hh);
      const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
      std::array<double, 3> rgb{};
      switch (sector) {
        case 0: rgb = {v, t, p}; break;
        case 1: rgb = {q, v, p}; break;
        case 2: rgb = {p, v, t}; break;
        case 3: rgb = {p, q, v}; break;
        case 4: rgb = {t, p, v}; break;
        default: rgb = {v, p, q}; break;
      }
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = clamp01(rgb[c]);
    }
  return out;
}

Image gaussian_blur(const Image& image, int kernel, double sigma) {
  const int r = kernel / 2;
  std::vector<double> k(static_cast<std::size_t>(kernel));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) total += (k[i + r] = std::exp(-(i * i) / (2 * sigma * sigma)));
  for (auto& v : k) v /= total;

  Image tmp = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * image.at(y, reflect(x + i, image.width), c);
        tmp.at(y, x, c) = static_cast<float>(s);
      }
  Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(reflect(y + i, image.height), x, c);
        out.at(y, x, c) = clamp01(s);
      }
  return out;
}

Image adjust_sharpness(const Image& image, double factor) {
  // Smoothed reference: 3×3 kernel with center weight 5, border pixels kept.
  Image smooth = image;
  for (int y = 1; y + 1 < image.height; ++y)
    for (int x = 1; x + 1 < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 4.0 * image.at(y, x, c);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) s += image.at(y + dy, x + dx, c);
        smooth.at(y, x, c) = static_cast<float>(s / 13.0);
      }
  Image out = image;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = clamp01(factor * image.pixels[i] + (1.0 - factor) * smooth.pixels[i]);
  }
  return out;
}

Image photometric_augment(const Image& image, const AugmentationConfig& cfg, Rng& rng) {
  Image out = image;
  if (cfg.jitter_prob > 0 && rng.bernoulli(cfg.jitter_prob)) {
    std::vector<int> order{0, 1, 2, 3};
    rng.shuffle(order);
    const double b = rng.uniform(std::max(0.0, 1 - cfg.brightness), 1 + cfg.brightness);
    const double c = rng.uniform(std::max(0.0, 1 - cfg.contrast), 1 + cfg.contrast);
    const double s = rng.uniform(std::max(0.0, 1 - cfg.saturation), 1 + cfg.saturation);
    const double h = rng.uniform(-cfg.hue, cfg.hue);
    for (int op : order) {
      switch (op) {
        case 0: out = adjust_brightness(out, b); break;
        case 1: out = adjust_contrast(out, c); break;
        case 2: out = adjust_saturation(out, s); break;
        default: out = adjust_hue(out, h); break;
      }
    }
  }
  if (cfg.blur_prob > 0 && rng.bernoulli(cfg.blur_prob)) out = gaussian_blur(out, cfg.blur_kernel, cfg.blur_sigma);
  if (cfg.sharpen_prob > 0 && rng.bernoulli(cfg.sharpen_prob)) out = adjust_sharpness(out, cfg.sharpen_factor);
  return out;
}

DensityMap crop_density(const DensityMap& density, int y, int x, int h, int w) {
  if (y < 0 || x < 0 || y + h > density.height() || x + w > density.width()) {
    throw ShapeError("crop_density: window outside map");
  }
  DensityMap out{Tensor({h, w}, 0.0), density.scale};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.values.at(r, c) = density.values.at(y + r, x + c);
  return out;
}

DensityMap hflip_density(const DensityMap& density) {
  DensityMap out = density;
  const int w = density.width();
  for (int r = 0; r < density.height(); ++r)
    for (int c = 0; c < w; ++c) out.values.at(r, c) = density.values.at(r, w - 1 - c);
  return out;
}

AugmentedPair augment_pair(const Image& image, const DensityMap& density, int patch_size,
                           const AugmentationConfig& cfg, Rng& rng) {
  if (density.height() != image.height || density.width() != image.width) {
    throw ShapeError("augment_pair: density and image sizes differ");
  }
  const int size = cfg.crop_size;
  if (image.height < size || image.width < size) {
    throw ShapeError("augment_pair: image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                     " is smaller than crop size " + std::to_string(size));
  }
  const int y = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(image.height - size + 1)));
  const int x = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(image.width - size + 1)));
  const bool flip = cfg.hflip_prob > 0 && rng.bernoulli(cfg.hflip_prob);

  LabeledSample ori;
  ori.image = crop(image, y, x, size, size);
  ori.density = crop_density(density, y, x, size, size);
  if (flip) {
    ori.image = hflip(ori.image);
    ori.density = hflip_density(ori.density);
  }
  ori.pcm = generate_pcm_gt(ori.density, patch_size);

  LabeledSample aug{photometric_augment(ori.image, cfg, rng), ori.density, ori.pcm};
  return {std::move(ori), std::move(aug)};
}

}  // namespace sdgcount
