#include "sdgcount_cli/render.hpp"

#include <algorithm>
#include <array>

#include "sdgcount/errors.hpp"

namespace sdgcount::cli {

namespace {

std::array<float, 3> jet(double t) {
  auto ramp = [](double v) { return static_cast<float>(std::clamp(1.5 - std::abs(v), 0.0, 1.0)); };
  return {ramp(4 * t - 3), ramp(4 * t - 2), ramp(4 * t - 1)};
}

}  // namespace

Image render_heatmap(const DensityMap& density) {
  const int h = density.height(), w = density.width();
  Image out(h, w);
  const double peak = h * w > 0 ? density.values.max() : 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = peak > 0 ? std::max(0.0, density.values.at(y, x)) / peak : 0.0;
      const auto c = jet(t);
      for (int k = 0; k < 3; ++k) out.at(y, x, k) = c[k];
    }
  }
  return out;
}

Image render_pcm_panel(const Image& image, const PatchClassMap& pcm) {
  const int p = pcm.patch_size;
  Image out = image;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const int r = y / p, c = x / p;
      const double v = (r < pcm.rows() && c < pcm.cols()) ? pcm.values.at(r, c) : 0.0;
      if (y % p == 0 || x % p == 0) {
        out.at(y, x, 0) = 1.0f;
        out.at(y, x, 1) = 1.0f;
        out.at(y, x, 2) = 1.0f;
        continue;
      }
      // Red tint proportional to the patch value.
      const float a = static_cast<float>(0.5 * std::clamp(v, 0.0, 1.0));
      out.at(y, x, 0) = (1 - a) * image.at(y, x, 0) + a;
      out.at(y, x, 1) = (1 - a) * image.at(y, x, 1);
      out.at(y, x, 2) = (1 - a) * image.at(y, x, 2);
    }
  }
  return out;
}

Image hstack(const std::vector<Image>& panels) {
  if (panels.empty()) return {};
  const int h = panels[0].height;
  int w = 0;
  for (const auto& p : panels) {
    if (p.height != h) throw ShapeError("hstack: panel heights differ");
    w += p.width;
  }
  Image out(h, w);
  int x0 = 0;
  for (const auto& p : panels) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < p.width; ++x)
        for (int c = 0; c < 3; ++c) out.at(y, x0 + x, c) = p.at(y, x, c);
    x0 += p.width;
  }
  return out;
}

}  // namespace sdgcount::cli
