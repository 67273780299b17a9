#include "sdgcount/synthbench.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "sdgcount/errors.hpp"

namespace sdgcount {

namespace {

constexpr std::uint64_t kCountStream = 0xc0;
constexpr std::uint64_t kLayoutStream = 0x1a;

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

Image render_background(const SceneSpec& spec, Rng& rng) {
  Image img(spec.height, spec.width);
  std::array<double, 3> base{rng.uniform(0.45, 0.75), rng.uniform(0.45, 0.75), rng.uniform(0.45, 0.75)};
  const double fx = rng.uniform(0.03, 0.12), fy = rng.uniform(0.03, 0.12);
  const double phase = rng.uniform(0.0, 2 * std::numbers::pi);
  const double angle = rng.uniform(0.0, std::numbers::pi);
  const int block = 4 + static_cast<int>(rng.uniform_int(5));
  std::vector<double> cells;
  const int cells_w = spec.width / block + 1, cells_h = spec.height / block + 1;
  for (int i = 0; i < cells_w * cells_h; ++i) cells.push_back(rng.uniform(-1.0, 1.0));

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double t = 0.0;
      switch (spec.texture) {
        case 0:
          t = std::sin(fx * x * 2 * std::numbers::pi + phase) * std::cos(fy * y * 2 * std::numbers::pi);
          break;
        case 1:
          t = std::sin((x * std::cos(angle) + y * std::sin(angle)) * fx * 4 * std::numbers::pi + phase);
          break;
        default:
          t = cells[static_cast<std::size_t>((y / block) * cells_w + x / block)];
          break;
      }
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = clamp01(base[c] + 0.12 * t);
    }
  }
  return img;
}

}  // namespace

std::string to_string(DomainTransform t) {
  switch (t) {
    case DomainTransform::identity: return "identity";
    case DomainTransform::color_shift: return "color_shift";
    case DomainTransform::haze: return "haze";
    case DomainTransform::brightness_contrast: return "brightness_contrast";
  }
  return "identity";
}

DomainTransform parse_transform(const std::string& name) {
  for (auto t : {DomainTransform::identity, DomainTransform::color_shift, DomainTransform::haze,
                 DomainTransform::brightness_contrast}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown domain transform '" + name + "'");
}

std::vector<std::string> SceneSpec::validate() const {
  std::vector<std::string> errs;
  if (height < 1 || width < 1) errs.push_back("scene size must be positive");
  if (min_count < 0 || max_count < min_count) errs.push_back("count range must satisfy 0 <= min <= max");
  if (!(min_radius > 0) || max_radius < min_radius) errs.push_back("radius range must satisfy 0 < min <= max");
  if (texture < 0 || texture > 2) errs.push_back("texture id must be 0, 1 or 2");
  if (!(strength >= 0 && strength <= 1)) errs.push_back("transform strength must be in [0,1]");
  return errs;
}

Image apply_domain_transform(const Image& image, DomainTransform transform, double s) {
  if (s == 0.0 || transform == DomainTransform::identity) return image;
  Image out = image;
  const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
  switch (transform) {
    case DomainTransform::color_shift: {
      const std::array<double, 3> shift{0.25, -0.05, -0.2};
      for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) out.pixels[i * 3 + c] = clamp01(image.pixels[i * 3 + c] + s * shift[c]);
      break;
    }
    case DomainTransform::haze: {
      // Airlight blend that thickens toward the top of the frame.
      const std::array<double, 3> air{0.86, 0.88, 0.92};
      for (int y = 0; y < image.height; ++y) {
        const double t = s * (0.45 + 0.3 * (1.0 - static_cast<double>(y) / std::max(1, image.height - 1)));
        for (int x = 0; x < image.width; ++x)
          for (int c = 0; c < 3; ++c) out.at(y, x, c) = clamp01((1 - t) * image.at(y, x, c) + t * air[c]);
      }
      break;
    }
    case DomainTransform::brightness_contrast: {
      double mean = 0.0;
      for (float v : image.pixels) mean += v;
      mean /= static_cast<double>(image.pixels.size());
      const double contrast = 1.0 - 0.5 * s, brightness = 0.2 * s;
      for (std::size_t i = 0; i < image.pixels.size(); ++i)
        out.pixels[i] = clamp01(mean + contrast * (image.pixels[i] - mean) + brightness);
      break;
    }
    case DomainTransform::identity: break;
  }
  return out;
}

Scene render_scene(const SceneSpec& spec, int count, Rng& rng) {
  if (auto errs = spec.validate(); !errs.empty()) throw ConfigError("invalid scene spec", errs);
  Scene scene;
  scene.image = render_background(spec, rng);
  scene.annotation.width = spec.width;
  scene.annotation.height = spec.height;
  for (int k = 0; k < count; ++k) {
    const double cx = rng.uniform(0.0, spec.width), cy = rng.uniform(0.0, spec.height);
    const double r = rng.uniform(spec.min_radius, spec.max_radius);
    const double ratio = rng.uniform(0.7, 1.0), theta = rng.uniform(0.0, std::numbers::pi);
    const double tone = rng.uniform(0.05, 0.25);
    const double ct = std::cos(theta), st = std::sin(theta);
    const int x0 = std::max(0, static_cast<int>(cx - r - 1)), x1 = std::min(spec.width - 1, static_cast<int>(cx + r + 1));
    const int y0 = std::max(0, static_cast<int>(cy - r - 1)), y1 = std::min(spec.height - 1, static_cast<int>(cy + r + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double u = dx * ct + dy * st, v = (-dx * st + dy * ct) / ratio;
        // Soft edge of one pixel width.
        const double cover = std::clamp(r - std::sqrt(u * u + v * v) + 0.5, 0.0, 1.0);
        for (int c = 0; c < 3; ++c) {
          float& px = scene.image.at(y, x, c);
          px = static_cast<float>((1 - cover) * px + cover * tone);
        }
      }
    }
    scene.annotation.points.push_back({cx, cy});
  }
  scene.image = apply_domain_transform(scene.image, spec.transform, spec.strength);
  return scene;
}

Scene generate_scene(const SceneSpec& spec, Rng& rng) {
  if (auto errs = spec.validate(); !errs.empty()) throw ConfigError("invalid scene spec", errs);
  const int span = spec.max_count - spec.min_count + 1;
  const int count = spec.min_count + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span)));
  return render_scene(spec, count, rng);
}

DomainPair generate_domain_pair(const SceneSpec& spec, int n_train, int n_test_shifted, Rng& rng) {
  if (n_train < 0 || n_test_shifted < 0 || n_train + n_test_shifted == 0)
    throw ConfigError("generate_domain_pair: split sizes must be non-negative and not both zero");
  if (auto errs = spec.validate(); !errs.empty()) throw ConfigError("invalid scene spec", errs);
  const std::uint64_t base = rng.next_u64();
  const int span = spec.max_count - spec.min_count + 1;

  auto make = [&](int n, std::uint64_t split, DomainTransform t, double s, const std::string& prefix) {
    SceneSpec local = spec;
    local.transform = t;
    local.strength = s;
    Rng counts = Rng::derive(base, {kCountStream});
    std::vector<LabeledImage> out;
    for (int i = 0; i < n; ++i) {
      const int count = spec.min_count + static_cast<int>(counts.uniform_int(static_cast<std::uint64_t>(span)));
      Rng layout = Rng::derive(base, {kLayoutStream, split, static_cast<std::uint64_t>(i)});
      Scene scene = render_scene(local, count, layout);
      char id[32];
      std::snprintf(id, sizeof id, "%s_%04d", prefix.c_str(), i);
      scene.annotation.image_id = id;
      out.push_back({id, std::move(scene.image), std::move(scene.annotation)});
    }
    return out;
  };
  return {make(n_train, 0, DomainTransform::identity, 0.0, "source"),
          make(n_test_shifted, 1, spec.transform, spec.strength, "target")};
}

void write_split(const std::vector<LabeledImage>& images, const std::filesystem::path& dir,
                 const std::filesystem::path& manifest_dir, const std::string& split, SampleManifest& manifest) {
  std::filesystem::create_directories(dir);
  for (const auto& li : images) {
    const auto png = dir / (li.id + ".png");
    const auto ann = dir / (li.id + ".json");
    save_png(li.image, png);
    save_annotation(li.annotation, ann);
    manifest.records.push_back({li.id, std::filesystem::relative(png, manifest_dir),
                                std::filesystem::relative(ann, manifest_dir), split, std::nullopt});
  }
}

}  // namespace sdgcount
