#include "sdgcount/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "sdgcount/errors.hpp"
#include "sdgcount/ops.hpp"

namespace sdgcount {

DensityMap generate_density_map(const PointAnnotation& points, int height, int width, double sigma,
                                bool renormalize) {
  if (!(sigma > 0.0)) throw ConfigError("generate_density_map: sigma must be > 0");
  if (height <= 0 || width <= 0) throw ShapeError("generate_density_map: image size must be positive");

  std::vector<std::string> bad;
  for (std::size_t i = 0; i < points.points.size(); ++i) {
    const auto& p = points.points[i];
    if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height)) {
      bad.push_back("point " + std::to_string(i) + " (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                    ") outside " + std::to_string(width) + "x" + std::to_string(height));
    }
  }
  if (!bad.empty()) throw DataError("annotation '" + points.image_id + "' has out-of-bounds points", bad);

  const int radius = static_cast<int>(std::ceil(kKernelTruncation * sigma));
  const int side = 2 * radius + 1;
  std::vector<double> kernel1d(static_cast<std::size_t>(side));
  for (int d = -radius; d <= radius; ++d) kernel1d[d + radius] = std::exp(-(d * d) / (2.0 * sigma * sigma));
  double full_1d = 0.0;
  for (double v : kernel1d) full_1d += v;
  const double full_mass = full_1d * full_1d;

  DensityMap out{Tensor({height, width}, 0.0), 1.0};
  for (const auto& p : points.points) {
    const int cx = static_cast<int>(std::floor(p.x));
    const int cy = static_cast<int>(std::floor(p.y));
    const int y0 = std::max(0, cy - radius), y1 = std::min(height - 1, cy + radius);
    const int x0 = std::max(0, cx - radius), x1 = std::min(width - 1, cx + radius);
    double norm = full_mass;
    if (renormalize) {
      double sy = 0.0, sx = 0.0;
      for (int y = y0; y <= y1; ++y) sy += kernel1d[y - cy + radius];
      for (int x = x0; x <= x1; ++x) sx += kernel1d[x - cx + radius];
      norm = sy * sx;
    }
    for (int y = y0; y <= y1; ++y) {
      const double ky = kernel1d[y - cy + radius] / norm;
      for (int x = x0; x <= x1; ++x) out.values.at(y, x) += ky * kernel1d[x - cx + radius];
    }
  }
  return out;
}

PatchClassMap generate_pcm_gt(const DensityMap& density, int patch_size) {
  if (patch_size <= 0) throw ConfigError("generate_pcm_gt: patch size must be positive");
  const int h = density.height(), w = density.width();
  if (h % patch_size != 0 || w % patch_size != 0) {
    throw ShapeError("generate_pcm_gt: density " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by patch size " + std::to_string(patch_size) +
                     "; pad or crop the map first");
  }
  const int rows = h / patch_size, cols = w / patch_size;
  PatchClassMap out{Tensor({rows, cols}, 0.0), patch_size};
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double s = 0.0;
      for (int y = i * patch_size; y < (i + 1) * patch_size; ++y)
        for (int x = j * patch_size; x < (j + 1) * patch_size; ++x) s += density.values.at(y, x);
      out.values.at(i, j) = s > kEmptyPatchTolerance ? 1.0 : 0.0;
    }
  }
  return out;
}

DensityMap scale_density(const DensityMap& density, double factor) {
  if (!(factor > 0.0)) throw ConfigError("scale_density: factor must be > 0");
  DensityMap out = density;
  out.values *= factor;
  out.scale *= factor;
  return out;
}

DensityMap pad_density(const DensityMap& density, int height, int width) {
  if (height < density.height() || width < density.width()) throw ShapeError("pad_density: target smaller");
  DensityMap out{Tensor({height, width}, 0.0), density.scale};
  for (int y = 0; y < density.height(); ++y)
    for (int x = 0; x < density.width(); ++x) out.values.at(y, x) = density.values.at(y, x);
  return out;
}

DensityMap sum_pool_density(const DensityMap& density, int factor) {
  const int h = density.height(), w = density.width();
  if (factor <= 0 || h % factor || w % factor) throw ShapeError("sum_pool_density: size not divisible by factor");
  DensityMap out{Tensor({h / factor, w / factor}, 0.0), density.scale};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.values.at(y / factor, x / factor) += density.values.at(y, x);
  return out;
}

DensityMap upsample_density(const DensityMap& coarse, int factor) {
  ag::NoGradGuard guard;
  const ag::Var x(coarse.values.reshaped({1, 1, coarse.height(), coarse.width()}));
  Tensor up = ag::upsample_bilinear(x, factor).value();
  up *= 1.0 / (static_cast<double>(factor) * factor);
  return DensityMap{up.reshaped({coarse.height() * factor, coarse.width() * factor}), coarse.scale};
}

PointAnnotation load_annotation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed annotation " + path.string() + ": " + e.what());
  }
  PointAnnotation ann;
  std::vector<std::string> problems;
  if (!doc.is_object()) throw DataError("annotation " + path.string() + " is not a JSON object");
  ann.image_id = doc.value("image_id", path.stem().string());
  if (!doc.contains("points") || !doc["points"].is_array()) {
    problems.push_back("missing 'points' array");
  } else {
    std::size_t idx = 0;
    for (const auto& p : doc["points"]) {
      if (!p.is_array() || p.size() < 2 || !p[0].is_number() || !p[1].is_number()) {
        problems.push_back("points[" + std::to_string(idx) + "] is not an [x, y] pair");
      } else {
        ann.points.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      ++idx;
    }
  }
  for (auto [key, dst] : {std::pair{"width", &ann.width}, std::pair{"height", &ann.height}}) {
    if (!doc.contains(key)) continue;
    if (doc[key].is_number_integer()) {
      *dst = doc[key].get<int>();
    } else {
      problems.push_back(std::string("'") + key + "' is not an integer");
    }
  }
  if (!problems.empty()) throw DataError("malformed annotation " + path.string(), problems);
  return ann;
}

void save_annotation(const PointAnnotation& annotation, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["image_id"] = annotation.image_id;
  auto pts = nlohmann::json::array();
  for (const auto& p : annotation.points) pts.push_back({p.x, p.y});
  doc["points"] = std::move(pts);
  if (annotation.width > 0) doc["width"] = annotation.width;
  if (annotation.height > 0) doc["height"] = annotation.height;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace sdgcount
