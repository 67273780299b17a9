#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sdgcount/tensor.hpp"

namespace sdgcount {

struct Point {
  double x = 0.0;  // pixel column
  double y = 0.0;  // pixel row
  friend bool operator==(const Point&, const Point&) = default;
};

/// Head coordinates for one image. `width`/`height` are 0 when unknown.
struct PointAnnotation {
  std::string image_id;
  std::vector<Point> points;
  int width = 0;
  int height = 0;
};

/// Non-negative H×W density grid whose sum divided by `scale` is the count.
struct DensityMap {
  Tensor values;  // [H, W]
  double scale = 1.0;

  int height() const { return static_cast<int>(values.dim(0)); }
  int width() const { return static_cast<int>(values.dim(1)); }
  double count() const { return values.sum() / scale; }
};

/// (H/P)×(W/P) head-presence grid: {0,1} labels or [0,1] probabilities.
struct PatchClassMap {
  Tensor values;  // [H/P, W/P]
  int patch_size = 16;

  int rows() const { return static_cast<int>(values.dim(0)); }
  int cols() const { return static_cast<int>(values.dim(1)); }
};

struct DensityGenConfig {
  double sigma = 4.0;
  bool renormalize = true;
};

/// Kernel support radius in multiples of sigma.
inline constexpr double kKernelTruncation = 4.0;
/// Patch sums at or below this are treated as empty.
inline constexpr double kEmptyPatchTolerance = 1e-12;

/// Sum of one truncated Gaussian per head, centered on the head's pixel.
/// With `renormalize`, each kernel is rescaled so its in-image mass is exactly 1.
/// Throws DataError listing every point outside [0,width)×[0,height).
DensityMap generate_density_map(const PointAnnotation& points, int height, int width, double sigma,
                                bool renormalize);

/// Entry (i,j) is 1 iff the density mass in patch (i,j) exceeds kEmptyPatchTolerance.
PatchClassMap generate_pcm_gt(const DensityMap& density, int patch_size);

/// Multiplies values and the scale field by `factor` (count is unchanged).
DensityMap scale_density(const DensityMap& density, double factor);

/// Zero-pads a density map on the bottom/right to the given size.
DensityMap pad_density(const DensityMap& density, int height, int width);

/// Sums non-overlapping factor×factor blocks (count-preserving downsample).
DensityMap sum_pool_density(const DensityMap& density, int factor);

/// Bilinear ×factor upsampling divided by factor², so mass is preserved.
DensityMap upsample_density(const DensityMap& coarse, int factor);

PointAnnotation load_annotation(const std::filesystem::path& path);
void save_annotation(const PointAnnotation& annotation, const std::filesystem::path& path);

}  // namespace sdgcount
