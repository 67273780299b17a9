#pragma once

#include "sdgcount/data.hpp"
#include "sdgcount/image.hpp"

namespace sdgcount::cli {

/// Jet-style color map of the density, normalized by its maximum. An all-zero
/// map renders uniformly in the coldest color.
Image render_heatmap(const DensityMap& density);

/// The image with positive patches tinted and grid lines every
/// `pcm.patch_size` pixels. Cropped to the image size.
Image render_pcm_panel(const Image& image, const PatchClassMap& pcm);

/// Horizontal concatenation of equally sized panels.
Image hstack(const std::vector<Image>& panels);

}  // namespace sdgcount::cli
