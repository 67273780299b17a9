#pragma once

#include <filesystem>

#include "sdgcount/tensor.hpp"

namespace sdgcount {

/// Writes a little-endian float64 NumPy `.npy` (format 1.0, C order).
void save_npy(const Tensor& tensor, const std::filesystem::path& path);
/// Reads `<f8` or `<f4` C-order arrays.
Tensor load_npy(const std::filesystem::path& path);

}  // namespace sdgcount
