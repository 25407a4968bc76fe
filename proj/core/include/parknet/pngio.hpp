#pragma once

#include <string>

#include "parknet/tensor.hpp"

namespace parknet {

// 8-bit RGB PNG from a (3, H, W) tensor with values in [0, 1] (clamped).
void write_png_rgb(const Tensor& image, const std::string& path);
// Inverse: (3, H, W) tensor with values in [0, 1].
Tensor read_png_rgb(const std::string& path);

}  // namespace parknet
