#pragma once

#include <cstdint>
#include <string>

#include "psnet/tensor.hpp"

namespace psnet {

// Images are 3xHxW float tensors with values in [0,1]. Files are binary PPM
// (P6, color) or PGM (P5, gray, replicated to three channels), maxval 255.
TensorPtr read_image(const std::string& path);
void write_ppm(const std::string& path, const TensorPtr& image);

// Bilinear resampling with half-pixel-center geometry and edge clamping.
TensorPtr bilinear_resize(const TensorPtr& image, std::int64_t out_h, std::int64_t out_w);

// Mirror padding about the border pixels (the border itself is not
// repeated); any padding amount is legal, the reflection folds.
TensorPtr reflect_pad(const TensorPtr& image, std::int64_t top, std::int64_t bottom, std::int64_t left,
                      std::int64_t right);

// Copies the crop_h x crop_w window whose top-left corner is (y0, x0).
TensorPtr crop(const TensorPtr& image, std::int64_t y0, std::int64_t x0, std::int64_t crop_h, std::int64_t crop_w);

}  // namespace psnet
