#pragma once

#include <string>

#include "ddcnet/tensor.hpp"

namespace ddcnet {

// An RGB image is a (1, H, W, 3) float tensor with values in [0, 1].
using Image = Tensor<float>;

// Reads any 8/16-bit PNG, converted to 8-bit RGB. Throws DataError.
Image read_png(const std::string& path);

// Clamps to [0, 1] and writes 8-bit RGB. Throws DataError.
void write_png(const std::string& path, const Image& img);

// Splits a (B, H, W, 3) batch into single images.
Image batch_item(const Tensor<float>& batch, Index b);

}  // namespace ddcnet
