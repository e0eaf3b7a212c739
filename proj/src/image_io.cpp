#include "ddcnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace ddcnet {

Image read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw DataError("cannot read PNG " + path + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("cannot decode PNG " + path + ": " + png.message);
  }
  Image img(1, png.height, png.width, 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    img.values()[static_cast<Index>(i)] = static_cast<float>(pixels[i]) / 255.0f;
  }
  return img;
}

void write_png(const std::string& path, const Image& img) {
  require_rank4(img.dims(), "write_png");
  if (img.n() != 1 || img.c() != 3) throw ShapeError("write_png: expected (1, H, W, 3)");
  std::vector<unsigned char> pixels(static_cast<std::size_t>(img.size()));
  for (Index i = 0; i < img.size(); ++i) {
    const float v = std::clamp(img.values()[i], 0.0f, 1.0f);
    pixels[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.w());
  png.height = static_cast<png_uint_32>(img.h());
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path + ": " + png.message);
  }
}

Image batch_item(const Tensor<float>& batch, Index b) {
  require_rank4(batch.dims(), "batch_item");
  if (b < 0 || b >= batch.n()) throw ShapeError("batch_item: index out of range");
  Image img(1, batch.h(), batch.w(), batch.c());
  const Index n = img.size();
  std::copy_n(batch.data() + b * n, n, img.data());
  return img;
}

}  // namespace ddcnet
