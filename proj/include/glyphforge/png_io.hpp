#pragma once

#include <string>

#include "glyphforge/image.hpp"

namespace glyphforge {

// Lossless 8-bit PNG round trip for 1- or 3-channel images. Values are
// quantized as round(v * 255) on write and mapped back as v / 255 on read, so
// write-then-read is exact on the quantized grid.
void save_png(const std::string& path, const RasterImage& img);
RasterImage load_png(const std::string& path);

}  // namespace glyphforge
