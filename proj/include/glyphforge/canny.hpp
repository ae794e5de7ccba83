#pragma once

#include "glyphforge/image.hpp"

namespace glyphforge {

// Canny edge detection on a 1-channel map in [0,1]: 3x3 Gaussian pre-smooth
// (sigma 1.0), Sobel gradients, 4-direction non-maximum suppression, then
// double-threshold hysteresis on the max-normalized magnitude.
// Thresholds must satisfy 0 < low < high < 1.
RasterImage canny_edges(const RasterImage& glyph_map, float low = 0.1f,
                        float high = 0.3f);

}  // namespace glyphforge
