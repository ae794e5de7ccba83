#include "glyphforge/canny.hpp"

#include <cmath>
#include <vector>

#include "glyphforge/errors.hpp"

namespace glyphforge {

RasterImage canny_edges(const RasterImage& glyph_map, float low, float high) {
  if (!(low > 0.f && high < 1.f && low < high))
    throw InvalidThresholds("canny thresholds must satisfy 0 < low < high < 1");
  require_shape(glyph_map.rank() == 3 && glyph_map.dim(2) == 1,
                "canny: 1-channel map expected");
  const int H = glyph_map.dim(0), W = glyph_map.dim(1);
  auto clampy = [&](int y) { return std::min(H - 1, std::max(0, y)); };
  auto clampx = [&](int x) { return std::min(W - 1, std::max(0, x)); };
  auto px = [&](const RasterImage& im, int y, int x) {
    return im.at3(clampy(y), clampx(x), 0);
  };

  // 3x3 Gaussian, sigma = 1.0.
  float k[3];
  k[0] = std::exp(-0.5f);  // offset 1
  k[1] = 1.f;              // center
  k[2] = k[0];
  float kernel[3][3];
  float ksum = 0.f;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      kernel[i][j] = k[i == 1 ? 1 : 0] * k[j == 1 ? 1 : 0];
      ksum += kernel[i][j];
    }
  RasterImage smooth({H, W, 1});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      float s = 0.f;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          s += kernel[dy + 1][dx + 1] * px(glyph_map, y + dy, x + dx);
      smooth.at3(y, x, 0) = s / ksum;
    }

  // Sobel gradients.
  RasterImage mag({H, W, 1});
  std::vector<float> gxv(static_cast<std::size_t>(H) * W), gyv(gxv.size());
  float max_mag = 0.f;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      float gx = px(smooth, y - 1, x + 1) + 2 * px(smooth, y, x + 1) +
                 px(smooth, y + 1, x + 1) - px(smooth, y - 1, x - 1) -
                 2 * px(smooth, y, x - 1) - px(smooth, y + 1, x - 1);
      float gy = px(smooth, y + 1, x - 1) + 2 * px(smooth, y + 1, x) +
                 px(smooth, y + 1, x + 1) - px(smooth, y - 1, x - 1) -
                 2 * px(smooth, y - 1, x) - px(smooth, y - 1, x + 1);
      gxv[static_cast<std::size_t>(y) * W + x] = gx;
      gyv[static_cast<std::size_t>(y) * W + x] = gy;
      float m = std::sqrt(gx * gx + gy * gy);
      mag.at3(y, x, 0) = m;
      max_mag = std::max(max_mag, m);
    }
  if (max_mag <= 0.f) return RasterImage({H, W, 1});
  mag.data /= max_mag;

  // Non-maximum suppression along the quantized gradient direction. The
  // strict/non-strict neighbour comparison keeps plateau edges one pixel wide.
  RasterImage thin({H, W, 1});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      float m = mag.at3(y, x, 0);
      if (m <= 0.f) continue;
      float gx = gxv[static_cast<std::size_t>(y) * W + x];
      float gy = gyv[static_cast<std::size_t>(y) * W + x];
      float ang = std::atan2(gy, gx);  // [-pi, pi]
      float deg = ang * 57.29577951308232f;
      if (deg < 0) deg += 180.f;
      int dy1, dx1;
      if (deg < 22.5f || deg >= 157.5f) {
        dy1 = 0; dx1 = 1;        // horizontal gradient
      } else if (deg < 67.5f) {
        dy1 = 1; dx1 = 1;        // diagonal
      } else if (deg < 112.5f) {
        dy1 = 1; dx1 = 0;        // vertical gradient
      } else {
        dy1 = 1; dx1 = -1;       // anti-diagonal
      }
      float n1 = px(mag, y + dy1, x + dx1);
      float n2 = px(mag, y - dy1, x - dx1);
      if (m > n1 && m >= n2) thin.at3(y, x, 0) = m;
    }

  // Hysteresis: strong pixels seed, weak pixels join via 8-connectivity.
  RasterImage out({H, W, 1});
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (thin.at3(y, x, 0) >= high) {
        out.at3(y, x, 0) = 1.f;
        stack.emplace_back(y, x);
      }
  while (!stack.empty()) {
    auto [y, x] = stack.back();
    stack.pop_back();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
        if (out.at3(ny, nx, 0) == 0.f && thin.at3(ny, nx, 0) >= low) {
          out.at3(ny, nx, 0) = 1.f;
          stack.emplace_back(ny, nx);
        }
      }
  }
  return out;
}

}  // namespace glyphforge
