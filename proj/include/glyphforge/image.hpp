#pragma once

#include <algorithm>
#include <cmath>

#include "glyphforge/tensor.hpp"

namespace glyphforge {

// Images are rank-3 float tensors shaped (H, W, C) with values in [0, 1].
// C is 1 for maps and 3 for color images.
using RasterImage = Tensor<float>;

struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool valid_in(int h, int w) const {
    return 0 <= x0 && x0 < x1 && x1 <= w && 0 <= y0 && y0 < y1 && y1 <= h;
  }
  bool intersects(const Rect& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
  bool contains(int y, int x) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

inline RasterImage make_image(int h, int w, int c) { return RasterImage({h, w, c}); }

inline RasterImage to_gray(const RasterImage& img) {
  if (img.dim(2) == 1) return img;
  RasterImage g({img.dim(0), img.dim(1), 1});
  const int C = img.dim(2);
  for (std::int64_t p = 0; p < g.numel(); ++p) {
    float s = 0.f;
    for (int c = 0; c < C; ++c) s += img.data[p * C + c];
    g.data[p] = s / static_cast<float>(C);
  }
  return g;
}

inline RasterImage replicate_channels(const RasterImage& img, int c) {
  require_shape(img.dim(2) == 1, "replicate_channels: expects 1 channel");
  RasterImage out({img.dim(0), img.dim(1), c});
  for (std::int64_t p = 0; p < img.numel(); ++p)
    for (int k = 0; k < c; ++k) out.data[p * c + k] = img.data[p];
  return out;
}

inline RasterImage crop_image(const RasterImage& img, const Rect& r) {
  require_shape(r.valid_in(img.dim(0), img.dim(1)), "crop: rect out of bounds");
  const int C = img.dim(2);
  RasterImage out({r.height(), r.width(), C});
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      for (int c = 0; c < C; ++c)
        out.at3(y, x, c) = img.at3(r.y0 + y, r.x0 + x, c);
  return out;
}

// Bilinear resample (half-pixel centers, edge clamped).
inline RasterImage resize_bilinear(const RasterImage& img, int oh, int ow) {
  const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
  RasterImage out({oh, ow, C});
  const float sy = static_cast<float>(H) / oh;
  const float sx = static_cast<float>(W) / ow;
  for (int y = 0; y < oh; ++y) {
    float fy = (y + 0.5f) * sy - 0.5f;
    int y0 = static_cast<int>(std::floor(fy));
    float wy = fy - y0;
    int ya = std::clamp(y0, 0, H - 1), yb = std::clamp(y0 + 1, 0, H - 1);
    for (int x = 0; x < ow; ++x) {
      float fx = (x + 0.5f) * sx - 0.5f;
      int x0 = static_cast<int>(std::floor(fx));
      float wx = fx - x0;
      int xa = std::clamp(x0, 0, W - 1), xb = std::clamp(x0 + 1, 0, W - 1);
      for (int c = 0; c < C; ++c) {
        float top = img.at3(ya, xa, c) * (1 - wx) + img.at3(ya, xb, c) * wx;
        float bot = img.at3(yb, xa, c) * (1 - wx) + img.at3(yb, xb, c) * wx;
        out.at3(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

// Aspect-preserving resize onto a (th, tw) canvas, centered, zero padding.
inline RasterImage fit_into(const RasterImage& img, int th, int tw) {
  const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
  float s = std::min(static_cast<float>(th) / H, static_cast<float>(tw) / W);
  int rh = std::max(1, static_cast<int>(std::round(H * s)));
  int rw = std::max(1, static_cast<int>(std::round(W * s)));
  RasterImage scaled = resize_bilinear(img, rh, rw);
  RasterImage out({th, tw, C});
  int oy = (th - rh) / 2, ox = (tw - rw) / 2;
  for (int y = 0; y < rh; ++y)
    for (int x = 0; x < rw; ++x)
      for (int c = 0; c < C; ++c) out.at3(oy + y, ox + x, c) = scaled.at3(y, x, c);
  return out;
}

// pred where mask is set, src elsewhere. Untouched pixels come straight from
// src, so they are bit-identical to it.
inline RasterImage composite(const RasterImage& pred, const RasterImage& src,
                             const RasterImage& mask) {
  require_shape(pred.same_shape(src), "composite: image shapes");
  require_shape(mask.dim(0) == src.dim(0) && mask.dim(1) == src.dim(1) &&
                    mask.dim(2) == 1,
                "composite: mask shape");
  RasterImage out = src;
  const int C = src.dim(2);
  for (std::int64_t p = 0; p < mask.numel(); ++p)
    if (mask.data[p] != 0.f)
      for (int c = 0; c < C; ++c) out.data[p * C + c] = pred.data[p * C + c];
  return out;
}

inline RasterImage clamp01(RasterImage img) {
  img.data = img.data.min(1.f).max(0.f);
  return img;
}

}  // namespace glyphforge
