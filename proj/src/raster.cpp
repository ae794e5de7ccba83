#include "glyphforge/raster.hpp"

#include <algorithm>
#include <cmath>

#include "glyphforge/errors.hpp"

namespace glyphforge {
namespace {

// Box-filter coverage of the source raster over the target pixel's footprint.
// Sampling uses region-relative coordinates only, so renders translate exactly
// with their regions.
float sample_coverage(const GlyphFont::Raster& r, float u0, float v0, float u1,
                      float v1) {
  int xa = std::max(0, static_cast<int>(std::floor(u0)));
  int xb = std::min(r.w, static_cast<int>(std::ceil(u1)));
  int ya = std::max(0, static_cast<int>(std::floor(v0)));
  int yb = std::min(r.h, static_cast<int>(std::ceil(v1)));
  if (xa >= xb || ya >= yb) return 0.f;
  float area = 0.f, total = 0.f;
  for (int y = ya; y < yb; ++y) {
    float hy = std::min(v1, static_cast<float>(y + 1)) - std::max(v0, static_cast<float>(y));
    for (int x = xa; x < xb; ++x) {
      float wx = std::min(u1, static_cast<float>(x + 1)) - std::max(u0, static_cast<float>(x));
      float a = hy * wx;
      total += a;
      if (r.at(y, x)) area += a;
    }
  }
  return total > 0.f ? area / total : 0.f;
}

}  // namespace

void check_lines(const std::vector<TextLine>& lines, int canvas_h, int canvas_w,
                 const GlyphFont& font) {
  for (const TextLine& l : lines) {
    if (l.text.empty()) throw ValidationError("empty text line");
    if (!l.region.valid_in(canvas_h, canvas_w))
      throw ValidationError("region out of bounds: (" + std::to_string(l.region.x0) +
                            "," + std::to_string(l.region.y0) + "," +
                            std::to_string(l.region.x1) + "," +
                            std::to_string(l.region.y1) + ")");
    for (char c : l.text)
      if (!font.has(c))
        throw CharsetMiss(std::string("character '") + c + "' not in charset");
  }
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j)
      if (lines[i].region.intersects(lines[j].region))
        throw OverlappingRegions("regions of lines " + std::to_string(i) + " and " +
                                 std::to_string(j) + " intersect");
}

void paint_line(RasterImage& canvas, const TextLine& line, const GlyphFont& font,
                const RenderStyle& style, const std::vector<float>& ink) {
  const int C = canvas.dim(2);
  const Rect& r = line.region;
  const int k = static_cast<int>(line.text.size());
  const float ref_w = font.ref_width(), ref_h = font.ref_height();
  const float line_w = k * ref_w + (k - 1) * font.ref_gap();
  const float s = std::min(r.width() / line_w, r.height() / ref_h);
  const float cell_w = ref_w * s, cell_h = ref_h * s;
  const float oy = (r.height() - cell_h) / 2.f;
  const float ox = (r.width() - line_w * s) / 2.f;

  RasterImage glyph_ink({r.height(), r.width(), 1});
  for (int i = 0; i < k; ++i) {
    const GlyphFont::Raster& g = font.raster(line.text[i]);
    const float cx = ox + i * (ref_w + font.ref_gap()) * s;
    int px0 = std::max(0, static_cast<int>(std::floor(cx)));
    int px1 = std::min(r.width(), static_cast<int>(std::ceil(cx + cell_w)));
    int py0 = std::max(0, static_cast<int>(std::floor(oy)));
    int py1 = std::min(r.height(), static_cast<int>(std::ceil(oy + cell_h)));
    for (int y = py0; y < py1; ++y) {
      float v0 = (y - oy) / s, v1 = (y + 1 - oy) / s;
      for (int x = px0; x < px1; ++x) {
        float u0 = (x - cx) / s, u1 = (x + 1 - cx) / s;
        if (sample_coverage(g, u0, v0, u1, v1) >= style.coverage)
          glyph_ink.at3(y, x, 0) = 1.f;
      }
    }
  }
  if (style.dilate > 0) glyph_ink = dilate(glyph_ink, style.dilate);
  if (style.dilate < 0) {
    // Erode: drop ink pixels touching background (thins strokes by one).
    for (int it = 0; it < -style.dilate; ++it) {
      RasterImage next = glyph_ink;
      for (int y = 0; y < r.height(); ++y)
        for (int x = 0; x < r.width(); ++x) {
          if (glyph_ink.at3(y, x, 0) == 0.f) continue;
          bool off = y == 0 || glyph_ink.at3(y - 1, x, 0) == 0.f || y + 1 >= r.height() ||
                     glyph_ink.at3(y + 1, x, 0) == 0.f || x == 0 ||
                     glyph_ink.at3(y, x - 1, 0) == 0.f || x + 1 >= r.width() ||
                     glyph_ink.at3(y, x + 1, 0) == 0.f;
          if (off) next.at3(y, x, 0) = 0.f;
        }
      glyph_ink = std::move(next);
    }
  }

  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      if (glyph_ink.at3(y, x, 0) != 0.f)
        for (int c = 0; c < C; ++c) canvas.at3(r.y0 + y, r.x0 + x, c) = ink[c];
}

RasterImage render_glyph_map(const std::vector<TextLine>& lines, int canvas_h,
                             int canvas_w, const GlyphFont& font,
                             const RenderStyle& style) {
  check_lines(lines, canvas_h, canvas_w, font);
  RasterImage map({canvas_h, canvas_w, 1});
  for (const TextLine& l : lines) paint_line(map, l, font, style, {1.f});
  return map;
}

RasterImage render_position_map(const std::vector<TextLine>& lines, int canvas_h,
                                int canvas_w) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!lines[i].region.valid_in(canvas_h, canvas_w))
      throw ValidationError("region out of bounds");
    for (std::size_t j = i + 1; j < lines.size(); ++j)
      if (lines[i].region.intersects(lines[j].region))
        throw OverlappingRegions("regions intersect");
  }
  RasterImage map({canvas_h, canvas_w, 1});
  for (const TextLine& l : lines)
    for (int y = l.region.y0; y < l.region.y1; ++y)
      for (int x = l.region.x0; x < l.region.x1; ++x) map.at3(y, x, 0) = 1.f;
  return map;
}

RasterImage make_masked_image(const RasterImage& source,
                              const std::vector<TextLine>& lines) {
  RasterImage out = source;
  const int C = source.dim(2);
  for (const TextLine& l : lines) {
    if (!l.region.valid_in(source.dim(0), source.dim(1)))
      throw ValidationError("region out of bounds");
    for (int y = l.region.y0; y < l.region.y1; ++y)
      for (int x = l.region.x0; x < l.region.x1; ++x)
        for (int c = 0; c < C; ++c) out.at3(y, x, c) = 0.f;
  }
  return out;
}

RasterImage render_glyph_crop(const TextLine& line, const GlyphFont& font,
                              int crop_h, int crop_w, const RenderStyle& style) {
  if (line.text.empty()) throw ValidationError("empty text line");
  RasterImage crop({crop_h, crop_w, 1});
  TextLine full{line.text, Rect{0, 0, crop_w, crop_h}};
  paint_line(crop, full, font, style, {1.f});
  return crop;
}

RasterImage dilate(const RasterImage& map, int n) {
  RasterImage cur = map;
  const int H = map.dim(0), W = map.dim(1);
  for (int it = 0; it < n; ++it) {
    RasterImage next = cur;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (cur.at3(y, x, 0) != 0.f) continue;
        bool on = (y > 0 && cur.at3(y - 1, x, 0) != 0.f) ||
                  (y + 1 < H && cur.at3(y + 1, x, 0) != 0.f) ||
                  (x > 0 && cur.at3(y, x - 1, 0) != 0.f) ||
                  (x + 1 < W && cur.at3(y, x + 1, 0) != 0.f);
        if (on) next.at3(y, x, 0) = 1.f;
      }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace glyphforge
