#pragma once

#include <string>
#include <vector>

#include "glyphforge/font.hpp"
#include "glyphforge/image.hpp"

namespace glyphforge {

// One editable text line: the string and its axis-aligned region.
struct TextLine {
  std::string text;
  Rect region;
};

// Validates TextLine invariants against a canvas and the font charset, and
// rejects pairwise-overlapping regions. Throws on violation.
void check_lines(const std::vector<TextLine>& lines, int canvas_h, int canvas_w,
                 const GlyphFont& font);

// Rendering knobs used for data jitter; defaults give the canonical render.
struct RenderStyle {
  float coverage = 0.35f;  // box-filter ink threshold when scaling rasters
  int dilate = 0;          // extra stroke thickness in target pixels (may be -1)
};

// Glyph map X_g: background 0, strokes 1, each line scaled uniformly to fit
// its region (aspect preserved, centered). Never marks pixels outside regions.
RasterImage render_glyph_map(const std::vector<TextLine>& lines, int canvas_h,
                             int canvas_w, const GlyphFont& font,
                             const RenderStyle& style = {});

// Position map X_p: 1 inside any region, else 0. Also the RTP loss mask.
RasterImage render_position_map(const std::vector<TextLine>& lines, int canvas_h,
                                int canvas_w);

// Masked image X_m: source with all region pixels set to 0.
RasterImage make_masked_image(const RasterImage& source,
                              const std::vector<TextLine>& lines);

// Glyph line rendered alone on a fixed-size crop canvas (the e_g input).
RasterImage render_glyph_crop(const TextLine& line, const GlyphFont& font,
                              int crop_h = 16, int crop_w = 64,
                              const RenderStyle& style = {});

// Paints one line's glyphs into an existing canvas with a given ink value per
// channel; used by both the condition renderer and the dataset generator.
void paint_line(RasterImage& canvas, const TextLine& line, const GlyphFont& font,
                const RenderStyle& style, const std::vector<float>& ink);

// Binary 4-neighbourhood dilation of a 1-channel map (n may be 0).
RasterImage dilate(const RasterImage& map, int n);

}  // namespace glyphforge
