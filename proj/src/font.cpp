#include "glyphforge/font.hpp"

#include <array>
#include <cmath>

#include "glyphforge/errors.hpp"

namespace glyphforge {
namespace {

struct Seg {
  float x0, y0, x1, y1;
};
using Strokes = std::vector<Seg>;

// Polyline helper: consecutive points become segments.
Strokes poly(std::initializer_list<std::pair<float, float>> pts) {
  Strokes s;
  auto it = pts.begin();
  auto prev = *it++;
  for (; it != pts.end(); ++it) {
    s.push_back({prev.first, prev.second, it->first, it->second});
    prev = *it;
  }
  return s;
}

void append(Strokes& dst, const Strokes& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

// Letter and digit skeletons on a unit cell, x right / y down.
Strokes letter_strokes(char c) {
  switch (c) {
    case 'A': {
      auto s = poly({{0, 1}, {0.5f, 0}, {1, 1}});
      append(s, poly({{0.22f, 0.58f}, {0.78f, 0.58f}}));
      return s;
    }
    case 'B': {
      auto s = poly({{0, 0}, {0, 1}});
      append(s, poly({{0, 0}, {0.7f, 0}, {0.85f, 0.14f}, {0.85f, 0.36f}, {0.65f, 0.5f}, {0, 0.5f}}));
      append(s, poly({{0.65f, 0.5f}, {0.92f, 0.64f}, {0.92f, 0.86f}, {0.7f, 1}, {0, 1}}));
      return s;
    }
    case 'C':
      return poly({{1, 0.16f}, {0.7f, 0}, {0.3f, 0}, {0, 0.2f}, {0, 0.8f}, {0.3f, 1}, {0.7f, 1}, {1, 0.84f}});
    case 'D': {
      auto s = poly({{0, 0}, {0, 1}});
      append(s, poly({{0, 0}, {0.6f, 0}, {0.95f, 0.25f}, {0.95f, 0.75f}, {0.6f, 1}, {0, 1}}));
      return s;
    }
    case 'E': {
      auto s = poly({{1, 0}, {0, 0}, {0, 1}, {1, 1}});
      append(s, poly({{0, 0.5f}, {0.72f, 0.5f}}));
      return s;
    }
    case 'F': {
      auto s = poly({{1, 0}, {0, 0}, {0, 1}});
      append(s, poly({{0, 0.5f}, {0.72f, 0.5f}}));
      return s;
    }
    case 'G': {
      auto s = poly({{1, 0.16f}, {0.62f, 0}, {0.26f, 0}, {0, 0.24f}, {0, 0.76f}, {0.26f, 1}, {0.7f, 1}, {1, 0.8f}, {1, 0.55f}, {0.55f, 0.55f}});
      return s;
    }
    case 'H': {
      auto s = poly({{0, 0}, {0, 1}});
      append(s, poly({{1, 0}, {1, 1}}));
      append(s, poly({{0, 0.5f}, {1, 0.5f}}));
      return s;
    }
    case 'I': {
      auto s = poly({{0.2f, 0}, {0.8f, 0}});
      append(s, poly({{0.5f, 0}, {0.5f, 1}}));
      append(s, poly({{0.2f, 1}, {0.8f, 1}}));
      return s;
    }
    case 'J': {
      auto s = poly({{0.3f, 0}, {1, 0}});
      append(s, poly({{0.74f, 0}, {0.74f, 0.78f}, {0.5f, 1}, {0.18f, 1}, {0, 0.8f}}));
      return s;
    }
    case 'K': {
      auto s = poly({{0, 0}, {0, 1}});
      append(s, poly({{1, 0}, {0, 0.52f}}));
      append(s, poly({{0.32f, 0.36f}, {1, 1}}));
      return s;
    }
    case 'L':
      return poly({{0, 0}, {0, 1}, {1, 1}});
    case 'M':
      return poly({{0, 1}, {0, 0}, {0.5f, 0.52f}, {1, 0}, {1, 1}});
    case 'N':
      return poly({{0, 1}, {0, 0}, {1, 1}, {1, 0}});
    case 'O':
      return poly({{0.3f, 0}, {0.7f, 0}, {1, 0.26f}, {1, 0.74f}, {0.7f, 1}, {0.3f, 1}, {0, 0.74f}, {0, 0.26f}, {0.3f, 0}});
    case 'P':
      return poly({{0, 1}, {0, 0}, {0.72f, 0}, {0.94f, 0.16f}, {0.94f, 0.4f}, {0.72f, 0.56f}, {0, 0.56f}});
    case 'Q': {
      auto s = letter_strokes('O');
      append(s, poly({{0.6f, 0.64f}, {1, 1}}));
      return s;
    }
    case 'R': {
      auto s = letter_strokes('P');
      append(s, poly({{0.5f, 0.56f}, {1, 1}}));
      return s;
    }
    case 'S':
      return poly({{1, 0.14f}, {0.66f, 0}, {0.3f, 0}, {0, 0.16f}, {0, 0.34f}, {0.34f, 0.48f}, {0.68f, 0.54f}, {1, 0.68f}, {1, 0.86f}, {0.66f, 1}, {0.26f, 1}, {0, 0.86f}});
    case 'T': {
      auto s = poly({{0, 0}, {1, 0}});
      append(s, poly({{0.5f, 0}, {0.5f, 1}}));
      return s;
    }
    case 'U':
      return poly({{0, 0}, {0, 0.74f}, {0.3f, 1}, {0.7f, 1}, {1, 0.74f}, {1, 0}});
    case 'V':
      return poly({{0, 0}, {0.5f, 1}, {1, 0}});
    case 'W':
      return poly({{0, 0}, {0.25f, 1}, {0.5f, 0.44f}, {0.75f, 1}, {1, 0}});
    case 'X': {
      auto s = poly({{0, 0}, {1, 1}});
      append(s, poly({{1, 0}, {0, 1}}));
      return s;
    }
    case 'Y': {
      auto s = poly({{0, 0}, {0.5f, 0.5f}, {1, 0}});
      append(s, poly({{0.5f, 0.5f}, {0.5f, 1}}));
      return s;
    }
    case 'Z':
      return poly({{0, 0}, {1, 0}, {0, 1}, {1, 1}});
    case '0': {
      auto s = letter_strokes('O');
      append(s, poly({{0.76f, 0.22f}, {0.24f, 0.78f}}));
      return s;
    }
    case '1': {
      auto s = poly({{0.2f, 0.26f}, {0.55f, 0}, {0.55f, 1}});
      append(s, poly({{0.2f, 1}, {0.9f, 1}}));
      return s;
    }
    case '2':
      return poly({{0, 0.2f}, {0.3f, 0}, {0.7f, 0}, {1, 0.2f}, {1, 0.4f}, {0, 1}, {1, 1}});
    case '3':
      return poly({{0, 0.12f}, {0.4f, 0}, {0.78f, 0.04f}, {0.95f, 0.2f}, {0.95f, 0.34f}, {0.58f, 0.48f}, {0.95f, 0.64f}, {0.95f, 0.82f}, {0.78f, 0.96f}, {0.4f, 1}, {0, 0.9f}});
    case '4': {
      auto s = poly({{0.7f, 1}, {0.7f, 0}, {0, 0.68f}, {1, 0.68f}});
      return s;
    }
    case '5':
      return poly({{1, 0}, {0, 0}, {0, 0.46f}, {0.6f, 0.4f}, {1, 0.6f}, {1, 0.8f}, {0.6f, 1}, {0, 0.94f}});
    case '6':
      return poly({{0.9f, 0}, {0.4f, 0.16f}, {0.06f, 0.5f}, {0, 0.76f}, {0.3f, 1}, {0.7f, 1}, {1, 0.8f}, {1, 0.6f}, {0.6f, 0.46f}, {0.06f, 0.6f}});
    case '7':
      return poly({{0, 0}, {1, 0}, {0.36f, 1}});
    case '8': {
      auto s = poly({{0.5f, 0}, {0.14f, 0.1f}, {0.14f, 0.34f}, {0.5f, 0.46f}, {0.86f, 0.34f}, {0.86f, 0.1f}, {0.5f, 0}});
      append(s, poly({{0.5f, 0.46f}, {0.08f, 0.6f}, {0.08f, 0.88f}, {0.5f, 1}, {0.92f, 0.88f}, {0.92f, 0.6f}, {0.5f, 0.46f}}));
      return s;
    }
    case '9':
      return poly({{0.1f, 1}, {0.6f, 0.84f}, {0.94f, 0.5f}, {1, 0.24f}, {0.7f, 0}, {0.3f, 0}, {0, 0.2f}, {0, 0.4f}, {0.4f, 0.54f}, {0.94f, 0.4f}});
    default:
      return {};
  }
}

// Stroke primitives for composite glyphs.
Strokes primitive(int id) {
  switch (id) {
    case 0: return poly({{0.05f, 0.12f}, {0.95f, 0.12f}});  // top bar
    case 1: return poly({{0.05f, 0.5f}, {0.95f, 0.5f}});    // mid bar
    case 2: return poly({{0.05f, 0.88f}, {0.95f, 0.88f}});  // bottom bar
    case 3: return poly({{0.12f, 0.05f}, {0.12f, 0.95f}});  // left post
    case 4: return poly({{0.5f, 0.05f}, {0.5f, 0.95f}});    // center post
    case 5: return poly({{0.88f, 0.05f}, {0.88f, 0.95f}});  // right post
    case 6: return poly({{0.08f, 0.08f}, {0.92f, 0.92f}});  // diagonal \
    case 7: return poly({{0.92f, 0.08f}, {0.08f, 0.92f}});  // diagonal /
    case 8:                                                  // box outline
      return poly({{0.1f, 0.1f}, {0.9f, 0.1f}, {0.9f, 0.9f}, {0.1f, 0.9f}, {0.1f, 0.1f}});
    case 9:                                                  // inner box
      return poly({{0.32f, 0.32f}, {0.68f, 0.32f}, {0.68f, 0.68f}, {0.32f, 0.68f}, {0.32f, 0.32f}});
    case 10: return poly({{0.5f, 0.0f}, {0.5f, 0.3f}});      // top tick
    case 11: return poly({{0.5f, 0.7f}, {0.5f, 1.0f}});      // bottom tick
    case 12: return poly({{0.05f, 0.3f}, {0.6f, 0.3f}});     // short upper bar
    case 13: return poly({{0.4f, 0.7f}, {0.95f, 0.7f}});     // short lower bar
    default: return {};
  }
}

// 3-5 primitives per composite glyph; chosen for mutually distinct rasters.
const std::array<std::vector<int>, 16> kCompositeCombos = {{
    {0, 2, 4},          // #
    {0, 1, 2, 4},       // $
    {8, 1, 4},          // %
    {8, 6, 7},          // &
    {1, 3, 5, 10},      // *
    {0, 4, 6},          // +
    {8, 1, 10},         // /
    {0, 2, 6, 7},       // <
    {9, 0, 2},          // =
    {1, 4, 6, 7},       // >
    {0, 3, 11},         // ?
    {2, 4, 7},          // @
    {9, 6, 7},          // ^
    {0, 1, 3, 13},      // _
    {1, 5, 7, 10},      // ~
    {8, 10, 11, 1, 12}, // |
}};

constexpr int kRefH = 32;
constexpr int kRefW = 24;
constexpr int kRefGap = 8;
constexpr float kStrokeRadius = 2.6f;  // in reference pixels

float dist_to_segment(float px, float py, const Seg& s) {
  float dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  float len2 = dx * dx + dy * dy;
  float t = len2 > 0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.f;
  t = std::min(1.f, std::max(0.f, t));
  float cx = s.x0 + t * dx, cy = s.y0 + t * dy;
  return std::sqrt((px - cx) * (px - cx) + (py - cy) * (py - cy));
}

GlyphFont::Raster rasterize(const Strokes& strokes) {
  GlyphFont::Raster r;
  r.h = kRefH;
  r.w = kRefW;
  r.ink.assign(static_cast<std::size_t>(kRefH) * kRefW, 0);
  // Inset so full-thickness strokes stay inside the cell.
  const float mx = kStrokeRadius + 0.5f;
  const float sx = kRefW - 2 * mx, sy = kRefH - 2 * mx;
  for (int y = 0; y < kRefH; ++y) {
    for (int x = 0; x < kRefW; ++x) {
      float px = x + 0.5f, py = y + 0.5f;
      for (const Seg& seg : strokes) {
        Seg s{mx + seg.x0 * sx, mx + seg.y0 * sy, mx + seg.x1 * sx, mx + seg.y1 * sy};
        if (dist_to_segment(px, py, s) <= kStrokeRadius) {
          r.ink[static_cast<std::size_t>(y) * kRefW + x] = 1;
          break;
        }
      }
    }
  }
  return r;
}

Strokes strokes_for(char c, const std::string& charset) {
  Strokes s = letter_strokes(c);
  if (!s.empty()) return s;
  // Composite glyphs: everything in the charset beyond letters and digits.
  std::size_t pos = charset.find(c);
  if (pos == std::string::npos || pos < 36) return {};
  const auto& combo = kCompositeCombos[(pos - 36) % kCompositeCombos.size()];
  for (int id : combo) append(s, primitive(id));
  return s;
}

}  // namespace

const std::string& GlyphFont::default_charset() {
  static const std::string cs =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789#$%&*+/<=>?@^_~|";
  return cs;
}

GlyphFont GlyphFont::builtin(const std::string& charset) {
  GlyphFont f;
  f.name_ = "glyphforge-mono-1";
  f.charset_ = charset;
  f.ref_h_ = kRefH;
  f.ref_w_ = kRefW;
  f.ref_gap_ = kRefGap;
  for (char c : charset) {
    Strokes s = strokes_for(c, charset);
    if (s.empty()) throw CharsetMiss(std::string("no strokes for character '") + c + "'");
    f.rasters_[c] = rasterize(s);
  }
  return f;
}

const GlyphFont::Raster& GlyphFont::raster(char c) const {
  auto it = rasters_.find(c);
  if (it == rasters_.end())
    throw CharsetMiss(std::string("character '") + c + "' not in font");
  return it->second;
}

}  // namespace glyphforge
