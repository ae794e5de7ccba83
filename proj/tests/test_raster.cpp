#include <doctest.h>

#include "glyphforge/canny.hpp"
#include "glyphforge/font.hpp"
#include "glyphforge/raster.hpp"
#include "glyphforge/rng.hpp"

using namespace glyphforge;

namespace {

const GlyphFont& font() {
  static GlyphFont f = GlyphFont::builtin();
  return f;
}

// Random disjoint line sets for property tests.
std::vector<TextLine> random_lines(rng::Stream& st, int H, int W, int max_lines) {
  std::vector<TextLine> lines;
  int want = st.range(0, max_lines);
  const std::string& cs = GlyphFont::default_charset();
  for (int k = 0; k < want; ++k) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      int len = st.range(1, 5);
      std::string text;
      for (int i = 0; i < len; ++i) text += cs[st.below(cs.size())];
      int h = st.range(8, H / 2);
      int w = st.range(h, W - 2);
      int x0 = st.range(0, W - w);
      int y0 = st.range(0, H - h);
      Rect r{x0, y0, x0 + w, y0 + h};
      bool clash = false;
      for (auto& l : lines)
        if (l.region.intersects(r)) clash = true;
      if (!clash) {
        lines.push_back({text, r});
        break;
      }
    }
  }
  return lines;
}

}  // namespace

TEST_SUITE("glyph-render") {

TEST_CASE("font provides binary rasters for the full charset") {
  for (char c : GlyphFont::default_charset()) {
    REQUIRE(font().has(c));
    const auto& r = font().raster(c);
    int ink = 0;
    for (auto v : r.ink) {
      CHECK((v == 0 || v == 1));
      ink += v;
    }
    CHECK(ink > 0);
  }
}

TEST_CASE("font glyphs are pairwise distinct") {
  const std::string& cs = GlyphFont::default_charset();
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t j = i + 1; j < cs.size(); ++j) {
      const auto& a = font().raster(cs[i]).ink;
      const auto& b = font().raster(cs[j]).ink;
      int diff = 0;
      for (std::size_t k = 0; k < a.size(); ++k) diff += a[k] != b[k];
      INFO("glyphs ", cs[i], " vs ", cs[j], " differ in ", diff, " px");
      CHECK(diff > 20);
    }
}

TEST_CASE("empty line set renders all-zero maps") {
  auto g = render_glyph_map({}, 64, 64, font());
  auto p = render_position_map({}, 64, 64);
  CHECK(g.data.sum() == 0.f);
  CHECK(p.data.sum() == 0.f);
}

TEST_CASE("single line stays inside its region") {
  std::vector<TextLine> lines{{"A", Rect{8, 8, 40, 24}}};
  auto g = render_glyph_map(lines, 64, 64, font());
  CHECK(g.data.sum() > 0.f);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (g.at3(y, x, 0) != 0.f) {
        CHECK(lines[0].region.contains(y, x));
        CHECK(g.at3(y, x, 0) == 1.f);
      }
}

TEST_CASE("two disjoint lines equal the pixelwise max of single renders") {
  std::vector<TextLine> a{{"AB", Rect{2, 2, 30, 14}}};
  std::vector<TextLine> b{{"7Q", Rect{4, 40, 60, 60}}};
  std::vector<TextLine> both{a[0], b[0]};
  auto ga = render_glyph_map(a, 64, 64, font());
  auto gb = render_glyph_map(b, 64, 64, font());
  auto gboth = render_glyph_map(both, 64, 64, font());
  for (std::int64_t i = 0; i < gboth.numel(); ++i)
    CHECK(gboth.data[i] == std::max(ga.data[i], gb.data[i]));
}

TEST_CASE("position map area arithmetic") {
  auto p = render_position_map({{"A", Rect{8, 8, 40, 24}}}, 64, 64);
  // counting oracle: every pixel strictly inside the rect and none outside
  int count = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      bool inside = x >= 8 && x < 40 && y >= 8 && y < 24;
      CHECK(p.at3(y, x, 0) == (inside ? 1.f : 0.f));
      count += p.at3(y, x, 0) != 0.f;
    }
  CHECK(count == (40 - 8) * (24 - 8));
  CHECK(p.data.sum() == doctest::Approx(512.f));
}

TEST_CASE("full-canvas region fills the position map") {
  auto p = render_position_map({{"A", Rect{0, 0, 64, 64}}}, 64, 64);
  CHECK(p.data.sum() == doctest::Approx(64.f * 64.f));
}

TEST_CASE("overlapping regions are rejected") {
  std::vector<TextLine> lines{{"A", Rect{0, 0, 20, 20}}, {"B", Rect{10, 10, 30, 30}}};
  CHECK_THROWS_AS(render_glyph_map(lines, 64, 64, font()), OverlappingRegions);
  CHECK_THROWS_AS(render_position_map(lines, 64, 64), OverlappingRegions);
}

TEST_CASE("charset miss is rejected") {
  std::vector<TextLine> lines{{"a", Rect{0, 0, 20, 20}}};
  CHECK_THROWS_AS(render_glyph_map(lines, 64, 64, font()), CharsetMiss);
}

TEST_CASE("masked image: trivial and pixelwise cases") {
  rng::Stream st(1, "mask-test");
  RasterImage src({64, 64, 3});
  for (auto& v : src.data) v = static_cast<float>(st.uniform());

  auto same = make_masked_image(src, {});
  CHECK((same.data == src.data).all());

  auto all = make_masked_image(src, {{"A", Rect{0, 0, 64, 64}}});
  CHECK(all.data.sum() == 0.f);

  std::vector<TextLine> one{{"A", Rect{8, 8, 40, 24}}};
  auto m = make_masked_image(src, one);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) {
        if (one[0].region.contains(y, x))
          CHECK(m.at3(y, x, c) == 0.f);
        else
          CHECK(m.at3(y, x, c) == src.at3(y, x, c));
      }
}

TEST_CASE("idempotent masking") {
  rng::Stream st(2, "idem");
  RasterImage src({32, 32, 3});
  for (auto& v : src.data) v = static_cast<float>(st.uniform());
  std::vector<TextLine> lines{{"AB", Rect{4, 4, 20, 12}}, {"C", Rect{4, 20, 12, 28}}};
  auto once = make_masked_image(src, lines);
  auto twice = make_masked_image(once, lines);
  CHECK((once.data == twice.data).all());
}

TEST_CASE("determinism: identical inputs give bit-identical outputs") {
  std::vector<TextLine> lines{{"XY7", Rect{3, 5, 50, 20}}};
  auto a = render_glyph_map(lines, 64, 64, font());
  auto b = render_glyph_map(lines, 64, 64, font());
  CHECK((a.data == b.data).all());
}

TEST_CASE("properties: support containment and translation equivariance") {
  // Acceptance runs 1000 sets; keep the unit sweep smaller.
  for (int iter = 0; iter < 60; ++iter) {
    rng::Stream st(100 + iter, "raster-prop");
    auto lines = random_lines(st, 48, 48, 2);
    auto g = render_glyph_map(lines, 64, 64, font());
    auto p = render_position_map(lines, 64, 64);
    for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g.data[i] <= p.data[i]);

    int dx = st.range(0, 10), dy = st.range(0, 10);
    auto shifted = lines;
    for (auto& l : shifted) {
      l.region.x0 += dx;
      l.region.x1 += dx;
      l.region.y0 += dy;
      l.region.y1 += dy;
    }
    auto gs = render_glyph_map(shifted, 64, 64, font());
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        float expect = (y >= dy && x >= dx) ? g.at3(y - dy, x - dx, 0) : 0.f;
        CHECK(gs.at3(y, x, 0) == expect);
      }
  }
}

TEST_CASE("glyph crop: deterministic, rejects empty, covers both halves") {
  TextLine ab{"AB", Rect{0, 0, 10, 10}};
  auto c1 = render_glyph_crop(ab, font());
  auto c2 = render_glyph_crop(ab, font());
  CHECK((c1.data == c2.data).all());
  CHECK_THROWS_AS(render_glyph_crop(TextLine{"", Rect{0, 0, 4, 4}}, font()),
                  ValidationError);
  float left = 0.f, right = 0.f;
  for (int y = 0; y < c1.dim(0); ++y)
    for (int x = 0; x < c1.dim(1); ++x)
      (x < c1.dim(1) / 2 ? left : right) += c1.at3(y, x, 0);
  CHECK(left > 0.f);
  CHECK(right > 0.f);
}

}  // TEST_SUITE

TEST_SUITE("canny") {

TEST_CASE("constant image has no edges") {
  RasterImage flat({32, 32, 1}, 0.6f);
  auto e = canny_edges(flat);
  CHECK(e.data.sum() == 0.f);
}

TEST_CASE("invalid thresholds are rejected") {
  RasterImage m({8, 8, 1});
  CHECK_THROWS_AS(canny_edges(m, 0.5f, 0.2f), InvalidThresholds);
  CHECK_THROWS_AS(canny_edges(m, 0.0f, 0.3f), InvalidThresholds);
  CHECK_THROWS_AS(canny_edges(m, 0.1f, 1.0f), InvalidThresholds);
}

TEST_CASE("filled square produces a thin boundary band") {
  RasterImage m({40, 40, 1});
  for (int y = 10; y < 30; ++y)
    for (int x = 10; x < 30; ++x) m.at3(y, x, 0) = 1.f;
  auto e = canny_edges(m);
  REQUIRE(e.data.sum() > 0.f);
  // boundary-trace oracle: every edge pixel within 1.5 px of the square's
  // perimeter, and each side of the perimeter is represented
  auto near_perimeter = [&](int y, int x) {
    float d = 1e9f;
    auto seg = [&](float px, float py, float qx, float qy) {
      float dx = qx - px, dy = qy - py;
      float t = ((x - px) * dx + (y - py) * dy) / (dx * dx + dy * dy);
      t = std::clamp(t, 0.f, 1.f);
      float cx = px + t * dx, cy = py + t * dy;
      d = std::min(d, std::hypot(x - cx, y - cy));
    };
    seg(9.5f, 9.5f, 29.5f, 9.5f);
    seg(9.5f, 29.5f, 29.5f, 29.5f);
    seg(9.5f, 9.5f, 9.5f, 29.5f);
    seg(29.5f, 9.5f, 29.5f, 29.5f);
    return d <= 1.5f;
  };
  int on_top = 0, on_bottom = 0, on_left = 0, on_right = 0;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x)
      if (e.at3(y, x, 0) != 0.f) {
        CHECK(near_perimeter(y, x));
        if (std::abs(y - 9.5f) < 2.f) ++on_top;
        if (std::abs(y - 29.5f) < 2.f) ++on_bottom;
        if (std::abs(x - 9.5f) < 2.f) ++on_left;
        if (std::abs(x - 29.5f) < 2.f) ++on_right;
      }
  CHECK(on_top >= 12);
  CHECK(on_bottom >= 12);
  CHECK(on_left >= 12);
  CHECK(on_right >= 12);
  // band is ~1 px wide: edge count close to perimeter length
  CHECK(e.data.sum() <= 4 * 21 * 2);

  // counting oracle: edges are sparser than the filled glyph
  CHECK(e.data.sum() < m.data.sum());
}

TEST_CASE("glyph edges are sparser than filled glyphs") {
  GlyphFont f = GlyphFont::builtin();
  auto g = render_glyph_map({{"B8#", Rect{4, 4, 60, 30}}}, 64, 64, f);
  auto e = canny_edges(g);
  CHECK(e.data.sum() > 0.f);
  CHECK(e.data.sum() < g.data.sum());
}

}  // TEST_SUITE
