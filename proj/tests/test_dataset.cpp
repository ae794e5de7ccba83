#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "glyphforge/dataset.hpp"
#include "glyphforge/errors.hpp"
#include "glyphforge/png_io.hpp"

using namespace glyphforge;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("glyphforge_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE("synth-data") {

TEST_CASE("caption template and quoted-text extraction") {
  std::vector<TextLine> lines{{"AB", Rect{0, 0, 8, 8}}, {"C7", Rect{0, 10, 8, 18}}};
  std::string cap = make_caption(lines);
  CHECK(cap == "a scene with text \"AB\" and text \"C7\"");
  auto q = quoted_texts(cap);
  REQUIRE(q.size() == 2);
  CHECK(q[0] == "AB");
  CHECK(q[1] == "C7");
  CHECK(quoted_texts("no quotes here").empty());
}

TEST_CASE("png round trip is exact on the quantized grid") {
  auto dir = temp_dir("png");
  rng::Stream st(3, "png");
  RasterImage img({17, 23, 3});
  for (auto& v : img.data)
    v = static_cast<float>(st.range(0, 255)) / 255.f;
  save_png((dir / "x.png").string(), img);
  auto back = load_png((dir / "x.png").string());
  REQUIRE(back.shape == img.shape);
  CHECK((back.data == img.data).all());
  fs::remove_all(dir);
}

TEST_CASE("count zero gives an empty manifest and no images") {
  auto dir = temp_dir("empty");
  GenConfig cfg;
  cfg.count = 0;
  auto m = generate_dataset(cfg, 1, dir.string());
  CHECK(m.samples.empty());
  CHECK(!fs::exists(dir / "images"));
  auto loaded = load_manifest((dir / "manifest.jsonl").string());
  CHECK(loaded.samples.empty());
  CHECK(loaded.charset == cfg.charset);
  fs::remove_all(dir);
}

TEST_CASE("same config and seed give byte-identical outputs") {
  GenConfig cfg;
  cfg.count = 12;
  auto d1 = temp_dir("det1");
  auto d2 = temp_dir("det2");
  generate_dataset(cfg, 7, d1.string(), 1);
  generate_dataset(cfg, 7, d2.string(), 2);  // workers must not matter
  CHECK(file_bytes(d1 / "manifest.jsonl") == file_bytes(d2 / "manifest.jsonl"));
  for (int i = 0; i < cfg.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "images/%06d.png", i);
    CHECK(file_bytes(d1 / name) == file_bytes(d2 / name));
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("generated samples pass validation and round-trip the manifest") {
  GenConfig cfg;
  cfg.count = 60;
  auto dir = temp_dir("sweep");
  auto m = generate_dataset(cfg, 11, dir.string());
  CHECK(validate_manifest(m).empty());

  auto loaded = load_manifest((dir / "manifest.jsonl").string());
  REQUIRE(loaded.samples.size() == m.samples.size());
  CHECK(loaded.charset == m.charset);
  CHECK(loaded.canvas_h == m.canvas_h);
  CHECK(loaded.seed == m.seed);
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    CHECK(loaded.samples[i].image_path == m.samples[i].image_path);
    CHECK(loaded.samples[i].caption == m.samples[i].caption);
    CHECK(loaded.samples[i].split == m.samples[i].split);
    REQUIRE(loaded.samples[i].lines.size() == m.samples[i].lines.size());
    for (std::size_t l = 0; l < m.samples[i].lines.size(); ++l) {
      CHECK(loaded.samples[i].lines[l].text == m.samples[i].lines[l].text);
      CHECK(loaded.samples[i].lines[l].region.x0 == m.samples[i].lines[l].region.x0);
      CHECK(loaded.samples[i].lines[l].region.y1 == m.samples[i].lines[l].region.y1);
    }
  }
  // all three splits appear under the 90/5/5 hash split at this size
  int train = 0, val = 0, test = 0;
  for (const auto& s : m.samples) {
    train += s.split == "train";
    val += s.split == "val";
    test += s.split == "test";
  }
  CHECK(train > 40);
  CHECK(val + test > 0);
  fs::remove_all(dir);
}

TEST_CASE("validator reports planted defects") {
  DatasetManifest m;
  m.charset = GlyphFont::default_charset();
  m.canvas_h = 64;
  m.canvas_w = 64;

  EditSample overlap;
  overlap.image_path = "images/000000.png";
  overlap.lines = {{"AB", Rect{0, 0, 20, 20}}, {"CD", Rect{10, 10, 30, 30}}};
  overlap.caption = make_caption(overlap.lines);
  overlap.split = "train";

  EditSample charset_miss;
  charset_miss.image_path = "images/000001.png";
  charset_miss.lines = {{"ab", Rect{0, 0, 20, 10}}};
  charset_miss.caption = make_caption(charset_miss.lines);
  charset_miss.split = "val";

  EditSample good;
  good.image_path = "images/000002.png";
  good.lines = {{"AB", Rect{2, 2, 30, 12}}};
  good.caption = make_caption(good.lines);
  good.split = "test";

  m.samples = {overlap, charset_miss, good};
  auto bad = validate_manifest(m);
  REQUIRE(bad.size() >= 2);
  bool saw_overlap = false, saw_charset = false;
  for (const auto& b : bad) {
    if (b.find("sample 0") == 0 && b.find("overlap") != std::string::npos)
      saw_overlap = true;
    if (b.find("sample 1") == 0 && b.find("CharsetMiss") != std::string::npos)
      saw_charset = true;
    CHECK(b.find("sample 2") != 0);
  }
  CHECK(saw_overlap);
  CHECK(saw_charset);
}

TEST_CASE("parse errors carry line numbers") {
  auto dir = temp_dir("parse");
  {
    std::ofstream out(dir / "manifest.jsonl");
    out << R"({"type":"header","version":1,"charset":"AB","canvas":[8,8],"seed":0,"count":0})"
        << "\n";
    out << "{not json}\n";
  }
  try {
    load_manifest((dir / "manifest.jsonl").string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("line class tagging") {
  const std::string& cs = GlyphFont::default_charset();
  CHECK(is_composite_line("#$%", cs));
  CHECK(!is_composite_line("AB", cs));
  CHECK(!is_composite_line("A#", cs));
  CHECK(!is_composite_line("", cs));
}

}  // TEST_SUITE
