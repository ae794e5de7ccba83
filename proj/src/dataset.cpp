#include "glyphforge/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "glyphforge/errors.hpp"
#include "glyphforge/png_io.hpp"

namespace glyphforge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string make_caption(const std::vector<TextLine>& lines) {
  std::string c = "a scene";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    c += (i == 0 ? " with text \"" : " and text \"");
    c += lines[i].text;
    c += "\"";
  }
  return c;
}

std::vector<std::string> quoted_texts(const std::string& caption) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t a = caption.find('"', pos);
    if (a == std::string::npos) break;
    std::size_t b = caption.find('"', a + 1);
    if (b == std::string::npos) break;
    out.push_back(caption.substr(a + 1, b - a - 1));
    pos = b + 1;
  }
  return out;
}

std::string split_of_index(std::int64_t index) {
  std::uint64_t r = rng::splitmix64(static_cast<std::uint64_t>(index)) % 100;
  if (r < 90) return "train";
  if (r < 95) return "val";
  return "test";
}

bool is_composite_line(const std::string& text, const std::string& charset) {
  for (char c : text) {
    std::size_t p = charset.find(c);
    if (p == std::string::npos || p < 36) return false;
  }
  return !text.empty();
}

RasterImage synth_background(rng::Stream& st, int h, int w) {
  RasterImage bg({h, w, 3});
  int family = static_cast<int>(st.below(3));
  float c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = static_cast<float>(st.uniform());
    c1[c] = static_cast<float>(st.uniform());
  }
  if (family == 0) {  // flat
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) bg.at3(y, x, c) = c0[c];
  } else if (family == 1) {  // two-color gradient
    bool vertical = st.chance(0.5);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float t = vertical ? static_cast<float>(y) / (h - 1)
                           : static_cast<float>(x) / (w - 1);
        for (int c = 0; c < 3; ++c) bg.at3(y, x, c) = c0[c] * (1 - t) + c1[c] * t;
      }
  } else {  // checker texture
    int cell = st.range(4, 16);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        bool a = ((y / cell) + (x / cell)) % 2 == 0;
        for (int c = 0; c < 3; ++c) bg.at3(y, x, c) = a ? c0[c] : c1[c];
      }
  }
  return bg;
}

namespace {

float luma(const float* rgb) {
  return 0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2];
}

}  // namespace

std::vector<float> pick_ink_color(rng::Stream& st, const RasterImage& bg,
                                  const Rect& region) {
  float mean[3] = {0, 0, 0};
  int n = 0;
  for (int y = region.y0; y < region.y1; ++y)
    for (int x = region.x0; x < region.x1; ++x, ++n)
      for (int c = 0; c < 3; ++c) mean[c] += bg.at3(y, x, c);
  for (int c = 0; c < 3; ++c) mean[c] /= std::max(1, n);
  float bg_l = luma(mean);
  // Resample until the ink clears a luminance-contrast floor; fall back to
  // black/white against the region if the draw keeps missing.
  for (int tries = 0; tries < 32; ++tries) {
    float ink[3] = {static_cast<float>(st.uniform()), static_cast<float>(st.uniform()),
                    static_cast<float>(st.uniform())};
    if (std::abs(luma(ink) - bg_l) >= 0.35f) return {ink[0], ink[1], ink[2]};
  }
  return bg_l > 0.5f ? std::vector<float>{0.f, 0.f, 0.f}
                     : std::vector<float>{1.f, 1.f, 1.f};
}

RenderStyle jitter_style(rng::Stream& st) {
  RenderStyle style;
  style.coverage = static_cast<float>(st.uniform(0.28, 0.45));
  double r = st.uniform();
  style.dilate = r < 0.70 ? 0 : (r < 0.88 ? 1 : -1);
  return style;
}

namespace {

struct PlacedSample {
  std::vector<TextLine> lines;
  RasterImage image;
};

// Line cell aspect (width/height) for a text of k glyphs at reference metrics.
double line_aspect(const GlyphFont& font, int k) {
  return (k * font.ref_width() + (k - 1) * font.ref_gap()) /
         static_cast<double>(font.ref_height());
}

std::string rand_text(rng::Stream& st, const GenConfig& cfg) {
  int len = st.range(cfg.text_min, cfg.text_max);
  bool composite = st.chance(cfg.composite_frac);
  // Letters+digits occupy charset[0..35]; composite glyphs the rest.
  int lo = composite ? 36 : 0;
  int hi = composite ? static_cast<int>(cfg.charset.size()) - 1 : 35;
  std::string t;
  for (int i = 0; i < len; ++i) t += cfg.charset[st.range(lo, hi)];
  return t;
}

PlacedSample build_sample(const GenConfig& cfg, const GlyphFont& font,
                          std::uint64_t seed, std::int64_t index) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt >= 100)
      throw InfeasiblePlacement("sample " + std::to_string(index) +
                                ": no disjoint placement after 100 redraws");
    rng::Stream st(seed, "sample", static_cast<std::uint64_t>(index), attempt);
    int nlines = st.range(cfg.lines_min, cfg.lines_max);
    std::vector<TextLine> lines;
    bool ok = true;
    for (int li = 0; li < nlines && ok; ++li) {
      std::string text = rand_text(st, cfg);
      double aspect = line_aspect(font, static_cast<int>(text.size()));
      bool placed = false;
      for (int t = 0; t < 100; ++t) {
        int hmax = std::min(cfg.canvas_h - 2,
                            static_cast<int>((cfg.canvas_w - 2) / aspect));
        if (hmax < 8) break;
        int h = st.range(8, std::min(hmax, std::max(8, cfg.canvas_h * 3 / 8)));
        int w = static_cast<int>(std::ceil(h * aspect));
        if (w > cfg.canvas_w - 2) continue;
        int x0 = st.range(1, cfg.canvas_w - 1 - w);
        int y0 = st.range(1, cfg.canvas_h - 1 - h);
        Rect r{x0, y0, x0 + w, y0 + h};
        Rect padded{r.x0 - 1, r.y0 - 1, r.x1 + 1, r.y1 + 1};
        bool clash = false;
        for (const TextLine& prev : lines)
          if (padded.intersects(prev.region)) clash = true;
        if (clash) continue;
        lines.push_back({text, r});
        placed = true;
        break;
      }
      if (!placed) ok = false;
    }
    if (!ok) continue;  // redraw the whole sample

    PlacedSample out;
    out.lines = lines;
    out.image = synth_background(st, cfg.canvas_h, cfg.canvas_w);
    for (const TextLine& l : lines) {
      std::vector<float> ink = pick_ink_color(st, out.image, l.region);
      paint_line(out.image, l, font, jitter_style(st), ink);
    }
    return out;
  }
}

json line_to_json(const TextLine& l) {
  return json{{"text", l.text},
              {"region", {l.region.x0, l.region.y0, l.region.x1, l.region.y1}}};
}

TextLine line_from_json(const json& j) {
  TextLine l;
  l.text = j.at("text").get<std::string>();
  auto r = j.at("region");
  l.region = Rect{r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(),
                  r.at(3).get<int>()};
  return l;
}

}  // namespace

DatasetManifest generate_dataset(const GenConfig& config, std::uint64_t seed,
                                 const std::string& out_dir, int workers) {
  GlyphFont font = GlyphFont::builtin(config.charset);
  DatasetManifest m;
  m.charset = config.charset;
  m.canvas_h = config.canvas_h;
  m.canvas_w = config.canvas_w;
  m.seed = seed;
  m.base_dir = out_dir;
  m.samples.resize(config.count);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (config.count > 0) fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw IoFailure("cannot create output directory: " + out_dir);

  std::exception_ptr first_error;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers))
  for (int i = 0; i < config.count; ++i) {
    try {
      PlacedSample ps = build_sample(config, font, seed, i);
      char name[32];
      std::snprintf(name, sizeof(name), "images/%06d.png", i);
      save_png((fs::path(out_dir) / name).string(), ps.image);
      EditSample& s = m.samples[i];
      s.image_path = name;
      s.caption = make_caption(ps.lines);
      s.lines = std::move(ps.lines);
      s.split = split_of_index(i);
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  write_manifest(m, (fs::path(out_dir) / "manifest.jsonl").string());
  return m;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write manifest: " + path);
  json header{{"type", "header"},
              {"version", 1},
              {"charset", m.charset},
              {"canvas", {m.canvas_h, m.canvas_w}},
              {"seed", m.seed},
              {"count", m.samples.size()}};
  out << header.dump() << "\n";
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    const EditSample& s = m.samples[i];
    json lines = json::array();
    for (const TextLine& l : s.lines) lines.push_back(line_to_json(l));
    json rec{{"type", "sample"}, {"id", i},          {"image", s.image_path},
             {"caption", s.caption}, {"split", s.split}, {"lines", lines}};
    out << rec.dump() << "\n";
  }
  if (!out.good()) throw IoFailure("write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open manifest: " + path);
  DatasetManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        m.charset = j.at("charset").get<std::string>();
        m.canvas_h = j.at("canvas").at(0).get<int>();
        m.canvas_w = j.at("canvas").at(1).get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        have_header = true;
      } else if (type == "sample") {
        EditSample s;
        s.image_path = j.at("image").get<std::string>();
        s.caption = j.at("caption").get<std::string>();
        s.split = j.at("split").get<std::string>();
        for (const auto& lj : j.at("lines")) s.lines.push_back(line_from_json(lj));
        m.samples.push_back(std::move(s));
      } else {
        throw ParseError("manifest line " + std::to_string(lineno) +
                         ": unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw ParseError("manifest has no header record");
  return m;
}

std::vector<std::string> validate_manifest(const DatasetManifest& m) {
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    const EditSample& s = m.samples[i];
    auto flag = [&](const std::string& why) {
      bad.push_back("sample " + std::to_string(i) + ": " + why);
    };
    if (s.lines.empty()) flag("no text lines");
    if (s.split != "train" && s.split != "val" && s.split != "test")
      flag("bad split '" + s.split + "'");
    for (const TextLine& l : s.lines) {
      if (l.text.empty()) flag("empty line text");
      if (!l.region.valid_in(m.canvas_h, m.canvas_w))
        flag("region out of canvas bounds");
      for (char c : l.text)
        if (m.charset.find(c) == std::string::npos)
          flag(std::string("CharsetMiss: character '") + c + "' not in charset");
    }
    for (std::size_t a = 0; a < s.lines.size(); ++a)
      for (std::size_t b = a + 1; b < s.lines.size(); ++b)
        if (s.lines[a].region.intersects(s.lines[b].region))
          flag("overlapping regions");
    std::vector<std::string> quoted = quoted_texts(s.caption);
    if (quoted.size() != s.lines.size()) {
      flag("caption quotes " + std::to_string(quoted.size()) + " texts, expected " +
           std::to_string(s.lines.size()));
    } else {
      for (std::size_t a = 0; a < quoted.size(); ++a)
        if (quoted[a] != s.lines[a].text) flag("caption text mismatch");
    }
  }
  return bad;
}

RasterImage load_sample_image(const DatasetManifest& m, const EditSample& s) {
  fs::path p = fs::path(m.base_dir) / s.image_path;
  if (!fs::exists(p)) throw MissingImage("image not found: " + p.string());
  return load_png(p.string());
}

std::vector<int> indices_of_split(const DatasetManifest& m, const std::string& split) {
  std::vector<int> out;
  for (std::size_t i = 0; i < m.samples.size(); ++i)
    if (m.samples[i].split == split) out.push_back(static_cast<int>(i));
  return out;
}

Tensor<float> stack_images(const std::vector<const RasterImage*>& imgs) {
  require_shape(!imgs.empty(), "stack_images: empty");
  const int H = imgs[0]->dim(0), W = imgs[0]->dim(1), C = imgs[0]->dim(2);
  Tensor<float> out({static_cast<int>(imgs.size()), H, W, C});
  for (std::size_t n = 0; n < imgs.size(); ++n) {
    require_shape(imgs[n]->shape == imgs[0]->shape, "stack_images: shape mismatch");
    out.data.segment(n * imgs[0]->numel(), imgs[0]->numel()) = imgs[n]->data;
  }
  return out;
}

}  // namespace glyphforge
