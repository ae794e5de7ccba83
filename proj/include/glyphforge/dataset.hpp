#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glyphforge/font.hpp"
#include "glyphforge/raster.hpp"
#include "glyphforge/rng.hpp"

namespace glyphforge {

// One training/eval record: a source image containing rendered text lines,
// the caption describing them, and the line geometry.
struct EditSample {
  std::string image_path;  // relative to the manifest directory
  std::string caption;
  std::vector<TextLine> lines;
  std::string split;  // train | val | test
};

struct DatasetManifest {
  std::string charset;
  int canvas_h = 0, canvas_w = 0;
  std::uint64_t seed = 0;
  std::vector<EditSample> samples;
  std::string base_dir;  // directory the manifest was written to / loaded from
};

struct GenConfig {
  int count = 1000;
  int canvas_h = 64, canvas_w = 64;
  int lines_min = 1, lines_max = 2;
  int text_min = 2, text_max = 8;
  double composite_frac = 0.5;  // chance a line uses the composite alphabet
  std::string charset = GlyphFont::default_charset();
};

// Caption template: `a scene with text "T1" and text "T2" ...`.
std::string make_caption(const std::vector<TextLine>& lines);
// Quoted segments of a caption, in order.
std::vector<std::string> quoted_texts(const std::string& caption);

// 90/5/5 split by hash of the sample index.
std::string split_of_index(std::int64_t index);

// A line counts as composite when every character is a composite glyph
// (charset positions past letters and digits).
bool is_composite_line(const std::string& text, const std::string& charset);

// Background synthesis and ink-color selection shared with recognizer
// training augmentation. Backgrounds: flat color, two-color gradient, checker.
RasterImage synth_background(rng::Stream& st, int h, int w);
std::vector<float> pick_ink_color(rng::Stream& st, const RasterImage& bg,
                                  const Rect& region);
RenderStyle jitter_style(rng::Stream& st);

// Generates `config.count` samples under out_dir (images/ + manifest.jsonl).
// Fully deterministic in (config, seed); workers only parallelize the work.
DatasetManifest generate_dataset(const GenConfig& config, std::uint64_t seed,
                                 const std::string& out_dir, int workers = 1);

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// All invariant violations, one human-readable string each; empty when valid.
std::vector<std::string> validate_manifest(const DatasetManifest& m);

// Loads a sample's image from disk (throws MissingImage).
RasterImage load_sample_image(const DatasetManifest& m, const EditSample& s);

std::vector<int> indices_of_split(const DatasetManifest& m, const std::string& split);

// Stacks equally-shaped (H,W,C) images into an (N,H,W,C) batch tensor.
Tensor<float> stack_images(const std::vector<const RasterImage*>& imgs);

}  // namespace glyphforge
