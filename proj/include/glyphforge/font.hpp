#pragma once

#include <map>
#include <string>
#include <vector>

#include "glyphforge/tensor.hpp"

namespace glyphforge {

// Built-in stroke font: uppercase Latin letters, digits, and a block of
// "composite" glyphs assembled from 3-5 stroke primitives to stand in for
// dense multi-stroke scripts. Glyphs are stored as binary rasters at a fixed
// reference size; rendering scales those rasters into target cells.
class GlyphFont {
 public:
  struct Raster {
    int h = 0, w = 0;
    std::vector<std::uint8_t> ink;  // row-major, 0 or 1

    std::uint8_t at(int y, int x) const { return ink[static_cast<std::size_t>(y) * w + x]; }
  };

  static const std::string& default_charset();
  static GlyphFont builtin(const std::string& charset = default_charset());

  const std::string& name() const { return name_; }
  const std::string& charset() const { return charset_; }
  bool has(char c) const { return rasters_.count(c) > 0; }
  const Raster& raster(char c) const;

  int ref_height() const { return ref_h_; }
  int ref_width() const { return ref_w_; }
  // Horizontal gap between adjacent glyph cells, in reference units.
  int ref_gap() const { return ref_gap_; }

 private:
  std::string name_;
  std::string charset_;
  int ref_h_ = 0, ref_w_ = 0, ref_gap_ = 0;
  std::map<char, Raster> rasters_;
};

}  // namespace glyphforge
