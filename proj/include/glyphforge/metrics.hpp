#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glyphforge/dataset.hpp"
#include "glyphforge/image.hpp"

namespace glyphforge {

int levenshtein(const std::string& a, const std::string& b);

// Normalized edit-distance similarity: 1 - lev(a,b)/max(|a|,|b|); 1 when both
// strings are empty (documented convention).
double ned(const std::string& a, const std::string& b);

// Frechet distance between Gaussians, directly from statistics. The matrix
// square root uses the eigendecomposition of the symmetrized product with
// negative eigenvalues clamped to zero.
double fid_from_stats(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& sigma1,
                      const Eigen::VectorXd& mu2, const Eigen::MatrixXd& sigma2);

// Fits Gaussians to two feature sets (rows = samples). Each set needs at
// least d+1 members (CovarianceRankError) and finite values
// (NonFiniteFeatures).
double fid(const std::vector<Eigen::VectorXd>& real,
           const std::vector<Eigen::VectorXd>& generated);

struct LineResult {
  std::string target;
  std::string predicted;
  double ned = 0.0;
  bool match = false;
  std::string line_class;  // "easy" | "complex"
};

struct SampleResult {
  int sample_id = 0;
  std::vector<LineResult> lines;
};

struct ClassAggregate {
  int line_count = 0;
  double sen_acc = 0.0;
  double ned = 0.0;
};

// Per-dataset metric aggregate with a per-sample breakdown. `fid` is absent
// (has_fid = false) when either feature set is too small.
struct EvalReport {
  int version = 1;
  int sample_count = 0;
  int line_count = 0;
  double sen_acc = 0.0;
  double ned = 0.0;
  bool has_fid = false;
  double fid = 0.0;
  std::string fid_note;
  ClassAggregate easy;
  ClassAggregate complex_glyphs;
  std::vector<SampleResult> samples;
};

nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

// Recognition hook: maps raw region pixels (cropped from a full image) to a
// predicted string. Production code wires the recognizer; tests can stub it.
using RecognizeFn = std::function<std::string(const RasterImage& region_pixels)>;

// Fraction of lines whose recognized crop exactly matches the target text.
double sentence_accuracy(const std::vector<const EditSample*>& samples,
                         const std::vector<RasterImage>& images,
                         const RecognizeFn& recognize);

// Full OCR-side aggregation over edited images; `reference` supplies the real
// distribution for FID. `features` maps an image batch to one row per image;
// pass an empty function to skip FID.
using FeatureFn = std::function<std::vector<Eigen::VectorXd>(const std::vector<RasterImage>&)>;

EvalReport evaluate_images(const std::vector<const EditSample*>& samples,
                           const std::vector<int>& sample_ids,
                           const std::vector<RasterImage>& edited,
                           const std::vector<RasterImage>& reference,
                           const RecognizeFn& recognize, const FeatureFn& features,
                           const std::string& charset);

}  // namespace glyphforge
