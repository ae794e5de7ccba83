#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "glyphforge/codec.hpp"
#include "glyphforge/conditioning.hpp"
#include "glyphforge/denoiser.hpp"
#include "glyphforge/losses.hpp"
#include "glyphforge/metrics.hpp"
#include "glyphforge/recognizer.hpp"

namespace glyphforge {

struct TrainConfig {
  std::string visual = "glyph-vae";  // none | multi-encoder | canny | glyph-vae
  std::string text = "t5-alone";     // t5-alone | t5-ocr | t5-byt5
  LossConfig loss;
  int batch = 32;
  float lr = 1e-3f;
  float weight_decay = 0.01f;
  int warmup_steps = 100;
  std::uint64_t seed = 0;
  std::int64_t ckpt_every = 2000;
  // architecture
  int width = 128;
  int depth = 6;
  int heads = 4;
  int patch = 1;
  int text_dim = 64;
  int textenc_depth = 2;
  int multi_enc_channels = 24;
  int sample_steps = 25;  // default sampler steps for evaluation/editing

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  std::uint64_t content_hash() const;
  void validate() const;
};

// The jointly-trained model stack: denoiser, text encoder, auxiliary
// embedders, and (for the multi-encoder variant) the visual encoders. All
// parameters live in one store so one optimizer drives them.
struct EditorStack {
  VisualVariant visual = VisualVariant::glyph_vae;
  TextVariant text = TextVariant::t5_alone;
  TrainConfig cfg;
  std::string charset;
  std::vector<SegmentSpan> layout;
  ParamStore<float> params;
  TextEncoderModel<float> textenc;
  AuxEmbedderModel<float> aux;
  VisualEncoders<float> visenc;  // used only for multi-encoder
  DenoiserModel<float> denoiser;

  static EditorStack create(const TrainConfig& cfg, const std::string& charset,
                            int codec_c, int codec_f, int canvas_h, int canvas_w,
                            std::uint64_t seed);
};

void save_editor(const EditorStack& stack, const std::string& dir);
EditorStack load_editor(const std::string& dir);

struct TrainResult {
  std::int64_t completed_steps = 0;
  std::string final_dir;
  bool resumed_noop = false;
};

// Two-stage training per the loss schedule. Writes into run_dir:
//   config.json, run_manifest.json, run.jsonl, ckpt-<step>/, final/.
TrainResult train(const DatasetManifest& manifest, const TrainConfig& config,
                  const CodecModel<float>& codec, const RecognizerModel<float>& ocr,
                  const std::string& run_dir, std::ostream* log = nullptr);

// Continues an interrupted run from its latest checkpoint; checks config and
// frozen-component hashes, and is a no-op on finished runs.
TrainResult resume(const std::string& run_dir, const DatasetManifest& manifest,
                   const CodecModel<float>& codec, const RecognizerModel<float>& ocr,
                   std::ostream* log = nullptr);

// ------------------------------------------------------------------- editing

// Runs conditioned flow sampling for a batch of samples and composites the
// decodes into the sources (pixels outside the position mask are preserved
// exactly).
std::vector<RasterImage> edit_batch(const EditorStack& stack,
                                    const CodecModel<float>& codec,
                                    const RecognizerModel<float>& ocr,
                                    const GlyphFont& font,
                                    const std::vector<RasterImage>& sources,
                                    const std::vector<TextSampleInput>& inputs,
                                    int steps, std::uint64_t seed);

struct EvalConfig {
  std::string split = "test";
  int max_samples = 0;  // 0 = all
  int batch = 32;
  int sample_steps = 25;
  bool ground_truth = false;  // evaluate sources instead of edited images
  std::uint64_t seed = 0;
  std::string grid_path;  // optional side-by-side dump
};

EvalReport evaluate_model(const DatasetManifest& manifest, const EditorStack& stack,
                          const CodecModel<float>& codec,
                          const RecognizerModel<float>& ocr, const EvalConfig& cfg,
                          std::ostream* log = nullptr);

}  // namespace glyphforge
