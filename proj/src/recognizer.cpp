#include "glyphforge/recognizer.hpp"

#include <filesystem>
#include <iostream>

#include "glyphforge/checkpoint.hpp"
#include "glyphforge/errors.hpp"

namespace glyphforge {

namespace fs = std::filesystem;

namespace {

std::string random_text(rng::Stream& st, const std::string& charset, int len_min,
                        int len_max) {
  int len = st.range(len_min, len_max);
  std::string t;
  for (int i = 0; i < len; ++i)
    t += charset[st.below(charset.size())];
  return t;
}

// Scene-style crop: text painted over a synthetic background patch shaped like
// a dataset region, then pushed through the same normalization the evaluation
// pipeline uses. Matches the distribution the recognizer sees at eval time.
RasterImage scene_crop(rng::Stream& st, const GlyphFont& font, const std::string& text) {
  double aspect = (text.size() * font.ref_width() +
                   (text.size() - 1) * font.ref_gap()) /
                  static_cast<double>(font.ref_height());
  int h = st.range(8, 24);
  int w = static_cast<int>(std::ceil(h * aspect)) + st.range(0, 6);
  w = std::min(w, 256);
  RasterImage patch = synth_background(st, h, w);
  Rect r{0, 0, w, h};
  std::vector<float> ink = pick_ink_color(st, patch, r);
  paint_line(patch, TextLine{text, r}, font, jitter_style(st), ink);
  return patch;
}

RasterImage clean_crop(rng::Stream& st, const GlyphFont& font, const std::string& text,
                       bool jitter) {
  RenderStyle style = jitter ? jitter_style(st) : RenderStyle{};
  return render_glyph_crop(TextLine{text, Rect{0, 0, 64, 16}}, font, 16, 64, style);
}

void add_noise(rng::Stream& st, RasterImage& img, float sigma) {
  if (sigma <= 0.f) return;
  for (auto& v : img.data)
    v = std::min(1.f, std::max(0.f, v + static_cast<float>(st.normal(0.0, sigma))));
}

}  // namespace

std::pair<TensorF, std::vector<std::string>> make_clean_eval_crops(
    const GlyphFont& font, int count, std::uint64_t seed, int len_min, int len_max) {
  std::vector<RasterImage> crops;
  std::vector<std::string> texts;
  for (int i = 0; i < count; ++i) {
    rng::Stream st(seed, "ocr-eval", static_cast<std::uint64_t>(i));
    std::string text = random_text(st, font.charset(), len_min, len_max);
    crops.push_back(clean_crop(st, font, text, false));
    texts.push_back(text);
  }
  std::vector<const RasterImage*> ptrs;
  for (auto& c : crops) ptrs.push_back(&c);
  return {stack_images(ptrs), texts};
}

float exact_match_accuracy(const RecognizerModel<float>& model, const TensorF& crops,
                           const std::vector<std::string>& texts) {
  std::vector<std::string> pred = model.recognize_batch(crops);
  int hit = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) hit += pred[i] == texts[i];
  return texts.empty() ? 0.f : static_cast<float>(hit) / texts.size();
}

RecognizerModel<float> train_recognizer(const GlyphFont& font,
                                        const RecognizerTrainConfig& config,
                                        std::ostream* log) {
  RecognizerModel<float> model =
      RecognizerModel<float>::create(config.charset, config.seed);
  auto [val_crops, val_texts] =
      make_clean_eval_crops(font, config.val_crops, config.seed + 7771);

  for (int step = 1; step <= config.max_steps; ++step) {
    rng::Stream st(config.seed, "ocr-batch", static_cast<std::uint64_t>(step));
    std::vector<RasterImage> crops;
    std::vector<std::vector<int>> targets;
    for (int i = 0; i < config.batch; ++i) {
      std::string text = random_text(st, config.charset, 1, 8);
      double mode = st.uniform();
      RasterImage crop =
          mode < 0.65 ? normalize_crop(scene_crop(st, font, text))
                      : clean_crop(st, font, text, /*jitter=*/mode < 0.9);
      add_noise(st, crop, static_cast<float>(st.uniform(0.0, 0.06)));
      crops.push_back(std::move(crop));
      std::vector<int> ids;
      for (char c : text)
        ids.push_back(static_cast<int>(config.charset.find(c)));
      targets.push_back(std::move(ids));
    }
    std::vector<const RasterImage*> ptrs;
    for (auto& c : crops) ptrs.push_back(&c);
    TensorF batch = stack_images(ptrs);

    Tape<float> tape;
    Frame<float> fr(tape);
    auto lg = model.logits(fr, tape.constant(batch));
    CtcResult<float> ctc = ctc_loss(lg.val(), targets, model.blank());
    if (!std::isfinite(ctc.loss))
      throw NonFiniteLoss("recognizer training diverged at step " +
                          std::to_string(step));
    auto loss = ops::external_grad_loss(lg, ctc.loss, std::move(ctc.grad));
    tape.backward(loss);
    model.params.zero_grads();
    fr.collect_grads();
    float warm = std::min(1.f, step / 100.f);
    model.params.adamw(step, config.lr * warm, 0.9f, 0.99f, 1e-8f, 0.f);

    if (step % config.val_every == 0 || step == config.max_steps) {
      float acc = exact_match_accuracy(model, val_crops, val_texts);
      if (log)
        (*log) << "ocr step " << step << " ctc " << ctc.loss << " val_acc " << acc
               << "\n";
      if (acc >= config.accuracy_target + 0.005f) break;
    }
  }
  float final_acc = exact_match_accuracy(model, val_crops, val_texts);
  if (final_acc < config.accuracy_target)
    throw NonConvergence("recognizer accuracy " + std::to_string(final_acc) +
                         " below target " + std::to_string(config.accuracy_target));
  model.frozen = true;
  return model;
}

void save_recognizer(const RecognizerModel<float>& m, const std::string& dir,
                     const std::string& stem) {
  fs::create_directories(dir);
  save_param_blob((fs::path(dir) / (stem + ".bin")).string(), m.params);
  auto radii = RecognizerModel<float>::receptive_radii();
  auto jumps = RecognizerModel<float>::jumps();
  nlohmann::json side{{"charset", m.charset},
                      {"crop", {m.crop_h, m.crop_w}},
                      {"strides", {1, 2, 4}},
                      {"receptive_radii", {radii[0], radii[1], radii[2]}},
                      {"jumps", {jumps[0], jumps[1], jumps[2]}},
                      {"frozen", m.frozen},
                      {"hash", hash_hex(m.params.content_hash())},
                      {"entries", param_entries_json(m.params)}};
  write_json_file((fs::path(dir) / (stem + ".json")).string(), side);
}

RecognizerModel<float> load_recognizer(const std::string& dir, const std::string& stem) {
  nlohmann::json side = read_json_file((fs::path(dir) / (stem + ".json")).string());
  RecognizerModel<float> m =
      RecognizerModel<float>::create(side.at("charset").get<std::string>(), 0);
  check_param_entries(side.at("entries"), m.params, "recognizer");
  load_param_blob((fs::path(dir) / (stem + ".bin")).string(), m.params);
  m.frozen = side.value("frozen", true);
  return m;
}

}  // namespace glyphforge
