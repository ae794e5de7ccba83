#pragma once

#include <array>
#include <string>
#include <vector>

#include "glyphforge/dataset.hpp"
#include "glyphforge/image.hpp"
#include "glyphforge/nn.hpp"

namespace glyphforge {

// Multi-scale feature maps (coarse ordering: stage 1 = finest stride).
template <typename T>
struct FeaturePyramid {
  std::vector<Tensor<T>> levels;
};

// CTC loss over per-column logits (N, L, V) with blank = V-1. Returns the
// batch-mean negative log-likelihood and its gradient w.r.t. the logits.
template <typename T>
struct CtcResult {
  T loss = T(0);
  Tensor<T> grad;
};

template <typename T>
CtcResult<T> ctc_loss(const Tensor<T>& logits,
                      const std::vector<std::vector<int>>& targets, int blank) {
  require_shape(logits.rank() == 3, "ctc: logits rank");
  const int N = logits.shape[0], L = logits.shape[1], V = logits.shape[2];
  require_shape(static_cast<int>(targets.size()) == N, "ctc: target count");
  CtcResult<T> res;
  res.grad = Tensor<T>(logits.shape);
  const T NEG = -std::numeric_limits<T>::infinity();
  auto lse2 = [&](T a, T b) {
    if (a == NEG) return b;
    if (b == NEG) return a;
    T m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  };
  T total = T(0);
  for (int n = 0; n < N; ++n) {
    const std::vector<int>& y = targets[n];
    const int U = static_cast<int>(y.size());
    const int S = 2 * U + 1;
    // log-softmax per column
    std::vector<T> logp(static_cast<std::size_t>(L) * V);
    for (int t = 0; t < L; ++t) {
      const T* row = logits.data.data() + (std::int64_t(n) * L + t) * V;
      T mx = row[0];
      for (int v = 1; v < V; ++v) mx = std::max(mx, row[v]);
      T s = T(0);
      for (int v = 0; v < V; ++v) s += std::exp(row[v] - mx);
      T lz = mx + std::log(s);
      for (int v = 0; v < V; ++v) logp[std::size_t(t) * V + v] = row[v] - lz;
    }
    auto lab = [&](int s) { return s % 2 == 0 ? blank : y[s / 2]; };

    std::vector<T> alpha(static_cast<std::size_t>(L) * S, NEG);
    alpha[0 * S + 0] = logp[0 * V + blank];
    if (S > 1) alpha[0 * S + 1] = logp[std::size_t(0) * V + lab(1)];
    for (int t = 1; t < L; ++t)
      for (int s = 0; s < S; ++s) {
        T a = alpha[std::size_t(t - 1) * S + s];
        if (s >= 1) a = lse2(a, alpha[std::size_t(t - 1) * S + s - 1]);
        if (s >= 2 && lab(s) != blank && lab(s) != lab(s - 2))
          a = lse2(a, alpha[std::size_t(t - 1) * S + s - 2]);
        alpha[std::size_t(t) * S + s] = a + logp[std::size_t(t) * V + lab(s)];
      }
    T logpy = alpha[std::size_t(L - 1) * S + S - 1];
    if (S > 1) logpy = lse2(logpy, alpha[std::size_t(L - 1) * S + S - 2]);
    if (logpy == NEG) {
      // Target longer than the column budget allows; skip its gradient.
      total += T(50);
      continue;
    }

    // beta excludes the emission at t (suffix from t+1 onward).
    std::vector<T> beta(static_cast<std::size_t>(L) * S, NEG);
    beta[std::size_t(L - 1) * S + S - 1] = T(0);
    if (S > 1) beta[std::size_t(L - 1) * S + S - 2] = T(0);
    for (int t = L - 2; t >= 0; --t)
      for (int s = 0; s < S; ++s) {
        T b = beta[std::size_t(t + 1) * S + s] + logp[std::size_t(t + 1) * V + lab(s)];
        if (s + 1 < S)
          b = lse2(b, beta[std::size_t(t + 1) * S + s + 1] +
                          logp[std::size_t(t + 1) * V + lab(s + 1)]);
        if (s + 2 < S && lab(s + 2) != blank && lab(s + 2) != lab(s))
          b = lse2(b, beta[std::size_t(t + 1) * S + s + 2] +
                          logp[std::size_t(t + 1) * V + lab(s + 2)]);
        beta[std::size_t(t) * S + s] = b;
      }

    // dL/dlogit(t,v) = softmax(t,v) - sum_{s: lab(s)=v} exp(alpha+beta-logpy)
    for (int t = 0; t < L; ++t) {
      T* g = res.grad.data.data() + (std::int64_t(n) * L + t) * V;
      for (int v = 0; v < V; ++v) g[v] = std::exp(logp[std::size_t(t) * V + v]);
      for (int s = 0; s < S; ++s) {
        T q = alpha[std::size_t(t) * S + s] + beta[std::size_t(t) * S + s] - logpy;
        if (q != NEG) g[lab(s)] -= std::exp(q);
      }
    }
    total += -logpy;
  }
  res.loss = total / T(N);
  res.grad.data /= T(N);
  return res;
}

// Toy text recognizer: 3-stage convolutional trunk (strides 1, 2, 2) with a
// per-column head over charset+blank. Serves as the OCR judge, the TEncoder
// feature extractor for the RTP loss, and the gamma feature source for the
// OCR text-embedding variant.
template <typename T>
struct RecognizerModel {
  std::string charset;
  int crop_h = 16, crop_w = 64;
  bool frozen = false;
  ParamStore<T> params;
  Conv2d<T> s1, s2, s3;
  Linear<T> head;

  static constexpr std::array<int, 3> kChannels{16, 32, 64};

  int vocab() const { return static_cast<int>(charset.size()) + 1; }
  int blank() const { return static_cast<int>(charset.size()); }

  static RecognizerModel create(const std::string& charset, std::uint64_t seed) {
    RecognizerModel m;
    m.charset = charset;
    m.params = ParamStore<T>(seed);
    m.s1 = Conv2d<T>::create(m.params, "stage1", 3, 3, 1, kChannels[0], {1, 1});
    m.s2 = Conv2d<T>::create(m.params, "stage2", 3, 3, kChannels[0], kChannels[1], {2, 1});
    m.s3 = Conv2d<T>::create(m.params, "stage3", 3, 3, kChannels[1], kChannels[2], {2, 1});
    m.head = Linear<T>::create(m.params, "head", kChannels[2], m.vocab());
    return m;
  }

  // Receptive-field radius of each stage in input pixels, and the input-pixel
  // stride (jump) of each stage's cells. Both derived from the architecture.
  static std::array<int, 3> receptive_radii() { return {1, 2, 4}; }
  static std::array<int, 3> jumps() { return {1, 2, 4}; }
  // Conservative per-level radius for the locality guarantee: a pixel farther
  // than radius+jump-1 from mask support cannot touch any masked cell.
  static std::array<int, 3> locality_radii() { return {1, 3, 7}; }

  // Feature pyramid on tape; x is (N, H, W, 1) grayscale in [0, 1].
  std::array<Var<T>, 3> feature_levels(Frame<T>& fr, Var<T> x) const {
    bool tr = !frozen;
    auto& ps = const_cast<ParamStore<T>&>(params);
    auto f1 = ops::gelu(s1(fr, ps, x, tr));
    auto f2 = ops::gelu(s2(fr, ps, f1, tr));
    auto f3 = ops::gelu(s3(fr, ps, f2, tr));
    return {f1, f2, f3};
  }

  // Per-column logits (N, W/4, vocab) for (N, crop_h, crop_w, 1) crops.
  Var<T> logits(Frame<T>& fr, Var<T> crops) const {
    auto f = feature_levels(fr, crops);
    auto cols = ops::mean_over_height(f[2]);
    auto& ps = const_cast<ParamStore<T>&>(params);
    return head(fr, ps, cols, !frozen);
  }

  FeaturePyramid<T> features(const Tensor<T>& images) const {
    Tape<T> tape;
    Frame<T> fr(tape);
    auto lv = feature_levels(fr, tape.constant(images));
    FeaturePyramid<T> p;
    for (auto& v : lv) p.levels.push_back(v.val());
    return p;
  }

  // Penultimate pooled features: global average pool of stage 3, (N, C3).
  Tensor<T> pooled_features(const Tensor<T>& images) const {
    Tape<T> tape;
    Frame<T> fr(tape);
    auto lv = feature_levels(fr, tape.constant(images));
    const Tensor<T>& f3 = lv[2].val();
    const int N = f3.shape[0], C = f3.shape[3];
    const std::int64_t HW = std::int64_t(f3.shape[1]) * f3.shape[2];
    Tensor<T> out({N, C});
    for (int n = 0; n < N; ++n)
      for (std::int64_t p = 0; p < HW; ++p)
        for (int c = 0; c < C; ++c)
          out.data[std::int64_t(n) * C + c] += f3.data[(n * HW + p) * C + c];
    out.data /= static_cast<T>(HW);
    return out;
  }

  std::string decode_best_path(const Tensor<T>& column_logits) const {
    const int L = column_logits.shape[0], V = column_logits.shape[1];
    std::string out;
    int prev = blank();
    for (int t = 0; t < L; ++t) {
      int best = 0;
      for (int v = 1; v < V; ++v)
        if (column_logits.data[std::int64_t(t) * V + v] >
            column_logits.data[std::int64_t(t) * V + best])
          best = v;
      if (best != blank() && best != prev) out += charset[best];
      prev = best;
    }
    return out;
  }

  std::vector<std::string> recognize_batch(const Tensor<T>& crops) const {
    Tape<T> tape;
    Frame<T> fr(tape);
    Tensor<T> lg = logits(fr, tape.constant(crops)).val();
    const int N = lg.shape[0], L = lg.shape[1], V = lg.shape[2];
    std::vector<std::string> out(N);
    for (int n = 0; n < N; ++n) {
      Tensor<T> one({L, V});
      one.data = lg.data.segment(std::int64_t(n) * L * V, std::int64_t(L) * V);
      out[n] = decode_best_path(one);
    }
    return out;
  }

  std::string recognize(const Tensor<T>& crop) const {
    Tensor<T> batch = crop.reshaped({1, crop.dim(0), crop.dim(1), crop.dim(2)});
    return recognize_batch(batch)[0];
  }
};

// Shared crop normalization for recognition: grayscale, aspect-preserving
// resize, centered zero padding.
inline RasterImage normalize_crop(const RasterImage& pixels, int crop_h = 16,
                                  int crop_w = 64) {
  return fit_into(to_gray(pixels), crop_h, crop_w);
}

struct RecognizerTrainConfig {
  std::string charset = GlyphFont::default_charset();
  int batch = 64;
  int max_steps = 12000;
  int val_every = 250;
  float lr = 1e-3f;
  float accuracy_target = 0.98f;  // exact match on clean held-out crops
  int val_crops = 500;
  std::uint64_t seed = 0;
};

RecognizerModel<float> train_recognizer(const GlyphFont& font,
                                        const RecognizerTrainConfig& config,
                                        std::ostream* log = nullptr);

// Renders `count` clean held-out crops with texts drawn from the given
// stream; used for the accuracy gate.
std::pair<TensorF, std::vector<std::string>> make_clean_eval_crops(
    const GlyphFont& font, int count, std::uint64_t seed, int len_min = 2,
    int len_max = 8);

float exact_match_accuracy(const RecognizerModel<float>& model, const TensorF& crops,
                           const std::vector<std::string>& texts);

void save_recognizer(const RecognizerModel<float>& m, const std::string& dir,
                     const std::string& stem = "ocr");
RecognizerModel<float> load_recognizer(const std::string& dir,
                                       const std::string& stem = "ocr");

}  // namespace glyphforge
