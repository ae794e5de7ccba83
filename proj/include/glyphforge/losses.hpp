#pragma once

#include <functional>
#include <vector>

#include "glyphforge/autograd.hpp"
#include "glyphforge/recognizer.hpp"

namespace glyphforge {

struct LossConfig {
  double lambda_stage1 = 1.0;
  double lambda_stage2 = 30.0;
  std::int64_t stage1_steps = 6000;
  std::int64_t stage2_steps = 2000;
  std::vector<int> feature_levels = {0, 1, 2};  // recognizer conv stages 1-3
  std::string perceptual = "rtp";               // rtp | tp | none

  std::int64_t total_steps() const { return stage1_steps + stage2_steps; }
  void validate() const {
    if (lambda_stage1 < 0 || lambda_stage2 < 0)
      throw ValidationError("loss: lambda must be nonnegative");
    if (lambda_stage1 > lambda_stage2)
      throw ValidationError("loss: lambda_stage1 must not exceed lambda_stage2");
    if (stage1_steps <= 0 || stage2_steps <= 0)
      throw ValidationError("loss: stage steps must be positive");
    if (perceptual != "rtp" && perceptual != "tp" && perceptual != "none")
      throw ValidationError("loss: unknown perceptual mode " + perceptual);
  }
};

// Step schedule for the perceptual weight: a plain step function, no ramp.
inline double lambda_schedule(std::int64_t step, const LossConfig& c) {
  return step < c.stage1_steps ? c.lambda_stage1 : c.lambda_stage2;
}

// Rectified-flow loss: plain MSE between the velocity estimate and target.
template <typename T>
Var<T> rf_loss(Var<T> v_hat, const Tensor<T>& v_target) {
  return ops::mse_vs_const(v_hat, v_target);
}

template <typename T>
Var<T> rf_loss(Var<T> v_hat, Var<T> v_target) {
  return ops::mse(v_hat, v_target);
}

// Feature extractor hook: image batch (N,H,W,C) -> per-level feature vars.
// The production extractor is the frozen recognizer trunk; tests may pass an
// identity extractor (features = pixels).
template <typename T>
using PyramidFn = std::function<std::vector<Var<T>>(Frame<T>&, Var<T> images)>;

template <typename T>
PyramidFn<T> identity_tencoder() {
  return [](Frame<T>&, Var<T> images) { return std::vector<Var<T>>{images}; };
}

// Grayscale + frozen recognizer trunk stages.
template <typename T>
PyramidFn<T> recognizer_tencoder(const RecognizerModel<T>& model) {
  return [&model](Frame<T>& fr, Var<T> images) {
    Var<T> gray =
        images.val().dim(-1) == 1 ? images : ops::mean_channels(images);
    auto lv = model.feature_levels(fr, gray);
    return std::vector<Var<T>>{lv[0], lv[1], lv[2]};
  };
}

namespace detail {

// Max-pool a binary (N,H,W,1) mask down to (N,h,w,1): a cell is set when any
// of its input pixels is set.
template <typename T>
Tensor<T> maxpool_mask(const Tensor<T>& mask, int h, int w) {
  const int N = mask.shape[0], H = mask.shape[1], W = mask.shape[2];
  require_shape(H % h == 0 && W % w == 0, "mask pooling: shape mismatch");
  const int fy = H / h, fx = W / w;
  Tensor<T> out({N, h, w, 1});
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        T m = T(0);
        for (int dy = 0; dy < fy && m == T(0); ++dy)
          for (int dx = 0; dx < fx; ++dx)
            if (mask.data[((std::int64_t(n) * H + y * fy + dy) * W + x * fx + dx)] !=
                T(0)) {
              m = T(1);
              break;
            }
        out.data[(std::int64_t(n) * h + y) * w + x] = m;
      }
  return out;
}

}  // namespace detail

// Regional Text Perceptual loss: per level, the mask-restricted squared
// feature difference normalized by the mask area at that level, summed over
// levels (mean over the batch). The mask must be binary; an all-empty mask
// yields zero.
template <typename T>
Var<T> rtp_loss(Frame<T>& fr, Var<T> x_pred, const Tensor<T>& x_ref,
                const Tensor<T>& mask, const PyramidFn<T>& tencoder,
                const std::vector<int>& levels) {
  require_shape(x_pred.val().same_shape(x_ref), "rtp: image shapes differ");
  require_shape(mask.rank() == 4 && mask.shape[0] == x_ref.shape[0] &&
                    mask.shape[1] == x_ref.shape[1] &&
                    mask.shape[2] == x_ref.shape[2] && mask.shape[3] == 1,
                "rtp: mask shape");
  if (levels.empty()) throw EmptyPyramid("rtp: no feature levels selected");
  for (std::int64_t i = 0; i < mask.numel(); ++i)
    if (mask.data[i] != T(0) && mask.data[i] != T(1))
      throw ValidationError("rtp: mask must be binary");

  if ((mask.data == T(0)).all())
    return fr.tape.constant(Tensor<T>::scalar(T(0)));

  std::vector<Var<T>> f_pred = tencoder(fr, x_pred);
  std::vector<Var<T>> f_ref = tencoder(fr, fr.constant(x_ref));
  Var<T> total;
  for (int k : levels) {
    require_shape(k >= 0 && k < static_cast<int>(f_pred.size()),
                  "rtp: feature level out of range");
    const auto& fs = f_pred[k].val().shape;
    Tensor<T> level_mask = detail::maxpool_mask(mask, fs[1], fs[2]);
    Var<T> term =
        ops::masked_sq_err_per_sample(f_pred[k], f_ref[k].val(), level_mask);
    total = total.valid() ? ops::add(total, term) : term;
  }
  return total;
}

// Global text-perceptual variant (TP): the same objective under an all-ones
// mask.
template <typename T>
Var<T> tp_loss(Frame<T>& fr, Var<T> x_pred, const Tensor<T>& x_ref,
               const PyramidFn<T>& tencoder, const std::vector<int>& levels) {
  Tensor<T> ones({x_ref.shape[0], x_ref.shape[1], x_ref.shape[2], 1}, T(1));
  return rtp_loss(fr, x_pred, x_ref, ones, tencoder, levels);
}

// Combined objective: L = L_d + lambda * L_p.
template <typename T>
Var<T> combined_loss(Var<T> l_d, Var<T> l_p, T lambda) {
  if (lambda < T(0)) throw ValidationError("combined_loss: lambda must be >= 0");
  return ops::add(l_d, ops::scale(l_p, lambda));
}

inline double combined_loss_value(double l_d, double l_p, double lambda) {
  if (lambda < 0) throw ValidationError("combined_loss: lambda must be >= 0");
  return l_d + lambda * l_p;
}

}  // namespace glyphforge
