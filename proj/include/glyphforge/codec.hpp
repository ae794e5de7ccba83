#pragma once

#include <string>

#include "glyphforge/dataset.hpp"
#include "glyphforge/image.hpp"
#include "glyphforge/nn.hpp"

namespace glyphforge {

namespace ops {

// Space-to-depth rearrangement R: (.., H, W, C) -> (.., H/f, W/f, C*f*f) with
// out[i, j, c*f*f + di*f + dj] = in[i*f + di, j*f + dj, c]. Lossless.
template <typename T>
Tensor<T> rearrange_s2d_tensor(const Tensor<T>& x, int f) {
  require_shape(x.rank() == 3 || x.rank() == 4, "rearrange: rank 3 or 4");
  const bool batched = x.rank() == 4;
  const int N = batched ? x.shape[0] : 1;
  const int H = x.dim(batched ? 1 : 0), W = x.dim(batched ? 2 : 1), C = x.dim(-1);
  require_shape(H % f == 0 && W % f == 0, "rearrange: f must divide H and W");
  const int h = H / f, w = W / f, co = C * f * f;
  Shape os = batched ? Shape{N, h, w, co} : Shape{h, w, co};
  Tensor<T> out(os);
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int c = 0; c < C; ++c)
          for (int di = 0; di < f; ++di)
            for (int dj = 0; dj < f; ++dj)
              out.data[((std::int64_t(n) * h + i) * w + j) * co + c * f * f + di * f + dj] =
                  x.data[((std::int64_t(n) * H + i * f + di) * W + j * f + dj) * C + c];
  return out;
}

template <typename T>
Tensor<T> rearrange_inverse_tensor(const Tensor<T>& z, int f) {
  require_shape(z.rank() == 3 || z.rank() == 4, "rearrange_inverse: rank 3 or 4");
  const bool batched = z.rank() == 4;
  const int N = batched ? z.shape[0] : 1;
  const int h = z.dim(batched ? 1 : 0), w = z.dim(batched ? 2 : 1), co = z.dim(-1);
  require_shape(co % (f * f) == 0, "rearrange_inverse: channels not divisible");
  const int C = co / (f * f), H = h * f, W = w * f;
  Shape os = batched ? Shape{N, H, W, C} : Shape{H, W, C};
  Tensor<T> out(os);
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int c = 0; c < C; ++c)
          for (int di = 0; di < f; ++di)
            for (int dj = 0; dj < f; ++dj)
              out.data[((std::int64_t(n) * H + i * f + di) * W + j * f + dj) * C + c] =
                  z.data[((std::int64_t(n) * h + i) * w + j) * co + c * f * f + di * f + dj];
  return out;
}

// Tape version (pure permutation; backward is the inverse permutation).
template <typename T>
Var<T> rearrange_s2d(Var<T> x, int f) {
  Tensor<T> out = rearrange_s2d_tensor(x.val(), f);
  Var<T> o = x.tape->make(std::move(out), x.needs_grad());
  if (o.needs_grad()) {
    x.tape->set_backward(o, [t = x.tape, xi = x.id, oi = o.id, f] {
      Tensor<T> ginv = rearrange_inverse_tensor(t->node(oi).grad, f);
      t->grad(xi).data += ginv.data;
    });
  }
  return o;
}

template <typename T>
Var<T> rearrange_inverse(Var<T> z, int f) {
  Tensor<T> out = rearrange_inverse_tensor(z.val(), f);
  Var<T> o = z.tape->make(std::move(out), z.needs_grad());
  if (o.needs_grad()) {
    z.tape->set_backward(o, [t = z.tape, zi = z.id, oi = o.id, f] {
      Tensor<T> gfwd = rearrange_s2d_tensor(t->node(oi).grad, f);
      t->grad(zi).data += gfwd.data;
    });
  }
  return o;
}

}  // namespace ops

// The frozen latent codec E standing in for the VAE: a small deterministic
// convolutional autoencoder (kind `conv`, f=4), or pure space-to-depth
// (kind `identity-s2d`) for the fastest test profile.
template <typename T>
struct CodecModel {
  enum class Kind { conv, identity_s2d };

  Kind kind = Kind::conv;
  int f = 4;
  int c = 4;  // latent channels (identity-s2d: 3*f*f)
  bool frozen = false;
  ParamStore<T> params;

  Conv2d<T> e1, e2, e3, e4;
  Conv2d<T> d1, d2, d3, d4;

  static CodecModel create(Kind kind, int f, int c, std::uint64_t seed) {
    CodecModel m;
    m.kind = kind;
    m.f = f;
    m.params = ParamStore<T>(seed);
    if (kind == Kind::identity_s2d) {
      m.c = 3 * f * f;
      return m;
    }
    require_shape(f == 4, "conv codec supports f=4");
    m.c = c;
    // Space-to-depth wrapping keeps every convolution at 32x32 or below,
    // which is what makes the codec cheap enough to sit inside the
    // perceptual-loss path of every training step.
    ops::ConvSpec s1{1, 1}, s2{2, 1};
    m.e1 = Conv2d<T>::create(m.params, "enc1", 3, 3, 12, 40, s1);    // @32
    m.e2 = Conv2d<T>::create(m.params, "enc2", 3, 3, 40, 80, s2);    // @32 -> @16
    m.e3 = Conv2d<T>::create(m.params, "enc3", 3, 3, 80, 64, s1);    // @16
    m.e4 = Conv2d<T>::create(m.params, "enc4", 3, 3, 64, c, s1);     // @16
    m.d1 = Conv2d<T>::create(m.params, "dec1", 3, 3, c, 64, s1);     // @16
    m.d2 = Conv2d<T>::create(m.params, "dec2", 3, 3, 64, 160, s1);   // @16
    m.d3 = Conv2d<T>::create(m.params, "dec3", 3, 3, 40, 32, s1);    // @32
    m.d4 = Conv2d<T>::create(m.params, "dec4", 3, 3, 32, 12, s1);    // @32
    return m;
  }

  // x: (N, H, W, 3) -> (N, H/f, W/f, c). Trainable only while unfrozen.
  Var<T> encode(Frame<T>& fr, Var<T> x) const {
    if (kind == Kind::identity_s2d) return ops::rearrange_s2d(x, f);
    bool tr = !frozen;
    auto& ps = const_cast<ParamStore<T>&>(params);
    auto h = ops::gelu(e1(fr, ps, ops::rearrange_s2d(x, 2), tr));
    h = ops::gelu(e2(fr, ps, h, tr));
    h = ops::gelu(e3(fr, ps, h, tr));
    return e4(fr, ps, h, tr);
  }

  // Linear-output decode; the image-space clamp happens in decode_image).
  Var<T> decode(Frame<T>& fr, Var<T> z) const {
    if (kind == Kind::identity_s2d) return ops::rearrange_inverse(z, f);
    bool tr = !frozen;
    auto& ps = const_cast<ParamStore<T>&>(params);
    auto h = ops::gelu(d1(fr, ps, z, tr));
    h = ops::gelu(d2(fr, ps, h, tr));
    h = ops::rearrange_inverse(h, 2);  // -> 32x32x40
    h = ops::gelu(d3(fr, ps, h, tr));
    h = d4(fr, ps, h, tr);
    return ops::rearrange_inverse(h, 2);  // -> 64x64x3
  }

  // Convenience no-grad paths over plain tensors.
  Tensor<T> encode_tensor(const Tensor<T>& batch) const {
    Tape<T> tape;
    Frame<T> fr(tape);
    return encode(fr, tape.constant(batch)).val();
  }
  Tensor<T> decode_tensor(const Tensor<T>& z) const {
    Tape<T> tape;
    Frame<T> fr(tape);
    return decode(fr, tape.constant(z)).val();
  }
  // Decode to a valid image: clamped to [0, 1].
  Tensor<T> decode_image(const Tensor<T>& z) const {
    Tensor<T> x = decode_tensor(z);
    x.data = x.data.min(T(1)).max(T(0));
    return x;
  }

  std::string kind_name() const {
    return kind == Kind::identity_s2d ? "identity-s2d" : "conv";
  }
};

struct CodecTrainConfig {
  std::string kind = "conv";  // conv | identity-s2d
  int f = 4;
  int c = 4;
  int batch = 32;
  int max_steps = 8000;
  int val_every = 250;
  float lr = 2e-3f;
  float val_mse_target = 0.01f;  // decode(encode(x)) MSE gate on val
  std::uint64_t seed = 0;
};

// Trains the codec on the manifest's train split until the val-MSE target is
// met (NonConvergence otherwise) and returns it frozen.
CodecModel<float> train_codec(const DatasetManifest& manifest,
                              const CodecTrainConfig& config,
                              std::ostream* log = nullptr);

void save_codec(const CodecModel<float>& m, const std::string& dir,
                const std::string& stem = "codec");
CodecModel<float> load_codec(const std::string& dir, const std::string& stem = "codec");

}  // namespace glyphforge
