#pragma once

#include <string>
#include <vector>

#include "glyphforge/conditioning.hpp"
#include "glyphforge/nn.hpp"

namespace glyphforge {

// Forward noising along the rectified-flow path: z_t = (1-t) z_0 + t eps.
template <typename T>
Tensor<T> forward_noise(const Tensor<T>& z0, const Tensor<T>& eps,
                        const std::vector<T>& t) {
  require_shape(z0.same_shape(eps), "forward_noise: shape mismatch");
  require_shape(static_cast<int>(t.size()) == z0.shape[0],
                "forward_noise: one t per sample");
  Tensor<T> zt(z0.shape);
  const std::int64_t stride = z0.numel() / z0.shape[0];
  for (int n = 0; n < z0.shape[0]; ++n) {
    require_shape(t[n] >= T(0) && t[n] <= T(1), "forward_noise: t in [0,1]");
    zt.data.segment(n * stride, stride) =
        (T(1) - t[n]) * z0.data.segment(n * stride, stride) +
        t[n] * eps.data.segment(n * stride, stride);
  }
  return zt;
}

struct DenoiserConfig {
  int latent_h = 16, latent_w = 16;
  int z_channels = 4;     // channels of z_t and z_m
  int cond_channels = 24; // channels of c_ve (0 for variant none)
  int patch = 1;          // token patch size over the latent grid
  int width = 128;
  int depth = 6;
  int heads = 4;
  int text_dim = 64;

  int tokens() const { return (latent_h / patch) * (latent_w / patch); }
  int token_in() const { return patch * patch * (2 * z_channels + cond_channels); }
  int token_out() const { return patch * patch * z_channels; }
};

// Toy DiT velocity denoiser. Input latents, the masked-image latent, and the
// visual condition are channel-concatenated into tokens; text conditioning
// enters through cross-attention with slot-position encodings on the keys.
// Self-attention and MLP sublayers are timestep-modulated with zero-init
// gates, so the model starts from the identity map.
template <typename T>
struct DenoiserModel {
  DenoiserConfig cfg;
  Linear<T> patch_embed;
  int pos_emb = -1;
  Linear<T> t_mlp1, t_mlp2;

  struct Block {
    LayerNorm<T> ln1;
    MultiheadAttention<T> self_attn;
    Linear<T> mod;  // width -> 6*width, zero-init
    LayerNorm<T> lnx;
    MultiheadAttention<T> cross_attn;
    LayerNorm<T> ln2;
    Mlp<T> mlp;
  };
  std::vector<Block> blocks;
  LayerNorm<T> final_ln;
  Linear<T> head;

  static DenoiserModel create(ParamStore<T>& ps, const DenoiserConfig& cfg) {
    require_shape(cfg.latent_h % cfg.patch == 0 && cfg.latent_w % cfg.patch == 0,
                  "denoiser: patch must divide the latent grid");
    require_shape(cfg.width % cfg.heads == 0, "denoiser: heads must divide width");
    DenoiserModel m;
    m.cfg = cfg;
    m.patch_embed = Linear<T>::create(ps, "denoiser.patch_embed", cfg.token_in(),
                                      cfg.width);
    m.pos_emb = ps.add("denoiser.pos_emb", {cfg.tokens(), cfg.width},
                       Init::gauss(0.02), false);
    m.t_mlp1 = Linear<T>::create(ps, "denoiser.t_mlp1", cfg.width, cfg.width);
    m.t_mlp2 = Linear<T>::create(ps, "denoiser.t_mlp2", cfg.width, cfg.width);
    for (int b = 0; b < cfg.depth; ++b) {
      std::string p = "denoiser.block" + std::to_string(b);
      Block blk;
      blk.ln1 = LayerNorm<T>::create(ps, p + ".ln1", cfg.width);
      blk.self_attn = MultiheadAttention<T>::create(ps, p + ".self", cfg.width,
                                                    cfg.width, cfg.heads);
      blk.mod = Linear<T>::create(ps, p + ".mod", cfg.width, 6 * cfg.width, true,
                                  Init::zero());
      blk.lnx = LayerNorm<T>::create(ps, p + ".lnx", cfg.width);
      blk.cross_attn = MultiheadAttention<T>::create(ps, p + ".cross", cfg.width,
                                                     cfg.text_dim, cfg.heads);
      blk.ln2 = LayerNorm<T>::create(ps, p + ".ln2", cfg.width);
      blk.mlp = Mlp<T>::create(ps, p + ".mlp", cfg.width, 4 * cfg.width);
      m.blocks.push_back(blk);
    }
    m.final_ln = LayerNorm<T>::create(ps, "denoiser.final_ln", cfg.width);
    m.head = Linear<T>::create(ps, "denoiser.head", cfg.width, cfg.token_out(), true,
                               Init::zero());
    return m;
  }

  // z_t: (N,h,w,c) latent; z_m: constant masked-image latent; c_ve: visual
  // condition (possibly 0 channels); c_te: (N,L,d) with its key mask.
  // Returns the velocity estimate with z_t's shape.
  Var<T> predict(Frame<T>& fr, ParamStore<T>& ps, Var<T> z_t, Var<T> z_m, Var<T> c_ve,
                 Var<T> c_te, const Tensor<T>& text_mask, const std::vector<T>& t,
                 bool trainable) const {
    const auto& zs = z_t.val().shape;
    require_shape(zs.size() == 4 && zs[1] == cfg.latent_h && zs[2] == cfg.latent_w &&
                      zs[3] == cfg.z_channels,
                  "predict: z_t shape");
    require_shape(z_m.val().same_shape(z_t.val()), "predict: z_m shape");
    if (c_ve.val().dim(-1) != cfg.cond_channels)
      throw LayoutMismatch("condition bundle has " +
                           std::to_string(c_ve.val().dim(-1)) +
                           " channels, model expects " +
                           std::to_string(cfg.cond_channels));
    const int N = zs[0];
    require_shape(static_cast<int>(t.size()) == N, "predict: one t per sample");

    auto tokens_in = ops::concat_lastdim<T>({z_t, z_m, c_ve});
    if (cfg.patch > 1) tokens_in = ops::rearrange_s2d(tokens_in, cfg.patch);
    auto x = ops::reshape(tokens_in, {N, cfg.tokens(), cfg.token_in()});
    x = patch_embed(fr, ps, x, trainable);
    x = ops::add_posemb(x, fr.param(ps, pos_emb, trainable));

    auto t_feat = fr.constant(sinusoidal_features<T>(t, cfg.width));
    auto t_vec =
        t_mlp2(fr, ps, ops::silu(t_mlp1(fr, ps, t_feat, trainable)), trainable);

    // Slot-position encodings are attached to the text keys so token order is
    // part of the conditioning signal.
    auto keyed_text = ops::add_posemb(
        c_te, fr.constant(sinusoidal_table<T>(c_te.val().shape[1], cfg.text_dim)));

    for (const auto& blk : blocks) {
      auto mods = blk.mod(fr, ps, ops::silu(t_vec), trainable);
      auto shift1 = ops::slice_lastdim(mods, 0, cfg.width);
      auto scale1 = ops::slice_lastdim(mods, cfg.width, cfg.width);
      auto gate1 = ops::slice_lastdim(mods, 2 * cfg.width, cfg.width);
      auto shift2 = ops::slice_lastdim(mods, 3 * cfg.width, cfg.width);
      auto scale2 = ops::slice_lastdim(mods, 4 * cfg.width, cfg.width);
      auto gate2 = ops::slice_lastdim(mods, 5 * cfg.width, cfg.width);

      auto h = ops::affine_tokens(blk.ln1(fr, ps, x, trainable), scale1, shift1);
      x = ops::add(x, ops::mul_tokens(blk.self_attn(fr, ps, h, h, nullptr, trainable),
                                      gate1));
      x = ops::add(x, blk.cross_attn(fr, ps, blk.lnx(fr, ps, x, trainable), keyed_text,
                                     &text_mask, trainable));
      auto h2 = ops::affine_tokens(blk.ln2(fr, ps, x, trainable), scale2, shift2);
      x = ops::add(x, ops::mul_tokens(blk.mlp(fr, ps, h2, trainable), gate2));
    }
    x = final_ln(fr, ps, x, trainable);
    x = head(fr, ps, x, trainable);
    auto grid = ops::reshape(
        x, {N, cfg.latent_h / cfg.patch, cfg.latent_w / cfg.patch, cfg.token_out()});
    if (cfg.patch > 1) grid = ops::rearrange_inverse(grid, cfg.patch);
    return grid;
  }
};

// Euler integration of the learned velocity field from t=1 to t=0. The
// callback runs the full conditioned prediction for one integration step.
template <typename T>
using VelocityFn =
    std::function<Tensor<T>(const Tensor<T>& z_t, const std::vector<T>& t)>;

template <typename T>
Tensor<T> sample_latents(const Tensor<T>& noise, int steps, const VelocityFn<T>& v) {
  if (steps < 1) throw InvalidSteps("sampler needs steps >= 1");
  Tensor<T> z = noise;
  const int N = z.shape[0];
  const T dt = T(1) / static_cast<T>(steps);
  for (int k = steps; k >= 1; --k) {
    std::vector<T> t(N, static_cast<T>(k) * dt);
    Tensor<T> vel = v(z, t);
    require_shape(vel.same_shape(z), "sampler: velocity shape");
    z.data -= dt * vel.data;
  }
  return z;
}

}  // namespace glyphforge
