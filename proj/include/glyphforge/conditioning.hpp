#pragma once

#include <optional>
#include <string>
#include <vector>

#include "glyphforge/canny.hpp"
#include "glyphforge/codec.hpp"
#include "glyphforge/raster.hpp"
#include "glyphforge/recognizer.hpp"

namespace glyphforge {

// ------------------------------------------------------------------ variants

enum class VisualVariant { none, multi_encoder, canny, glyph_vae };
enum class TextVariant { t5_alone, t5_ocr, t5_byt5 };

inline std::string to_name(VisualVariant v) {
  switch (v) {
    case VisualVariant::none: return "none";
    case VisualVariant::multi_encoder: return "multi-encoder";
    case VisualVariant::canny: return "canny";
    case VisualVariant::glyph_vae: return "glyph-vae";
  }
  return "?";
}
inline std::string to_name(TextVariant v) {
  switch (v) {
    case TextVariant::t5_alone: return "t5-alone";
    case TextVariant::t5_ocr: return "t5-ocr";
    case TextVariant::t5_byt5: return "t5-byt5";
  }
  return "?";
}
VisualVariant visual_variant_from_name(const std::string& s);
TextVariant text_variant_from_name(const std::string& s);

// ----------------------------------------------------------------- tokenizer

// Character-level vocabulary over the glyph charset plus caption characters.
// Token 0 is padding, token 1 the placeholder S*.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kPlaceholder = 1;

  static Vocab build(const std::string& charset) {
    Vocab v;
    v.charset_ = charset;
    std::string extra = "abcdefghijklmnopqrstuvwxyz \"";
    for (char c : charset) v.add_char(c);
    for (char c : extra) v.add_char(c);
    return v;
  }

  int size() const { return 2 + static_cast<int>(chars_.size()); }
  const std::string& charset() const { return charset_; }

  int id(char c) const {
    for (std::size_t i = 0; i < chars_.size(); ++i)
      if (chars_[i] == c) return 2 + static_cast<int>(i);
    throw CharsetMiss(std::string("character '") + c + "' not in vocabulary");
  }

  std::vector<int> encode(const std::string& text) const {
    std::vector<int> ids;
    for (char c : text) ids.push_back(id(c));
    return ids;
  }

 private:
  void add_char(char c) {
    for (char e : chars_)
      if (e == c) return;
    chars_.push_back(c);
  }
  std::string charset_;
  std::vector<char> chars_;
};

// --------------------------------------------------------------- text models

// Character-level transformer encoder standing in for the frozen T5; trained
// jointly with the denoiser since no pretrained checkpoint exists at this
// scale.
template <typename T>
struct TextEncoderModel {
  Vocab vocab;
  int dim = 64, heads = 4, depth = 2, max_len = 112;
  int tok_emb = -1, pos_emb = -1;

  struct Block {
    LayerNorm<T> ln1;
    MultiheadAttention<T> attn;
    LayerNorm<T> ln2;
    Mlp<T> mlp;
  };
  std::vector<Block> blocks;
  LayerNorm<T> final_ln;

  static TextEncoderModel create(ParamStore<T>& ps, const Vocab& vocab, int dim,
                                 int heads, int depth, int max_len) {
    TextEncoderModel m;
    m.vocab = vocab;
    m.dim = dim;
    m.heads = heads;
    m.depth = depth;
    m.max_len = max_len;
    m.tok_emb = ps.add("textenc.tok_emb", {vocab.size(), dim}, Init::gauss(0.02), false);
    m.pos_emb = ps.add("textenc.pos_emb", {max_len, dim}, Init::gauss(0.02), false);
    for (int b = 0; b < depth; ++b) {
      std::string p = "textenc.block" + std::to_string(b);
      Block blk;
      blk.ln1 = LayerNorm<T>::create(ps, p + ".ln1", dim);
      blk.attn = MultiheadAttention<T>::create(ps, p + ".attn", dim, dim, heads);
      blk.ln2 = LayerNorm<T>::create(ps, p + ".ln2", dim);
      blk.mlp = Mlp<T>::create(ps, p + ".mlp", dim, 4 * dim);
      m.blocks.push_back(blk);
    }
    m.final_ln = LayerNorm<T>::create(ps, "textenc.final_ln", dim);
    return m;
  }

  // tokens: padded id rows; key_mask: (N, L) additive mask for padding.
  Var<T> encode(Frame<T>& fr, ParamStore<T>& ps,
                const std::vector<std::vector<int>>& tokens,
                const Tensor<T>& key_mask, bool trainable) const {
    const int N = static_cast<int>(tokens.size());
    const int L = static_cast<int>(tokens[0].size());
    require_shape(L <= max_len, "text encoder: sequence too long");
    std::vector<int> flat;
    flat.reserve(static_cast<std::size_t>(N) * L);
    for (const auto& row : tokens) {
      require_shape(static_cast<int>(row.size()) == L, "text encoder: ragged batch");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    auto x = ops::embedding(fr.param(ps, tok_emb, trainable), flat, {N, L});
    auto pos_full = fr.param(ps, pos_emb, trainable);
    auto pos = ops::reshape(ops::slice_lastdim(
                                ops::reshape(pos_full, {1, dim * max_len}), 0, dim * L),
                            {L, dim});
    x = ops::add_posemb(x, pos);
    for (const auto& blk : blocks) {
      auto h = blk.ln1(fr, ps, x, trainable);
      x = ops::add(x, blk.attn(fr, ps, h, h, &key_mask, trainable));
      x = ops::add(x, blk.mlp(fr, ps, blk.ln2(fr, ps, x, trainable), trainable));
    }
    return final_ln(fr, ps, x, trainable);
  }
};

// Auxiliary embedders: the OCR-feature projection (xi) for t5-ocr, and the
// per-character glyph embedding (delta) with its projection (eta) for t5-byt5.
template <typename T>
struct AuxEmbedderModel {
  TextVariant variant = TextVariant::t5_alone;
  Linear<T> xi1, xi2;    // gamma features -> text dim
  int glyph_emb = -1;    // (charset, glyph_dim)
  Linear<T> eta1, eta2;  // glyph_dim -> text dim
  int glyph_dim = 32;

  static AuxEmbedderModel create(ParamStore<T>& ps, TextVariant variant,
                                 int gamma_dim, int charset_size, int text_dim) {
    AuxEmbedderModel m;
    m.variant = variant;
    if (variant == TextVariant::t5_ocr) {
      m.xi1 = Linear<T>::create(ps, "aux.xi1", gamma_dim, 2 * text_dim);
      m.xi2 = Linear<T>::create(ps, "aux.xi2", 2 * text_dim, text_dim);
    } else if (variant == TextVariant::t5_byt5) {
      m.glyph_emb = ps.add("aux.glyph_emb", {charset_size, m.glyph_dim},
                           Init::gauss(0.02), false);
      m.eta1 = Linear<T>::create(ps, "aux.eta1", m.glyph_dim, 2 * text_dim);
      m.eta2 = Linear<T>::create(ps, "aux.eta2", 2 * text_dim, text_dim);
    }
    return m;
  }

  Var<T> project_gamma(Frame<T>& fr, ParamStore<T>& ps, Var<T> gamma,
                       bool trainable) const {
    return xi2(fr, ps, ops::gelu(xi1(fr, ps, gamma, trainable)), trainable);
  }
  Var<T> project_glyph(Frame<T>& fr, ParamStore<T>& ps, Var<T> emb,
                       bool trainable) const {
    return eta2(fr, ps, ops::gelu(eta1(fr, ps, emb, trainable)), trainable);
  }
};

enum class TokenRole { caption, placeholder_substituted, glyph_appended };

// The token-embedding sequence c_te for one sample.
template <typename T>
struct TextCondition {
  Tensor<T> embeddings;  // (L, d)
  std::vector<TokenRole> roles;
  TextVariant variant = TextVariant::t5_alone;
};

// Batched c_te on tape, for training.
template <typename T>
struct TextConditionBatch {
  Var<T> embeddings;  // (N, L, d)
  Tensor<T> key_mask; // (N, L), 0 for valid tokens
  std::vector<std::vector<TokenRole>> roles;
  TextVariant variant = TextVariant::t5_alone;
};

struct TextSampleInput {
  std::string caption;
  std::vector<TextLine> lines;
};

// Builds c_te for a batch. For t5-ocr the quoted texts are replaced by one
// placeholder token each and the placeholder embeddings are overwritten after
// encoding with projected recognizer features of rendered glyph crops; for
// t5-byt5 projected per-character glyph embeddings are appended along the
// sequence axis.
template <typename T>
TextConditionBatch<T> build_text_condition_batch(
    Frame<T>& fr, ParamStore<T>& ps, TextVariant variant,
    const std::vector<TextSampleInput>& samples, const TextEncoderModel<T>& textenc,
    const AuxEmbedderModel<T>& aux, const RecognizerModel<float>* gamma_source,
    const GlyphFont& font, bool trainable);

// Single-sample convenience wrapper (inference path).
template <typename T>
TextCondition<T> build_text_condition(TextVariant variant, const std::string& caption,
                                      const std::vector<TextLine>& lines,
                                      ParamStore<T>& ps,
                                      const TextEncoderModel<T>& textenc,
                                      const AuxEmbedderModel<T>& aux,
                                      const RecognizerModel<float>* gamma_source,
                                      const GlyphFont& font) {
  Tape<T> tape;
  Frame<T> fr(tape);
  auto batch = build_text_condition_batch(fr, ps, variant, {{caption, lines}},
                                          textenc, aux, gamma_source, font, false);
  const Tensor<T>& emb = batch.embeddings.val();
  TextCondition<T> out;
  out.variant = variant;
  out.embeddings = Tensor<T>({emb.shape[1], emb.shape[2]});
  out.embeddings.data = emb.data;
  out.roles = batch.roles[0];
  return out;
}

// --------------------------------------------------------------- visual side

struct SegmentSpan {
  std::string name;
  int begin = 0;
  int channels = 0;
};

// The assembled latent visual condition c_ve for one sample.
template <typename T>
struct ConditionBundle {
  Tensor<T> latent;  // (h, w, C); C may be 0 for variant `none`
  std::vector<SegmentSpan> layout;
  VisualVariant variant = VisualVariant::none;
};

// Trainable per-condition encoders and fuser of the multi-encoder variant.
template <typename T>
struct VisualEncoders {
  Conv2d<T> g1, g2, p1, p2, m1, m2, fuse;
  int out_channels = 24;

  static VisualEncoders create(ParamStore<T>& ps, int out_channels) {
    VisualEncoders v;
    v.out_channels = out_channels;
    ops::ConvSpec s2{2, 1}, s1{1, 1};
    v.g1 = Conv2d<T>::create(ps, "visenc.g1", 3, 3, 1, 16, s2);
    v.g2 = Conv2d<T>::create(ps, "visenc.g2", 3, 3, 16, out_channels, s2);
    v.p1 = Conv2d<T>::create(ps, "visenc.p1", 3, 3, 1, 16, s2);
    v.p2 = Conv2d<T>::create(ps, "visenc.p2", 3, 3, 16, out_channels, s2);
    v.m1 = Conv2d<T>::create(ps, "visenc.m1", 3, 3, 3, 16, s2);
    v.m2 = Conv2d<T>::create(ps, "visenc.m2", 3, 3, 16, out_channels, s2);
    v.fuse = Conv2d<T>::create(ps, "visenc.fuse", 3, 3, out_channels, out_channels, s1);
    return v;
  }
};

// Channel layout of c_ve for a given variant; fixed across samples.
std::vector<SegmentSpan> condition_layout(VisualVariant variant, int codec_c, int f,
                                          int multi_enc_channels = 24);

inline int condition_channels(const std::vector<SegmentSpan>& layout) {
  int c = 0;
  for (const auto& s : layout) c += s.channels;
  return c;
}

// Builds c_ve for a batch of samples. Xg, Xp: (N,H,W,1); Xm: (N,H,W,3).
// The glyph-vae and canny variants use only the frozen codec, so their output
// is constant; multi-encoder routes through the trainable encoders.
template <typename T>
Var<T> build_visual_condition_batch(Frame<T>& fr, VisualVariant variant,
                                    const Tensor<T>& Xg, const Tensor<T>& Xp,
                                    const Tensor<T>& Xm, const CodecModel<T>& codec,
                                    ParamStore<T>* enc_ps,
                                    const VisualEncoders<T>* enc, bool trainable,
                                    std::vector<SegmentSpan>* layout_out = nullptr);

// Single-sample wrapper returning the spec-shaped bundle.
template <typename T>
ConditionBundle<T> build_visual_condition(VisualVariant variant, const RasterImage& Xg,
                                          const RasterImage& Xp, const RasterImage& Xm,
                                          const CodecModel<T>& codec,
                                          ParamStore<T>* enc_ps = nullptr,
                                          const VisualEncoders<T>* enc = nullptr);

}  // namespace glyphforge

#include "glyphforge/conditioning_impl.hpp"
