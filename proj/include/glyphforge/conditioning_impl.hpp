#pragma once

// Template implementations for conditioning.hpp.

namespace glyphforge {

inline VisualVariant visual_variant_from_name(const std::string& s) {
  if (s == "none") return VisualVariant::none;
  if (s == "multi-encoder") return VisualVariant::multi_encoder;
  if (s == "canny") return VisualVariant::canny;
  if (s == "glyph-vae") return VisualVariant::glyph_vae;
  throw ValidationError("unknown visual variant: " + s);
}

inline TextVariant text_variant_from_name(const std::string& s) {
  if (s == "t5-alone") return TextVariant::t5_alone;
  if (s == "t5-ocr") return TextVariant::t5_ocr;
  if (s == "t5-byt5") return TextVariant::t5_byt5;
  throw ValidationError("unknown text variant: " + s);
}

inline std::vector<SegmentSpan> condition_layout(VisualVariant variant, int codec_c,
                                                 int f, int multi_enc_channels) {
  switch (variant) {
    case VisualVariant::none:
      return {};
    case VisualVariant::multi_encoder:
      return {{"fused", 0, multi_enc_channels}};
    case VisualVariant::canny:
    case VisualVariant::glyph_vae:
      return {{"glyph", 0, codec_c},
              {"position", codec_c, f * f},
              {"mask", codec_c + f * f, codec_c}};
  }
  return {};
}

namespace detail {

// Tokenized caption with placeholder bookkeeping.
struct TokenizedCaption {
  std::vector<int> ids;
  std::vector<TokenRole> roles;
  std::vector<int> placeholder_positions;
};

inline TokenizedCaption tokenize_caption(const Vocab& vocab, TextVariant variant,
                                         const std::string& caption,
                                         std::size_t line_count) {
  TokenizedCaption out;
  if (variant != TextVariant::t5_ocr) {
    for (char c : caption) {
      out.ids.push_back(vocab.id(c));
      out.roles.push_back(TokenRole::caption);
    }
    return out;
  }
  // t5-ocr: each quoted text collapses to a single placeholder token between
  // its quotes.
  std::size_t quoted = 0;
  std::size_t i = 0;
  while (i < caption.size()) {
    char c = caption[i];
    if (c == '"') {
      std::size_t close = caption.find('"', i + 1);
      if (close == std::string::npos) {
        out.ids.push_back(vocab.id(c));
        out.roles.push_back(TokenRole::caption);
        ++i;
        continue;
      }
      out.ids.push_back(vocab.id('"'));
      out.roles.push_back(TokenRole::caption);
      out.placeholder_positions.push_back(static_cast<int>(out.ids.size()));
      out.ids.push_back(Vocab::kPlaceholder);
      out.roles.push_back(TokenRole::placeholder_substituted);
      out.ids.push_back(vocab.id('"'));
      out.roles.push_back(TokenRole::caption);
      ++quoted;
      i = close + 1;
    } else {
      out.ids.push_back(vocab.id(c));
      out.roles.push_back(TokenRole::caption);
      ++i;
    }
  }
  if (quoted != line_count)
    throw PlaceholderMismatch("caption quotes " + std::to_string(quoted) +
                              " texts but sample has " + std::to_string(line_count) +
                              " lines");
  return out;
}

template <typename T>
Tensor<T> replicate3_batch(const Tensor<T>& x) {
  require_shape(x.rank() == 4 && x.dim(3) == 1, "replicate3: (N,H,W,1) expected");
  Tensor<T> out({x.shape[0], x.shape[1], x.shape[2], 3});
  for (std::int64_t p = 0; p < x.numel(); ++p)
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = x.data[p];
  return out;
}

template <typename T>
Tensor<T> canny_batch(const Tensor<T>& Xg, float low = 0.1f, float high = 0.3f) {
  const int N = Xg.shape[0], H = Xg.shape[1], W = Xg.shape[2];
  Tensor<T> out(Xg.shape);
  for (int n = 0; n < N; ++n) {
    RasterImage one({H, W, 1});
    for (std::int64_t i = 0; i < one.numel(); ++i)
      one.data[i] = static_cast<float>(Xg.data[std::int64_t(n) * H * W + i]);
    RasterImage edges = canny_edges(one, low, high);
    for (std::int64_t i = 0; i < one.numel(); ++i)
      out.data[std::int64_t(n) * H * W + i] = static_cast<T>(edges.data[i]);
  }
  return out;
}

}  // namespace detail

template <typename T>
TextConditionBatch<T> build_text_condition_batch(
    Frame<T>& fr, ParamStore<T>& ps, TextVariant variant,
    const std::vector<TextSampleInput>& samples, const TextEncoderModel<T>& textenc,
    const AuxEmbedderModel<T>& aux, const RecognizerModel<float>* gamma_source,
    const GlyphFont& font, bool trainable) {
  require_shape(!samples.empty(), "text condition: empty batch");
  const int N = static_cast<int>(samples.size());
  const Vocab& vocab = textenc.vocab;

  std::vector<detail::TokenizedCaption> toks;
  int Lc = 0;
  for (const auto& s : samples) {
    if (variant != TextVariant::t5_alone) {
      std::size_t quoted = quoted_texts(s.caption).size();
      if (quoted != s.lines.size())
        throw PlaceholderMismatch("caption quotes " + std::to_string(quoted) +
                                  " texts but sample has " +
                                  std::to_string(s.lines.size()) + " lines");
    }
    toks.push_back(detail::tokenize_caption(vocab, variant, s.caption, s.lines.size()));
    Lc = std::max(Lc, static_cast<int>(toks.back().ids.size()));
  }

  std::vector<std::vector<int>> rows(N, std::vector<int>(Lc, Vocab::kPad));
  Tensor<T> mask({N, Lc});
  std::vector<std::vector<TokenRole>> roles(N);
  for (int n = 0; n < N; ++n) {
    const auto& tc = toks[n];
    roles[n] = tc.roles;
    roles[n].resize(Lc, TokenRole::caption);
    for (std::size_t i = 0; i < tc.ids.size(); ++i) rows[n][i] = tc.ids[i];
    for (int i = static_cast<int>(tc.ids.size()); i < Lc; ++i)
      mask.data[std::int64_t(n) * Lc + i] = T(-1e30);
  }

  Var<T> emb = textenc.encode(fr, ps, rows, mask, trainable);

  if (variant == TextVariant::t5_ocr) {
    std::vector<std::pair<int, int>> slots;
    std::vector<RasterImage> crops;
    for (int n = 0; n < N; ++n) {
      const auto& s = samples[n];
      for (std::size_t l = 0; l < s.lines.size(); ++l) {
        slots.emplace_back(n, toks[n].placeholder_positions[l]);
        crops.push_back(render_glyph_crop(s.lines[l], font));
      }
    }
    if (!slots.empty()) {
      require_shape(gamma_source != nullptr, "t5-ocr needs the recognizer");
      std::vector<const RasterImage*> ptrs;
      for (auto& c : crops) ptrs.push_back(&c);
      TensorF gammaf = gamma_source->pooled_features(stack_images(ptrs));
      Var<T> gamma = fr.constant(gammaf.template cast<T>());
      Var<T> rowsv = aux.project_gamma(fr, ps, gamma, trainable);
      emb = ops::replace_rows(emb, rowsv, slots);
    }
  } else if (variant == TextVariant::t5_byt5) {
    int G = 0;
    std::vector<std::vector<int>> glyph_ids(N);
    for (int n = 0; n < N; ++n) {
      for (const TextLine& l : samples[n].lines)
        for (char c : l.text) {
          std::size_t p = vocab.charset().find(c);
          if (p == std::string::npos)
            throw CharsetMiss(std::string("glyph '") + c + "' not in charset");
          glyph_ids[n].push_back(static_cast<int>(p));
        }
      G = std::max(G, static_cast<int>(glyph_ids[n].size()));
    }
    Tensor<T> gmask({N, G});
    std::vector<int> flat(static_cast<std::size_t>(N) * G, 0);
    for (int n = 0; n < N; ++n) {
      for (int i = 0; i < G; ++i) {
        if (i < static_cast<int>(glyph_ids[n].size()))
          flat[std::size_t(n) * G + i] = glyph_ids[n][i];
        else
          gmask.data[std::int64_t(n) * G + i] = T(-1e30);
      }
      roles[n].insert(roles[n].end(), G, TokenRole::glyph_appended);
    }
    auto raw = ops::embedding(fr.param(ps, aux.glyph_emb, trainable), flat, {N, G});
    auto projected = aux.project_glyph(fr, ps, raw, trainable);
    emb = ops::concat_seq(emb, projected);
    Tensor<T> full_mask({N, Lc + G});
    for (int n = 0; n < N; ++n) {
      full_mask.data.segment(std::int64_t(n) * (Lc + G), Lc) =
          mask.data.segment(std::int64_t(n) * Lc, Lc);
      full_mask.data.segment(std::int64_t(n) * (Lc + G) + Lc, G) =
          gmask.data.segment(std::int64_t(n) * G, G);
    }
    mask = std::move(full_mask);
  }

  TextConditionBatch<T> out;
  out.embeddings = emb;
  out.key_mask = std::move(mask);
  out.roles = std::move(roles);
  out.variant = variant;
  return out;
}

template <typename T>
Var<T> build_visual_condition_batch(Frame<T>& fr, VisualVariant variant,
                                    const Tensor<T>& Xg, const Tensor<T>& Xp,
                                    const Tensor<T>& Xm, const CodecModel<T>& codec,
                                    ParamStore<T>* enc_ps,
                                    const VisualEncoders<T>* enc, bool trainable,
                                    std::vector<SegmentSpan>* layout_out) {
  require_shape(Xg.rank() == 4 && Xp.rank() == 4 && Xm.rank() == 4,
                "visual condition: batched maps expected");
  require_shape(Xg.shape[1] == Xp.shape[1] && Xg.shape[2] == Xp.shape[2] &&
                    Xg.shape[1] == Xm.shape[1] && Xg.shape[2] == Xm.shape[2],
                "visual condition: maps must share one canvas");
  const int N = Xg.shape[0], H = Xg.shape[1], W = Xg.shape[2];
  const int f = codec.f;
  if (layout_out)
    *layout_out = condition_layout(variant, codec.c, f, enc ? enc->out_channels : 24);

  switch (variant) {
    case VisualVariant::none:
      return fr.constant(Tensor<T>({N, H / f, W / f, 0}));
    case VisualVariant::glyph_vae:
    case VisualVariant::canny: {
      if (!codec.frozen)
        throw ValidationError("visual condition requires a frozen codec");
      Tensor<T> glyph_map =
          variant == VisualVariant::canny ? detail::canny_batch(Xg) : Xg;
      auto eg = codec.encode(fr, fr.constant(detail::replicate3_batch(glyph_map)));
      auto rp = ops::rearrange_s2d(fr.constant(Xp), f);
      auto em = codec.encode(fr, fr.constant(Xm));
      return ops::concat_lastdim<T>({eg, rp, em});
    }
    case VisualVariant::multi_encoder: {
      if (enc == nullptr || enc_ps == nullptr)
        throw MissingEncoders("multi-encoder variant needs G/P/M/F encoders");
      auto g = enc->g2(fr, *enc_ps, ops::gelu(enc->g1(fr, *enc_ps, fr.constant(Xg), trainable)), trainable);
      auto p = enc->p2(fr, *enc_ps, ops::gelu(enc->p1(fr, *enc_ps, fr.constant(Xp), trainable)), trainable);
      auto m = enc->m2(fr, *enc_ps, ops::gelu(enc->m1(fr, *enc_ps, fr.constant(Xm), trainable)), trainable);
      auto sum = ops::add(ops::add(g, p), m);
      return enc->fuse(fr, *enc_ps, sum, trainable);
    }
  }
  throw ValidationError("unreachable visual variant");
}

template <typename T>
ConditionBundle<T> build_visual_condition(VisualVariant variant, const RasterImage& Xg,
                                          const RasterImage& Xp, const RasterImage& Xm,
                                          const CodecModel<T>& codec,
                                          ParamStore<T>* enc_ps,
                                          const VisualEncoders<T>* enc) {
  auto as_batch = [](const RasterImage& img) {
    Tensor<T> t = img.cast<T>();
    return t.reshaped({1, img.dim(0), img.dim(1), img.dim(2)});
  };
  Tape<T> tape;
  Frame<T> fr(tape);
  ConditionBundle<T> out;
  out.variant = variant;
  Var<T> v = build_visual_condition_batch(fr, variant, as_batch(Xg), as_batch(Xp),
                                          as_batch(Xm), codec, enc_ps, enc, false,
                                          &out.layout);
  const Tensor<T>& lat = v.val();
  out.latent = Tensor<T>({lat.shape[1], lat.shape[2], lat.shape[3]});
  out.latent.data = lat.data;
  return out;
}

}  // namespace glyphforge
