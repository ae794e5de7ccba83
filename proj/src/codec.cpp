#include "glyphforge/codec.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>

#include "glyphforge/checkpoint.hpp"
#include "glyphforge/errors.hpp"

namespace glyphforge {

namespace fs = std::filesystem;

namespace {

TensorF gather_batch(const TensorF& all, const std::vector<int>& idx) {
  const std::int64_t stride = all.numel() / all.shape[0];
  TensorF out({static_cast<int>(idx.size()), all.shape[1], all.shape[2], all.shape[3]});
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.data.segment(i * stride, stride) = all.data.segment(idx[i] * stride, stride);
  return out;
}

TensorF load_split(const DatasetManifest& m, const std::string& split) {
  std::vector<int> idx = indices_of_split(m, split);
  std::vector<RasterImage> imgs;
  imgs.reserve(idx.size());
  for (int i : idx) imgs.push_back(load_sample_image(m, m.samples[i]));
  std::vector<const RasterImage*> ptrs;
  for (auto& im : imgs) ptrs.push_back(&im);
  return stack_images(ptrs);
}

}  // namespace

CodecModel<float> train_codec(const DatasetManifest& manifest,
                              const CodecTrainConfig& config, std::ostream* log) {
  auto kind = config.kind == "identity-s2d" ? CodecModel<float>::Kind::identity_s2d
                                            : CodecModel<float>::Kind::conv;
  if (config.kind != "identity-s2d" && config.kind != "conv")
    throw ValidationError("unknown codec kind: " + config.kind);
  CodecModel<float> model =
      CodecModel<float>::create(kind, config.f, config.c, config.seed);
  if (kind == CodecModel<float>::Kind::identity_s2d) {
    model.frozen = true;  // lossless by construction, nothing to train
    return model;
  }

  if (manifest.samples.empty()) throw ValidationError("train_codec: empty dataset");
  TensorF train = load_split(manifest, "train");
  TensorF val = load_split(manifest, "val");
  const int ntrain = train.shape[0];
  // Measure the gate on up to 256 held-out images.
  const int nval = std::min(val.shape[0], 256);
  std::vector<int> val_idx(nval);
  for (int i = 0; i < nval; ++i) val_idx[i] = i;
  TensorF val_batch = gather_batch(val, val_idx);

  auto val_mse = [&]() {
    float acc = 0.f;
    for (int off = 0; off < nval; off += 64) {
      std::vector<int> idx;
      for (int i = off; i < std::min(nval, off + 64); ++i) idx.push_back(i);
      TensorF b = gather_batch(val_batch, idx);
      TensorF rec = model.decode_image(model.encode_tensor(b));
      acc += (rec.data - b.data).square().sum();
    }
    return acc / static_cast<float>(val_batch.numel());
  };

  float best = 1e9f;
  for (int step = 1; step <= config.max_steps; ++step) {
    rng::Stream st(config.seed, "codec-batch", static_cast<std::uint64_t>(step));
    std::vector<int> idx(config.batch);
    for (int i = 0; i < config.batch; ++i)
      idx[i] = static_cast<int>(st.below(static_cast<std::uint64_t>(ntrain)));
    TensorF batch = gather_batch(train, idx);

    Tape<float> tape;
    Frame<float> fr(tape);
    auto x = tape.constant(batch);
    auto rec = model.decode(fr, model.encode(fr, x));
    auto loss = ops::mse_vs_const(rec, batch);
    if (!std::isfinite(loss.val()[0]))
      throw NonFiniteLoss("codec training diverged at step " + std::to_string(step));
    tape.backward(loss);
    model.params.zero_grads();
    fr.collect_grads();
    float warm = std::min(1.f, step / 100.f);
    float decay = 0.5f * (1.f + std::cos(3.14159265f * step / config.max_steps));
    float lr = config.lr * warm * (0.1f + 0.9f * decay);
    model.params.adamw(step, lr, 0.9f, 0.99f, 1e-8f, 0.f);

    if (step % config.val_every == 0 || step == config.max_steps) {
      float v = val_mse();
      best = std::min(best, v);
      if (log)
        (*log) << "codec step " << step << " train_mse " << loss.val()[0]
               << " val_mse " << v << "\n";
      if (v <= config.val_mse_target) break;
    }
  }
  float final_mse = val_mse();
  if (final_mse > config.val_mse_target)
    throw NonConvergence("codec val MSE " + std::to_string(final_mse) +
                         " above target " + std::to_string(config.val_mse_target));
  model.frozen = true;
  return model;
}

void save_codec(const CodecModel<float>& m, const std::string& dir,
                const std::string& stem) {
  fs::create_directories(dir);
  std::string bin = (fs::path(dir) / (stem + ".bin")).string();
  save_param_blob(bin, m.params);
  nlohmann::json side{{"kind", m.kind_name()},
                      {"f", m.f},
                      {"c", m.c},
                      {"frozen", m.frozen},
                      {"hash", hash_hex(m.params.content_hash())},
                      {"entries", param_entries_json(m.params)}};
  write_json_file((fs::path(dir) / (stem + ".json")).string(), side);
}

CodecModel<float> load_codec(const std::string& dir, const std::string& stem) {
  nlohmann::json side = read_json_file((fs::path(dir) / (stem + ".json")).string());
  auto kind = side.at("kind").get<std::string>() == "identity-s2d"
                  ? CodecModel<float>::Kind::identity_s2d
                  : CodecModel<float>::Kind::conv;
  CodecModel<float> m = CodecModel<float>::create(
      kind, side.at("f").get<int>(),
      kind == CodecModel<float>::Kind::conv ? side.at("c").get<int>() : 4, 0);
  check_param_entries(side.at("entries"), m.params, "codec");
  if (m.params.total_size() > 0)
    load_param_blob((fs::path(dir) / (stem + ".bin")).string(), m.params);
  m.frozen = side.value("frozen", true);
  return m;
}

}  // namespace glyphforge
