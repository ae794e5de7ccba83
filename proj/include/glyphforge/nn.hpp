#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "glyphforge/autograd.hpp"
#include "glyphforge/rng.hpp"
#include "glyphforge/tensor.hpp"

namespace glyphforge {

struct Init {
  enum Kind { zeros, normal, fan_in } kind = fan_in;
  double std = 0.02;

  static Init zero() { return {zeros, 0.0}; }
  static Init gauss(double s) { return {normal, s}; }
  static Init fanin() { return {fan_in, 0.0}; }
};

// Flat parameter/gradient/optimizer-state storage for one trainable model.
// Entry names are stable identifiers: initialization is derived from
// (seed, name), so adding entries never reshuffles existing ones, and
// checkpoints can be validated entry-by-entry.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::int64_t offset = 0;
    std::int64_t size = 0;
    bool decay = false;
  };

  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  int add(const std::string& name, Shape shape, Init init, bool decay) {
    Entry e;
    e.name = name;
    e.shape = std::move(shape);
    e.size = shape_numel(e.shape);
    e.offset = data_.size();
    e.decay = decay;
    data_.conservativeResize(e.offset + e.size);
    rng::Stream st(seed_, "init/" + name);
    switch (init.kind) {
      case Init::zeros:
        data_.segment(e.offset, e.size).setZero();
        break;
      case Init::normal:
        for (std::int64_t i = 0; i < e.size; ++i)
          data_[e.offset + i] = static_cast<T>(st.normal(0.0, init.std));
        break;
      case Init::fan_in: {
        // shape (..., fan_out): fan_in = numel / last dim.
        std::int64_t fin = e.size / e.shape.back();
        double s = 1.0 / std::sqrt(static_cast<double>(fin));
        for (std::int64_t i = 0; i < e.size; ++i)
          data_[e.offset + i] = static_cast<T>(st.uniform(-s, s));
        break;
      }
    }
    entries_.push_back(e);
    return static_cast<int>(entries_.size()) - 1;
  }

  int count() const { return static_cast<int>(entries_.size()); }
  const Entry& entry(int pid) const { return entries_[pid]; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::int64_t total_size() const { return data_.size(); }
  std::uint64_t seed() const { return seed_; }

  Tensor<T> value(int pid) const {
    const Entry& e = entries_[pid];
    Tensor<T> t(e.shape);
    t.data = data_.segment(e.offset, e.size);
    return t;
  }
  void set_value(int pid, const Tensor<T>& t) {
    const Entry& e = entries_[pid];
    require_shape(t.numel() == e.size, "set_value: size mismatch");
    data_.segment(e.offset, e.size) = t.data;
  }

  typename Tensor<T>::Array& raw() { return data_; }
  const typename Tensor<T>::Array& raw() const { return data_; }

  void ensure_grads() {
    if (grads_.size() != data_.size()) grads_ = Tensor<T>::Array::Zero(data_.size());
  }
  void zero_grads() {
    ensure_grads();
    grads_.setZero();
  }
  typename Tensor<T>::Array& grads() {
    ensure_grads();
    return grads_;
  }

  void accumulate_grad(int pid, const Tensor<T>& g) {
    ensure_grads();
    const Entry& e = entries_[pid];
    grads_.segment(e.offset, e.size) += g.data;
  }

  // Decoupled-weight-decay Adam. `step` is 1-based.
  void adamw(std::int64_t step, T lr, T beta1, T beta2, T eps, T weight_decay) {
    ensure_grads();
    if (m_.size() != data_.size()) {
      m_ = Tensor<T>::Array::Zero(data_.size());
      v_ = Tensor<T>::Array::Zero(data_.size());
    }
    m_ = beta1 * m_ + (T(1) - beta1) * grads_;
    v_ = beta2 * v_ + (T(1) - beta2) * grads_.square();
    T c1 = T(1) / (T(1) - std::pow(beta1, static_cast<T>(step)));
    T c2 = T(1) / (T(1) - std::pow(beta2, static_cast<T>(step)));
    for (const Entry& e : entries_) {
      auto p = data_.segment(e.offset, e.size);
      auto m = m_.segment(e.offset, e.size);
      auto v = v_.segment(e.offset, e.size);
      if (e.decay && weight_decay > T(0)) p -= lr * weight_decay * p;
      p -= lr * (m * c1) / ((v * c2).sqrt() + eps);
    }
  }

  typename Tensor<T>::Array& adam_m() { return m_; }
  typename Tensor<T>::Array& adam_v() { return v_; }

  std::uint64_t content_hash() const {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(data_.data());
    std::size_t nbytes = static_cast<std::size_t>(data_.size()) * sizeof(T);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < nbytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  std::uint64_t seed_;
  std::vector<Entry> entries_;
  typename Tensor<T>::Array data_;
  typename Tensor<T>::Array grads_;
  typename Tensor<T>::Array m_, v_;
};

// One forward pass: a tape plus the stores participating in it. Parameters
// enter the tape once each (cached); `trainable` controls whether leaves
// request gradients, so the same model code serves training and inference.
template <typename T>
struct Frame {
  Tape<T>& tape;

  explicit Frame(Tape<T>& t) : tape(t) {}

  Var<T> param(ParamStore<T>& ps, int pid, bool trainable = true) {
    auto key = std::make_pair(&ps, pid);
    for (const auto& [k, v] : cache_)
      if (k == key) return v;
    Var<T> v = tape.leaf(ps.value(pid), trainable, trainable ? pid : -1);
    if (trainable) stores_.push_back({&ps, v.id});
    cache_.emplace_back(key, v);
    return v;
  }

  Var<T> constant(Tensor<T> t) { return tape.constant(std::move(t)); }

  // Flush gradients from tape leaves back into their stores.
  void collect_grads() {
    for (auto& [ps, id] : stores_) {
      auto& n = tape.node(id);
      if (n.param >= 0 && n.grad.numel() > 0)
        ps->accumulate_grad(n.param, n.grad);
    }
  }

 private:
  std::vector<std::pair<std::pair<ParamStore<T>*, int>, Var<T>>> cache_;
  std::vector<std::pair<ParamStore<T>*, int>> stores_;
};

// ---------------------------------------------------------------- layers

template <typename T>
struct Linear {
  int w = -1, b = -1;
  int in = 0, out = 0;

  static Linear create(ParamStore<T>& ps, const std::string& name, int in, int out,
                       bool bias = true, Init init = Init::fanin()) {
    Linear l;
    l.in = in;
    l.out = out;
    l.w = ps.add(name + ".w", {in, out}, init, true);
    if (bias) l.b = ps.add(name + ".b", {out}, Init::zero(), false);
    return l;
  }

  Var<T> operator()(Frame<T>& f, ParamStore<T>& ps, Var<T> x, bool trainable) const {
    Var<T> bias = b >= 0 ? f.param(ps, b, trainable) : Var<T>{};
    return ops::linear(x, f.param(ps, w, trainable), bias);
  }
};

template <typename T>
struct Conv2d {
  int w = -1, b = -1;
  ops::ConvSpec spec;

  static Conv2d create(ParamStore<T>& ps, const std::string& name, int kh, int kw,
                       int cin, int cout, ops::ConvSpec spec,
                       Init init = Init::fanin()) {
    Conv2d c;
    c.spec = spec;
    c.w = ps.add(name + ".w", {kh, kw, cin, cout}, init, true);
    c.b = ps.add(name + ".b", {cout}, Init::zero(), false);
    return c;
  }

  Var<T> operator()(Frame<T>& f, ParamStore<T>& ps, Var<T> x, bool trainable) const {
    return ops::conv2d(x, f.param(ps, w, trainable), f.param(ps, b, trainable), spec);
  }
};

template <typename T>
struct LayerNorm {
  int g = -1, b = -1;

  static LayerNorm create(ParamStore<T>& ps, const std::string& name, int dim) {
    LayerNorm n;
    n.g = ps.add(name + ".g", {dim}, Init{Init::zeros, 0.0}, false);
    n.b = ps.add(name + ".b", {dim}, Init::zero(), false);
    return n;
  }

  Var<T> operator()(Frame<T>& f, ParamStore<T>& ps, Var<T> x, bool trainable) const {
    // gamma is stored as an offset from 1 so zero-init means identity.
    Var<T> g1 = ops::add_scalar(f.param(ps, g, trainable), T(1));
    return ops::layernorm(x, g1, f.param(ps, b, trainable));
  }
};

template <typename T>
struct MultiheadAttention {
  Linear<T> q, k, v, o;
  int heads = 1;
  int dim = 0;

  static MultiheadAttention create(ParamStore<T>& ps, const std::string& name,
                                   int dim, int kv_dim, int heads,
                                   bool zero_out = false) {
    MultiheadAttention a;
    a.heads = heads;
    a.dim = dim;
    a.q = Linear<T>::create(ps, name + ".q", dim, dim);
    a.k = Linear<T>::create(ps, name + ".k", kv_dim, dim);
    a.v = Linear<T>::create(ps, name + ".v", kv_dim, dim);
    a.o = Linear<T>::create(ps, name + ".o", dim, dim,
                            true, zero_out ? Init::zero() : Init::fanin());
    return a;
  }

  // x: (N, Lq, D); ctx: (N, Lk, Dkv); mask: optional (N, Lk) additive keys.
  Var<T> operator()(Frame<T>& f, ParamStore<T>& ps, Var<T> x, Var<T> ctx,
                    const Tensor<T>* mask, bool trainable) const {
    const int N = x.val().shape[0], Lq = x.val().shape[1];
    const int Lk = ctx.val().shape[1];
    const int dh = dim / heads;
    auto qh = ops::permute_0213(ops::reshape(q(f, ps, x, trainable), {N, Lq, heads, dh}));
    auto kh = ops::permute_0213(ops::reshape(k(f, ps, ctx, trainable), {N, Lk, heads, dh}));
    auto vh = ops::permute_0213(ops::reshape(v(f, ps, ctx, trainable), {N, Lk, heads, dh}));
    auto scores = ops::bmm(qh, kh, false, true, T(1) / std::sqrt(T(dh)));
    auto p = ops::softmax_lastdim(scores, mask);
    auto ctxo = ops::bmm(p, vh, false, false);
    auto merged = ops::reshape(ops::permute_0213(ctxo), {N, Lq, dim});
    return o(f, ps, merged, trainable);
  }
};

template <typename T>
struct Mlp {
  Linear<T> fc1, fc2;

  static Mlp create(ParamStore<T>& ps, const std::string& name, int dim, int hidden,
                    bool zero_out = false) {
    Mlp m;
    m.fc1 = Linear<T>::create(ps, name + ".fc1", dim, hidden);
    m.fc2 = Linear<T>::create(ps, name + ".fc2", hidden, dim,
                              true, zero_out ? Init::zero() : Init::fanin());
    return m;
  }

  Var<T> operator()(Frame<T>& f, ParamStore<T>& ps, Var<T> x, bool trainable) const {
    return fc2(f, ps, ops::gelu(fc1(f, ps, x, trainable)), trainable);
  }
};

// ------------------------------------------------------------ fixed encodings

// Classic sin/cos features of scalar inputs; rows are inputs, dim must be even.
template <typename T>
Tensor<T> sinusoidal_features(const std::vector<T>& xs, int dim, T scale = T(1000)) {
  Tensor<T> out({static_cast<int>(xs.size()), dim});
  const int half = dim / 2;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    for (int i = 0; i < half; ++i) {
      T freq = std::exp(-std::log(scale) * T(i) / T(half));
      out.data[n * dim + i] = std::sin(xs[n] * scale * freq);
      out.data[n * dim + half + i] = std::cos(xs[n] * scale * freq);
    }
  }
  return out;
}

// Sinusoidal slot-position table (L, dim): position identity for sequence slots.
template <typename T>
Tensor<T> sinusoidal_table(int length, int dim) {
  Tensor<T> out({length, dim});
  const int half = dim / 2;
  for (int p = 0; p < length; ++p)
    for (int i = 0; i < half; ++i) {
      T freq = std::pow(T(10000), -T(i) / T(half));
      out.data[p * dim + i] = std::sin(T(p) * freq);
      out.data[p * dim + half + i] = std::cos(T(p) * freq);
    }
  return out;
}

}  // namespace glyphforge
