#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "glyphforge/tensor.hpp"

namespace glyphforge {

// Reverse-mode autodiff over Tensor<T>. A Tape owns the computation graph of
// one forward pass; nodes are appended in topological order, so backward() is
// a single reverse sweep. Graphs are rebuilt every step (dynamic).
//
// Gradients are accumulated with a fixed, schedule-independent order: every
// kernel either writes disjoint slices or reduces through a single Eigen GEMM,
// so results are bit-reproducible for a given build.
template <typename T>
class Tape;

template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<T>& val() const { return tape->value(id); }
  const Shape& shape() const { return tape->value(id).shape; }
  bool needs_grad() const { return tape->needs_grad(id); }
};

template <typename T>
class Tape {
 public:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;             // empty until touched by backward
    std::function<void()> backward;
    bool needs_grad = false;
    int param = -1;             // ParamStore entry for leaf parameters
  };

  Var<T> leaf(Tensor<T> v, bool needs_grad, int param = -1) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    n.param = param;
    nodes_.push_back(std::move(n));
    return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
  }
  Var<T> constant(Tensor<T> v) { return leaf(std::move(v), false); }

  Var<T> make(Tensor<T> v, bool needs_grad) { return leaf(std::move(v), needs_grad); }

  const Tensor<T>& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  Node& node(int id) { return nodes_[id]; }

  bool grad_present(int id) const { return nodes_[id].grad.numel() > 0; }

  // Accumulation target; allocated as zeros on first touch.
  Tensor<T>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.numel() == 0) n.grad = Tensor<T>(n.value.shape);
    return n.grad;
  }

  void set_backward(Var<T> out, std::function<void()> fn) {
    nodes_[out.id].backward = std::move(fn);
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(Var<T> loss) {
    require_shape(loss.val().numel() == 1, "backward: loss must be scalar");
    grad(loss.id).data[0] = T(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.numel() > 0) n.backward();
    }
  }

  std::size_t size() const { return nodes_.size(); }

  // Visit leaf parameter nodes that received gradients.
  template <typename Fn>
  void for_each_param_grad(Fn&& fn) {
    for (Node& n : nodes_) {
      if (n.param >= 0 && n.grad.numel() > 0) fn(n.param, n.grad);
    }
  }

 private:
  std::vector<Node> nodes_;
};

namespace ops {

template <typename T>
Tape<T>& tp(Var<T> v) {
  return *v.tape;
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_shape(a.val().same_shape(b.val()), "add: shape mismatch");
  Tensor<T> out = a.val();
  out.data += b.val().data;
  Var<T> o = tp(a).make(std::move(out), a.needs_grad() || b.needs_grad());
  if (o.needs_grad()) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, bi = b.id, oi = o.id] {
      const auto& g = t->node(oi).grad;
      if (t->needs_grad(ai)) t->grad(ai).data += g.data;
      if (t->needs_grad(bi)) t->grad(bi).data += g.data;
    });
  }
  return o;
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_shape(a.val().same_shape(b.val()), "sub: shape mismatch");
  Tensor<T> out = a.val();
  out.data -= b.val().data;
  Var<T> o = tp(a).make(std::move(out), a.needs_grad() || b.needs_grad());
  if (o.needs_grad()) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, bi = b.id, oi = o.id] {
      const auto& g = t->node(oi).grad;
      if (t->needs_grad(ai)) t->grad(ai).data += g.data;
      if (t->needs_grad(bi)) t->grad(bi).data -= g.data;
    });
  }
  return o;
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_shape(a.val().same_shape(b.val()), "mul: shape mismatch");
  Tensor<T> out = a.val();
  out.data *= b.val().data;
  Var<T> o = tp(a).make(std::move(out), a.needs_grad() || b.needs_grad());
  if (o.needs_grad()) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, bi = b.id, oi = o.id] {
      const auto& g = t->node(oi).grad;
      if (t->needs_grad(ai)) t->grad(ai).data += g.data * t->value(bi).data;
      if (t->needs_grad(bi)) t->grad(bi).data += g.data * t->value(ai).data;
    });
  }
  return o;
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
  Tensor<T> out = a.val();
  out.data *= c;
  Var<T> o = tp(a).make(std::move(out), a.needs_grad());
  if (o.needs_grad()) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, oi = o.id, c] {
      t->grad(ai).data += t->node(oi).grad.data * c;
    });
  }
  return o;
}

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
  Tensor<T> out = a.val();
  out.data += c;
  Var<T> o = tp(a).make(std::move(out), a.needs_grad());
  if (o.needs_grad()) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, oi = o.id] {
      t->grad(ai).data += t->node(oi).grad.data;
    });
  }
  return o;
}

template <typename T>
Var<T> gelu(Var<T> a) {
  // tanh approximation; smooth everywhere, which keeps finite-difference
  // gradient checks clean. The tanh factor is kept for the backward pass.
  const T k0 = T(0.7978845608028654);  // sqrt(2/pi)
  const T k1 = T(0.044715);
  const auto& x = a.val().data;
  Tensor<T> th_t;
  th_t.shape = a.val().shape;
  th_t.data = (k0 * (x + k1 * x.cube())).tanh();
  Tensor<T> out;
  out.shape = a.val().shape;
  out.data = T(0.5) * x * (T(1) + th_t.data);
  Var<T> o = tp(a).make(std::move(out), a.needs_grad());
  if (o.needs_grad()) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, oi = o.id, k0, k1,
                           th = std::move(th_t)] {
      const auto& g = t->node(oi).grad.data;
      const auto& xv = t->value(ai).data;
      t->grad(ai).data += g * (T(0.5) * (T(1) + th.data) +
                               T(0.5) * xv * (T(1) - th.data.square()) *
                                   (k0 * (T(1) + T(3) * k1 * xv.square())));
    });
  }
  return o;
}

template <typename T>
Var<T> silu(Var<T> a) {
  const auto& x = a.val().data;
  Tensor<T> sig;
  sig.shape = a.val().shape;
  sig.data = T(1) / (T(1) + (-x).exp());
  Tensor<T> out;
  out.shape = a.val().shape;
  out.data = x * sig.data;
  Var<T> o = tp(a).make(std::move(out), a.needs_grad());
  if (o.needs_grad()) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, oi = o.id, s = std::move(sig)] {
      const auto& g = t->node(oi).grad.data;
      const auto& xv = t->value(ai).data;
      t->grad(ai).data += g * (s.data + xv * s.data * (T(1) - s.data));
    });
  }
  return o;
}

template <typename T>
Var<T> reshape(Var<T> a, Shape s) {
  Tensor<T> out = a.val().reshaped(std::move(s));
  Var<T> o = tp(a).make(std::move(out), a.needs_grad());
  if (o.needs_grad()) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, oi = o.id] {
      t->grad(ai).data += t->node(oi).grad.data;
    });
  }
  return o;
}

// ------------------------------------------------------------------- matmuls

// x: (..., K) folded to rows; w: (K, N); optional bias (N).
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b = {}) {
  const int K = w.val().dim(0);
  const int N = w.val().dim(1);
  require_shape(x.val().dim(-1) == K, "linear: inner dim mismatch");
  std::int64_t R = x.val().numel() / K;
  Shape os = x.val().shape;
  os.back() = N;
  Tensor<T> out(os);
  out.mat(R, N).noalias() = x.val().mat(R, K) * w.val().mat(K, N);
  if (b.valid()) out.mat(R, N).rowwise() += b.val().mat(1, N).row(0);

  bool ng = x.needs_grad() || w.needs_grad() || (b.valid() && b.needs_grad());
  Var<T> o = tp(x).make(std::move(out), ng);
  if (ng) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, wi = w.id,
                           bi = b.valid() ? b.id : -1, oi = o.id, R, K, N] {
      const auto& g = t->node(oi).grad;
      auto gm = g.mat(R, N);
      if (t->needs_grad(xi))
        t->grad(xi).mat(R, K).noalias() += gm * t->value(wi).mat(K, N).transpose();
      if (t->needs_grad(wi))
        t->grad(wi).mat(K, N).noalias() +=
            t->value(xi).mat(R, K).transpose() * gm;
      if (bi >= 0 && t->needs_grad(bi))
        t->grad(bi).mat(1, N).row(0) += gm.colwise().sum();
    });
  }
  return o;
}

// Batched matmul over the leading dims: a (B..., M, K), b (B..., K, N) with
// optional logical transposes of the trailing two dims and a scalar factor.
template <typename T>
Var<T> bmm(Var<T> a, Var<T> b, bool ta, bool tb, T alpha = T(1)) {
  const auto& av = a.val();
  const auto& bv = b.val();
  require_shape(av.rank() == bv.rank() && av.rank() >= 3, "bmm: rank");
  std::int64_t B = 1;
  for (int i = 0; i + 2 < av.rank(); ++i) {
    require_shape(av.shape[i] == bv.shape[i], "bmm: batch dims");
    B *= av.shape[i];
  }
  int am = av.dim(-2), ak = av.dim(-1);
  int bk = bv.dim(-2), bn = bv.dim(-1);
  int M = ta ? ak : am, Ka = ta ? am : ak;
  int Kb = tb ? bn : bk, N = tb ? bk : bn;
  require_shape(Ka == Kb, "bmm: inner dim mismatch");
  Shape os(av.shape.begin(), av.shape.end() - 2);
  os.push_back(M);
  os.push_back(N);
  Tensor<T> out(os);

  const std::int64_t sa = std::int64_t(am) * ak, sb = std::int64_t(bk) * bn,
                     so = std::int64_t(M) * N;
  using CM = typename Tensor<T>::ConstMatMap;
  using MM = typename Tensor<T>::MatMap;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < B; ++i) {
    CM A(av.data.data() + i * sa, am, ak);
    CM Bm(bv.data.data() + i * sb, bk, bn);
    MM O(out.data.data() + i * so, M, N);
    if (!ta && !tb)
      O.noalias() = alpha * (A * Bm);
    else if (ta && !tb)
      O.noalias() = alpha * (A.transpose() * Bm);
    else if (!ta && tb)
      O.noalias() = alpha * (A * Bm.transpose());
    else
      O.noalias() = alpha * (A.transpose() * Bm.transpose());
  }

  bool ng = a.needs_grad() || b.needs_grad();
  Var<T> o = tp(a).make(std::move(out), ng);
  if (ng) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, bi = b.id, oi = o.id, B, am,
                           ak, bk, bn, M, N, sa, sb, so, ta, tb, alpha] {
      const auto& g = t->node(oi).grad;
      const auto& av2 = t->value(ai);
      const auto& bv2 = t->value(bi);
      bool na = t->needs_grad(ai), nb = t->needs_grad(bi);
      Tensor<T>* ga = na ? &t->grad(ai) : nullptr;
      Tensor<T>* gb = nb ? &t->grad(bi) : nullptr;
      using CM2 = typename Tensor<T>::ConstMatMap;
      using MM2 = typename Tensor<T>::MatMap;
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < B; ++i) {
        CM2 G(g.data.data() + i * so, M, N);
        CM2 A(av2.data.data() + i * sa, am, ak);
        CM2 Bm(bv2.data.data() + i * sb, bk, bn);
        if (na) {
          MM2 GA(ga->data.data() + i * sa, am, ak);
          if (!ta)
            GA.noalias() += alpha * (tb ? (G * Bm).eval() : (G * Bm.transpose()).eval());
          else
            GA.noalias() += alpha * (tb ? (Bm.transpose() * G.transpose()).eval()
                                        : (Bm * G.transpose()).eval());
        }
        if (nb) {
          MM2 GB(gb->data.data() + i * sb, bk, bn);
          if (!tb)
            GB.noalias() += alpha * (ta ? (A * G).eval() : (A.transpose() * G).eval());
          else
            GB.noalias() += alpha * (ta ? (G.transpose() * A.transpose()).eval()
                                        : (G.transpose() * A).eval());
        }
      }
    });
  }
  return o;
}

// -------------------------------------------------------------- permutations

// (A, B, C, D) -> (A, C, B, D); its own inverse up to swapping B and C.
template <typename T>
Var<T> permute_0213(Var<T> x) {
  const auto& v = x.val();
  require_shape(v.rank() == 4, "permute_0213: rank-4 required");
  int A = v.shape[0], B = v.shape[1], C = v.shape[2], D = v.shape[3];
  Tensor<T> out({A, C, B, D});
#pragma omp parallel for schedule(static)
  for (int a = 0; a < A; ++a)
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        std::copy_n(&v.data[((std::int64_t(a) * B + b) * C + c) * D], D,
                    &out.data[((std::int64_t(a) * C + c) * B + b) * D]);
  Var<T> o = tp(x).make(std::move(out), x.needs_grad());
  if (o.needs_grad()) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, oi = o.id, A, B, C, D] {
      const auto& g = t->node(oi).grad;
      auto& gx = t->grad(xi);
#pragma omp parallel for schedule(static)
      for (int a = 0; a < A; ++a)
        for (int c = 0; c < C; ++c)
          for (int b = 0; b < B; ++b)
            for (int d = 0; d < D; ++d)
              gx.data[((std::int64_t(a) * B + b) * C + c) * D + d] +=
                  g.data[((std::int64_t(a) * C + c) * B + b) * D + d];
    });
  }
  return o;
}

// ------------------------------------------------------------------- softmax

// Softmax over the last dim with an optional additive key mask of shape
// (batch0, L) broadcast over the middle dims. Mask entries are 0 for valid
// keys and a large negative value for padding; padded weights underflow to
// exactly 0, so padded values cannot influence the output.
template <typename T>
Var<T> softmax_lastdim(Var<T> x, const Tensor<T>* key_mask = nullptr) {
  const auto& v = x.val();
  const int L = v.dim(-1);
  const std::int64_t R = v.numel() / L;
  Tensor<T> out = v;
  std::int64_t rows_per_b0 = 1;
  if (key_mask != nullptr) {
    require_shape(key_mask->rank() == 2 && key_mask->dim(1) == L &&
                      key_mask->dim(0) == v.shape[0],
                  "softmax: key mask shape");
    rows_per_b0 = R / v.shape[0];
  }
  const Tensor<T> mask_copy = key_mask ? *key_mask : Tensor<T>();
  using VecMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
  using CVecMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < R; ++r) {
    VecMap row(out.data.data() + r * L, L);
    if (key_mask != nullptr)
      row += CVecMap(mask_copy.data.data() + (r / rows_per_b0) * L, L);
    row = (row - row.maxCoeff()).exp();
    row /= row.sum();
  }
  Var<T> o = tp(x).make(std::move(out), x.needs_grad());
  if (o.needs_grad()) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, oi = o.id, R, L] {
      const auto& g = t->node(oi).grad;
      const auto& y = t->value(oi);
      auto& gx = t->grad(xi);
#pragma omp parallel for schedule(static)
      for (std::int64_t r = 0; r < R; ++r) {
        CVecMap gr(g.data.data() + r * L, L);
        CVecMap yr(y.data.data() + r * L, L);
        VecMap gxr(gx.data.data() + r * L, L);
        T dot = (gr * yr).sum();
        gxr += (gr - dot) * yr;
      }
    });
  }
  return o;
}

// ----------------------------------------------------------------- layernorm

template <typename T>
Var<T> layernorm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
  const auto& v = x.val();
  const int C = v.dim(-1);
  const std::int64_t R = v.numel() / C;
  require_shape(gamma.val().numel() == C && beta.val().numel() == C,
                "layernorm: affine params");
  Tensor<T> out(v.shape);
  Tensor<T> xhat(v.shape);
  Tensor<T> invstd({static_cast<int>(R)});
  using VecMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
  using CVecMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
  CVecMap gp(gamma.val().data.data(), C);
  CVecMap bp(beta.val().data.data(), C);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < R; ++r) {
    CVecMap xr(v.data.data() + r * C, C);
    T mean = xr.mean();
    T var = (xr - mean).square().sum() / C;
    T is = T(1) / std::sqrt(var + eps);
    invstd.data[r] = is;
    VecMap hr(xhat.data.data() + r * C, C);
    VecMap yr(out.data.data() + r * C, C);
    hr = (xr - mean) * is;
    yr = hr * gp + bp;
  }
  bool ng = x.needs_grad() || gamma.needs_grad() || beta.needs_grad();
  Var<T> o = tp(x).make(std::move(out), ng);
  if (ng) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, gi = gamma.id, bi = beta.id,
                           oi = o.id, R, C, xhat = std::move(xhat),
                           invstd = std::move(invstd)] {
      const auto& g = t->node(oi).grad;
      const auto& gam = t->value(gi);
      using VM = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
      using CM = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
      CM gamv(gam.data.data(), C);
      if (t->needs_grad(xi)) {
        auto& gx = t->grad(xi);
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < R; ++r) {
          CM gr(g.data.data() + r * C, C);
          CM hr(xhat.data.data() + r * C, C);
          VM gxr(gx.data.data() + r * C, C);
          auto dh = gr * gamv;
          T m1 = dh.sum() / C;
          T m2 = (dh * hr).sum() / C;
          gxr += invstd.data[r] * (dh - m1 - hr * m2);
        }
      }
      if (t->needs_grad(gi)) {
        VM gg(t->grad(gi).data.data(), C);
        for (std::int64_t r = 0; r < R; ++r)
          gg += CM(g.data.data() + r * C, C) * CM(xhat.data.data() + r * C, C);
      }
      if (t->needs_grad(bi)) {
        VM gb(t->grad(bi).data.data(), C);
        for (std::int64_t r = 0; r < R; ++r) gb += CM(g.data.data() + r * C, C);
      }
    });
  }
  return o;
}

// -------------------------------------------------------------- convolutions

struct ConvSpec {
  int stride = 1;
  int pad = 0;
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

// Gathers receptive fields into a ((N*Ho*Wo) x (kh*kw*C)) matrix. Rows are
// ordered (n, oh, ow); each row holds C-contiguous runs per kernel tap.
template <typename T>
Tensor<T> im2col(const Tensor<T>& x, int kh, int kw, ConvSpec sp, int Ho, int Wo) {
  const int N = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
  Tensor<T> cols({static_cast<int>(N * Ho * Wo), kh * kw * C});
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int oh = 0; oh < Ho; ++oh) {
      for (int ow = 0; ow < Wo; ++ow) {
        T* row = cols.data.data() +
                 (std::int64_t(n) * Ho * Wo + std::int64_t(oh) * Wo + ow) * kh * kw * C;
        for (int ky = 0; ky < kh; ++ky) {
          int iy = oh * sp.stride - sp.pad + ky;
          for (int kx = 0; kx < kw; ++kx) {
            int ix = ow * sp.stride - sp.pad + kx;
            T* dst = row + (ky * kw + kx) * C;
            if (iy >= 0 && iy < H && ix >= 0 && ix < W)
              std::copy_n(&x.data[((std::int64_t(n) * H + iy) * W + ix) * C], C, dst);
            else
              std::fill_n(dst, C, T(0));
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
void col2im_acc(const Tensor<T>& cols, Tensor<T>& gx, int kh, int kw, ConvSpec sp,
                int Ho, int Wo) {
  const int N = gx.shape[0], H = gx.shape[1], W = gx.shape[2], C = gx.shape[3];
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int oh = 0; oh < Ho; ++oh) {
      for (int ow = 0; ow < Wo; ++ow) {
        const T* row =
            cols.data.data() +
            (std::int64_t(n) * Ho * Wo + std::int64_t(oh) * Wo + ow) * kh * kw * C;
        for (int ky = 0; ky < kh; ++ky) {
          int iy = oh * sp.stride - sp.pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < kw; ++kx) {
            int ix = ow * sp.stride - sp.pad + kx;
            if (ix < 0 || ix >= W) continue;
            T* dst = &gx.data[((std::int64_t(n) * H + iy) * W + ix) * C];
            const T* src = row + (ky * kw + kx) * C;
            for (int c = 0; c < C; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

}  // namespace detail

// x: (N, H, W, Cin)  w: (kh, kw, Cin, Cout)  b: (Cout) optional.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, ConvSpec sp) {
  const auto& xv = x.val();
  const auto& wv = w.val();
  require_shape(xv.rank() == 4 && wv.rank() == 4, "conv2d: rank");
  require_shape(xv.dim(3) == wv.dim(2), "conv2d: channel mismatch");
  const int N = xv.shape[0], H = xv.shape[1], W = xv.shape[2];
  const int kh = wv.shape[0], kw = wv.shape[1], Cin = wv.shape[2], Cout = wv.shape[3];
  const int Ho = conv_out_dim(H, kh, sp.stride, sp.pad);
  const int Wo = conv_out_dim(W, kw, sp.stride, sp.pad);
  require_shape(Ho > 0 && Wo > 0, "conv2d: output dims");

  Tensor<T> cols = detail::im2col(xv, kh, kw, sp, Ho, Wo);
  const std::int64_t R = std::int64_t(N) * Ho * Wo;
  const int K = kh * kw * Cin;
  Tensor<T> out({N, Ho, Wo, Cout});
  out.mat(R, Cout).noalias() = cols.mat(R, K) * wv.mat(K, Cout);
  if (b.valid()) out.mat(R, Cout).rowwise() += b.val().mat(1, Cout).row(0);

  bool ng = x.needs_grad() || w.needs_grad() || (b.valid() && b.needs_grad());
  Var<T> o = tp(x).make(std::move(out), ng);
  if (ng) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, wi = w.id,
                           bi = b.valid() ? b.id : -1, oi = o.id,
                           cols = std::move(cols), kh, kw, sp, Ho, Wo, R, K,
                           Cout] {
      const auto& g = t->node(oi).grad;
      auto gm = g.mat(R, Cout);
      if (t->needs_grad(wi))
        t->grad(wi).mat(K, Cout).noalias() += cols.mat(R, K).transpose() * gm;
      if (bi >= 0 && t->needs_grad(bi))
        t->grad(bi).mat(1, Cout).row(0) += gm.colwise().sum();
      if (t->needs_grad(xi)) {
        Tensor<T> dcols({static_cast<int>(R), K});
        dcols.mat(R, K).noalias() = gm * t->value(wi).mat(K, Cout).transpose();
        detail::col2im_acc(dcols, t->grad(xi), kh, kw, sp, Ho, Wo);
      }
    });
  }
  return o;
}

// Nearest-neighbour 2x upsample of (N, H, W, C).
template <typename T>
Var<T> upsample2x(Var<T> x) {
  const auto& v = x.val();
  require_shape(v.rank() == 4, "upsample2x: rank-4 required");
  const int N = v.shape[0], H = v.shape[1], W = v.shape[2], C = v.shape[3];
  Tensor<T> out({N, 2 * H, 2 * W, C});
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < 2 * H; ++y)
      for (int xw = 0; xw < 2 * W; ++xw)
        std::copy_n(&v.data[((std::int64_t(n) * H + y / 2) * W + xw / 2) * C], C,
                    &out.data[((std::int64_t(n) * 2 * H + y) * 2 * W + xw) * C]);
  Var<T> o = tp(x).make(std::move(out), x.needs_grad());
  if (o.needs_grad()) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, oi = o.id, N, H, W, C] {
      const auto& g = t->node(oi).grad;
      auto& gx = t->grad(xi);
#pragma omp parallel for schedule(static)
      for (int n = 0; n < N; ++n)
        for (int y = 0; y < 2 * H; ++y)
          for (int xw = 0; xw < 2 * W; ++xw)
            for (int c = 0; c < C; ++c)
              gx.data[((std::int64_t(n) * H + y / 2) * W + xw / 2) * C + c] +=
                  g.data[((std::int64_t(n) * 2 * H + y) * 2 * W + xw) * C + c];
    });
  }
  return o;
}

// --------------------------------------------------------- shape composition

// Concatenate along the last dim. Zero-channel inputs are legal no-ops.
template <typename T>
Var<T> concat_lastdim(const std::vector<Var<T>>& parts) {
  require_shape(!parts.empty(), "concat: empty");
  Shape base = parts[0].val().shape;
  int Ctot = 0;
  bool ng = false;
  for (const auto& p : parts) {
    const auto& s = p.val().shape;
    require_shape(s.size() == base.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
      require_shape(s[i] == base[i], "concat: leading dims mismatch");
    Ctot += s.back();
    ng = ng || p.needs_grad();
  }
  Shape os = base;
  os.back() = Ctot;
  Tensor<T> out(os);
  const std::int64_t R = out.numel() / std::max(Ctot, 1);
  int off = 0;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const int c = p.val().dim(-1);
    if (c > 0) {
      const auto& pv = p.val();
      for (std::int64_t r = 0; r < R; ++r)
        std::copy_n(&pv.data[r * c], c, &out.data[r * Ctot + off]);
    }
    off += c;
  }
  Tape<T>* t0 = parts[0].tape;
  Var<T> o = t0->make(std::move(out), ng);
  if (ng) {
    std::vector<int> ids;
    std::vector<int> widths;
    for (const auto& p : parts) {
      ids.push_back(p.id);
      widths.push_back(p.val().dim(-1));
    }
    t0->set_backward(o, [t = t0, ids, widths, offsets, oi = o.id, R, Ctot] {
      const auto& g = t->node(oi).grad;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        if (widths[k] == 0 || !t->needs_grad(ids[k])) continue;
        auto& gk = t->grad(ids[k]);
        for (std::int64_t r = 0; r < R; ++r)
          for (int c = 0; c < widths[k]; ++c)
            gk.data[r * widths[k] + c] += g.data[r * Ctot + offsets[k] + c];
      }
    });
  }
  return o;
}

template <typename T>
Var<T> slice_lastdim(Var<T> x, int off, int len) {
  const auto& v = x.val();
  const int C = v.dim(-1);
  require_shape(off >= 0 && len >= 0 && off + len <= C, "slice: bounds");
  Shape os = v.shape;
  os.back() = len;
  Tensor<T> out(os);
  const std::int64_t R = v.numel() / C;
  for (std::int64_t r = 0; r < R; ++r)
    std::copy_n(&v.data[r * C + off], len, &out.data[r * len]);
  Var<T> o = tp(x).make(std::move(out), x.needs_grad());
  if (o.needs_grad()) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, oi = o.id, off, len, C, R] {
      const auto& g = t->node(oi).grad;
      auto& gx = t->grad(xi);
      for (std::int64_t r = 0; r < R; ++r)
        for (int c = 0; c < len; ++c) gx.data[r * C + off + c] += g.data[r * len + c];
    });
  }
  return o;
}

// Concatenate rank-3 (N, L, D) tensors along the sequence axis.
template <typename T>
Var<T> concat_seq(Var<T> a, Var<T> b) {
  const auto& av = a.val();
  const auto& bv = b.val();
  require_shape(av.rank() == 3 && bv.rank() == 3 && av.shape[0] == bv.shape[0] &&
                    av.shape[2] == bv.shape[2],
                "concat_seq: shapes");
  const int N = av.shape[0], La = av.shape[1], Lb = bv.shape[1], D = av.shape[2];
  Tensor<T> out({N, La + Lb, D});
  for (int n = 0; n < N; ++n) {
    std::copy_n(&av.data[std::int64_t(n) * La * D], std::int64_t(La) * D,
                &out.data[std::int64_t(n) * (La + Lb) * D]);
    std::copy_n(&bv.data[std::int64_t(n) * Lb * D], std::int64_t(Lb) * D,
                &out.data[std::int64_t(n) * (La + Lb) * D + std::int64_t(La) * D]);
  }
  bool ng = a.needs_grad() || b.needs_grad();
  Var<T> o = tp(a).make(std::move(out), ng);
  if (ng) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, bi = b.id, oi = o.id, N, La, Lb, D] {
      const auto& g = t->node(oi).grad;
      if (t->needs_grad(ai)) {
        auto& ga = t->grad(ai);
        for (int n = 0; n < N; ++n)
          for (std::int64_t i = 0; i < std::int64_t(La) * D; ++i)
            ga.data[std::int64_t(n) * La * D + i] +=
                g.data[std::int64_t(n) * (La + Lb) * D + i];
      }
      if (t->needs_grad(bi)) {
        auto& gb = t->grad(bi);
        for (int n = 0; n < N; ++n)
          for (std::int64_t i = 0; i < std::int64_t(Lb) * D; ++i)
            gb.data[std::int64_t(n) * Lb * D + i] +=
                g.data[std::int64_t(n) * (La + Lb) * D + std::int64_t(La) * D + i];
      }
    });
  }
  return o;
}

// --------------------------------------------------------------- broadcasts

// y[n,t,:] = x[n,t,:] * (1 + scale[n,:]) + shift[n,:]
template <typename T>
Var<T> affine_tokens(Var<T> x, Var<T> scale_v, Var<T> shift_v) {
  const auto& v = x.val();
  require_shape(v.rank() == 3, "affine_tokens: rank");
  const int N = v.shape[0], L = v.shape[1], D = v.shape[2];
  require_shape(scale_v.val().numel() == std::int64_t(N) * D &&
                    shift_v.val().numel() == std::int64_t(N) * D,
                "affine_tokens: mod shapes");
  Tensor<T> out(v.shape);
  const auto& sv = scale_v.val();
  const auto& hv = shift_v.val();
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n)
    for (int l = 0; l < L; ++l)
      for (int d = 0; d < D; ++d)
        out.data[(std::int64_t(n) * L + l) * D + d] =
            v.data[(std::int64_t(n) * L + l) * D + d] *
                (T(1) + sv.data[std::int64_t(n) * D + d]) +
            hv.data[std::int64_t(n) * D + d];
  bool ng = x.needs_grad() || scale_v.needs_grad() || shift_v.needs_grad();
  Var<T> o = tp(x).make(std::move(out), ng);
  if (ng) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, si = scale_v.id,
                           hi = shift_v.id, oi = o.id, N, L, D] {
      const auto& g = t->node(oi).grad;
      const auto& xv2 = t->value(xi);
      const auto& sv2 = t->value(si);
      if (t->needs_grad(xi)) {
        auto& gx = t->grad(xi);
#pragma omp parallel for schedule(static)
        for (int n = 0; n < N; ++n)
          for (int l = 0; l < L; ++l)
            for (int d = 0; d < D; ++d)
              gx.data[(std::int64_t(n) * L + l) * D + d] +=
                  g.data[(std::int64_t(n) * L + l) * D + d] *
                  (T(1) + sv2.data[std::int64_t(n) * D + d]);
      }
      if (t->needs_grad(si)) {
        auto& gs = t->grad(si);
        for (int n = 0; n < N; ++n)
          for (int l = 0; l < L; ++l)
            for (int d = 0; d < D; ++d)
              gs.data[std::int64_t(n) * D + d] +=
                  g.data[(std::int64_t(n) * L + l) * D + d] *
                  xv2.data[(std::int64_t(n) * L + l) * D + d];
      }
      if (t->needs_grad(hi)) {
        auto& gh = t->grad(hi);
        for (int n = 0; n < N; ++n)
          for (int l = 0; l < L; ++l)
            for (int d = 0; d < D; ++d)
              gh.data[std::int64_t(n) * D + d] +=
                  g.data[(std::int64_t(n) * L + l) * D + d];
      }
    });
  }
  return o;
}

// y[n,t,:] = x[n,t,:] * gate[n,:]
template <typename T>
Var<T> mul_tokens(Var<T> x, Var<T> gate) {
  const auto& v = x.val();
  require_shape(v.rank() == 3, "mul_tokens: rank");
  const int N = v.shape[0], L = v.shape[1], D = v.shape[2];
  require_shape(gate.val().numel() == std::int64_t(N) * D, "mul_tokens: gate shape");
  Tensor<T> out(v.shape);
  const auto& gv = gate.val();
  for (int n = 0; n < N; ++n)
    for (int l = 0; l < L; ++l)
      for (int d = 0; d < D; ++d)
        out.data[(std::int64_t(n) * L + l) * D + d] =
            v.data[(std::int64_t(n) * L + l) * D + d] *
            gv.data[std::int64_t(n) * D + d];
  bool ng = x.needs_grad() || gate.needs_grad();
  Var<T> o = tp(x).make(std::move(out), ng);
  if (ng) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, gi = gate.id, oi = o.id, N, L, D] {
      const auto& g = t->node(oi).grad;
      const auto& xv2 = t->value(xi);
      const auto& gv2 = t->value(gi);
      if (t->needs_grad(xi)) {
        auto& gx = t->grad(xi);
        for (int n = 0; n < N; ++n)
          for (int l = 0; l < L; ++l)
            for (int d = 0; d < D; ++d)
              gx.data[(std::int64_t(n) * L + l) * D + d] +=
                  g.data[(std::int64_t(n) * L + l) * D + d] *
                  gv2.data[std::int64_t(n) * D + d];
      }
      if (t->needs_grad(gi)) {
        auto& gg = t->grad(gi);
        for (int n = 0; n < N; ++n)
          for (int l = 0; l < L; ++l)
            for (int d = 0; d < D; ++d)
              gg.data[std::int64_t(n) * D + d] +=
                  g.data[(std::int64_t(n) * L + l) * D + d] *
                  xv2.data[(std::int64_t(n) * L + l) * D + d];
      }
    });
  }
  return o;
}

// Per-sample scalar multiply: y[n, ...] = x[n, ...] * s[n].
template <typename T>
Var<T> mul_per_sample(Var<T> x, Var<T> s) {
  const auto& v = x.val();
  const int N = v.shape[0];
  require_shape(s.val().numel() == N, "mul_per_sample: scalar count");
  const std::int64_t stride = v.numel() / N;
  Tensor<T> out = v;
  for (int n = 0; n < N; ++n)
    out.data.segment(n * stride, stride) *= s.val().data[n];
  bool ng = x.needs_grad() || s.needs_grad();
  Var<T> o = tp(x).make(std::move(out), ng);
  if (ng) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, si = s.id, oi = o.id, N, stride] {
      const auto& g = t->node(oi).grad;
      if (t->needs_grad(xi)) {
        auto& gx = t->grad(xi);
        for (int n = 0; n < N; ++n)
          gx.data.segment(n * stride, stride) +=
              g.data.segment(n * stride, stride) * t->value(si).data[n];
      }
      if (t->needs_grad(si)) {
        auto& gs = t->grad(si);
        for (int n = 0; n < N; ++n)
          gs.data[n] += (g.data.segment(n * stride, stride) *
                         t->value(xi).data.segment(n * stride, stride))
                            .sum();
      }
    });
  }
  return o;
}

// Adds a (L, D) table to every sample of (N, L, D).
template <typename T>
Var<T> add_posemb(Var<T> x, Var<T> pos) {
  const auto& v = x.val();
  require_shape(v.rank() == 3, "add_posemb: rank");
  const int N = v.shape[0];
  const std::int64_t LD = std::int64_t(v.shape[1]) * v.shape[2];
  require_shape(pos.val().numel() == LD, "add_posemb: table shape");
  Tensor<T> out = v;
  for (int n = 0; n < N; ++n) out.data.segment(n * LD, LD) += pos.val().data;
  bool ng = x.needs_grad() || pos.needs_grad();
  Var<T> o = tp(x).make(std::move(out), ng);
  if (ng) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, pi = pos.id, oi = o.id, N, LD] {
      const auto& g = t->node(oi).grad;
      if (t->needs_grad(xi)) t->grad(xi).data += g.data;
      if (t->needs_grad(pi)) {
        auto& gp = t->grad(pi);
        for (int n = 0; n < N; ++n) gp.data += g.data.segment(n * LD, LD);
      }
    });
  }
  return o;
}

// ---------------------------------------------------------------- embeddings

// table: (V, D); ids: flat index list defining leading shape `lead`.
template <typename T>
Var<T> embedding(Var<T> table, const std::vector<int>& ids, Shape lead) {
  const auto& tv = table.val();
  require_shape(tv.rank() == 2, "embedding: table rank");
  const int V = tv.shape[0], D = tv.shape[1];
  require_shape(shape_numel(lead) == static_cast<std::int64_t>(ids.size()),
                "embedding: ids vs lead shape");
  Shape os = lead;
  os.push_back(D);
  Tensor<T> out(os);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require_shape(ids[i] >= 0 && ids[i] < V, "embedding: id out of range");
    std::copy_n(&tv.data[std::int64_t(ids[i]) * D], D, &out.data[i * D]);
  }
  Var<T> o = tp(table).make(std::move(out), table.needs_grad());
  if (o.needs_grad()) {
    tp(table).set_backward(o, [t = table.tape, ti = table.id, oi = o.id, ids, D] {
      const auto& g = t->node(oi).grad;
      auto& gt = t->grad(ti);
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int d = 0; d < D; ++d)
          gt.data[std::int64_t(ids[i]) * D + d] += g.data[i * D + d];
    });
  }
  return o;
}

// Replaces rows of a (N, L, D) sequence at given (sample, position) slots with
// rows of a (R, D) tensor. Used for placeholder substitution.
template <typename T>
Var<T> replace_rows(Var<T> base, Var<T> rows,
                    const std::vector<std::pair<int, int>>& slots) {
  const auto& bv = base.val();
  require_shape(bv.rank() == 3, "replace_rows: rank");
  const int L = bv.shape[1], D = bv.shape[2];
  require_shape(rows.val().rank() == 2 && rows.val().shape[1] == D &&
                    rows.val().shape[0] == static_cast<int>(slots.size()),
                "replace_rows: rows shape");
  Tensor<T> out = bv;
  for (std::size_t r = 0; r < slots.size(); ++r) {
    auto [n, l] = slots[r];
    std::copy_n(&rows.val().data[std::int64_t(r) * D], D,
                &out.data[(std::int64_t(n) * L + l) * D]);
  }
  bool ng = base.needs_grad() || rows.needs_grad();
  Var<T> o = tp(base).make(std::move(out), ng);
  if (ng) {
    tp(base).set_backward(o, [t = base.tape, bi = base.id, ri = rows.id,
                              oi = o.id, slots, L, D] {
      const auto& g = t->node(oi).grad;
      if (t->needs_grad(bi)) {
        Tensor<T> gb = g;
        for (auto [n, l] : slots)
          std::fill_n(&gb.data[(std::int64_t(n) * L + l) * D], D, T(0));
        t->grad(bi).data += gb.data;
      }
      if (t->needs_grad(ri)) {
        auto& gr = t->grad(ri);
        for (std::size_t r = 0; r < slots.size(); ++r) {
          auto [n, l] = slots[r];
          for (int d = 0; d < D; ++d)
            gr.data[std::int64_t(r) * D + d] += g.data[(std::int64_t(n) * L + l) * D + d];
        }
      }
    });
  }
  return o;
}

// ----------------------------------------------------------------- reductions

// Mean over axis 1 of (N, H, W, C) -> (N, W, C).
template <typename T>
Var<T> mean_over_height(Var<T> x) {
  const auto& v = x.val();
  require_shape(v.rank() == 4, "mean_over_height: rank");
  const int N = v.shape[0], H = v.shape[1], W = v.shape[2], C = v.shape[3];
  Tensor<T> out({N, W, C});
  for (int n = 0; n < N; ++n)
    for (int h = 0; h < H; ++h)
      for (std::int64_t i = 0; i < std::int64_t(W) * C; ++i)
        out.data[std::int64_t(n) * W * C + i] +=
            v.data[(std::int64_t(n) * H + h) * W * C + i];
  out.data /= T(H);
  Var<T> o = tp(x).make(std::move(out), x.needs_grad());
  if (o.needs_grad()) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, oi = o.id, N, H, W, C] {
      const auto& g = t->node(oi).grad;
      auto& gx = t->grad(xi);
      for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
          for (std::int64_t i = 0; i < std::int64_t(W) * C; ++i)
            gx.data[(std::int64_t(n) * H + h) * W * C + i] +=
                g.data[std::int64_t(n) * W * C + i] / T(H);
    });
  }
  return o;
}

template <typename T>
Var<T> sum_all(Var<T> x) {
  Tensor<T> out = Tensor<T>::scalar(x.val().data.sum());
  Var<T> o = tp(x).make(std::move(out), x.needs_grad());
  if (o.needs_grad()) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, oi = o.id] {
      t->grad(xi).data += t->node(oi).grad.data[0];
    });
  }
  return o;
}

template <typename T>
Var<T> mean_all(Var<T> x) {
  return scale(sum_all(x), T(1) / T(x.val().numel()));
}

// Mean squared error between a var and a constant target (fused).
template <typename T>
Var<T> mse_vs_const(Var<T> a, const Tensor<T>& target) {
  require_shape(a.val().same_shape(target), "mse: shape mismatch");
  const std::int64_t n = a.val().numel();
  Tensor<T> diff = a.val();
  diff.data -= target.data;
  T v = diff.data.square().sum() / T(n);
  Var<T> o = tp(a).make(Tensor<T>::scalar(v), a.needs_grad());
  if (o.needs_grad()) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, oi = o.id,
                           diff = std::move(diff), n] {
      t->grad(ai).data += t->node(oi).grad.data[0] * T(2) / T(n) * diff.data;
    });
  }
  return o;
}

template <typename T>
Var<T> mse(Var<T> a, Var<T> b) {
  require_shape(a.val().same_shape(b.val()), "mse: shape mismatch");
  const std::int64_t n = a.val().numel();
  Tensor<T> diff = a.val();
  diff.data -= b.val().data;
  T v = diff.data.square().sum() / T(n);
  bool ng = a.needs_grad() || b.needs_grad();
  Var<T> o = tp(a).make(Tensor<T>::scalar(v), ng);
  if (ng) {
    tp(a).set_backward(o, [t = a.tape, ai = a.id, bi = b.id, oi = o.id,
                           diff = std::move(diff), n] {
      T g = t->node(oi).grad.data[0] * T(2) / T(n);
      if (t->needs_grad(ai)) t->grad(ai).data += g * diff.data;
      if (t->needs_grad(bi)) t->grad(bi).data -= g * diff.data;
    });
  }
  return o;
}

// One RTP pyramid level: mean over samples of
//   sum_{h,w,c} mask[n,h,w] * (f[n,h,w,c] - ref[n,h,w,c])^2 / norm[n]
// where norm[n] = sum_{h,w} mask[n,h,w]; samples with norm 0 contribute 0.
template <typename T>
Var<T> masked_sq_err_per_sample(Var<T> f, const Tensor<T>& ref,
                                const Tensor<T>& mask) {
  const auto& v = f.val();
  require_shape(v.same_shape(ref), "masked_sq_err: ref shape");
  require_shape(v.rank() == 4, "masked_sq_err: rank");
  const int N = v.shape[0], H = v.shape[1], W = v.shape[2], C = v.shape[3];
  require_shape(mask.rank() == 4 && mask.shape[0] == N && mask.shape[1] == H &&
                    mask.shape[2] == W && mask.shape[3] == 1,
                "masked_sq_err: mask shape");
  std::vector<T> norms(N, T(0));
  for (int n = 0; n < N; ++n)
    norms[n] = mask.data.segment(std::int64_t(n) * H * W, std::int64_t(H) * W).sum();
  T total = T(0);
  for (int n = 0; n < N; ++n) {
    if (norms[n] <= T(0)) continue;
    T acc = T(0);
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w) {
        T m = mask.data[(std::int64_t(n) * H + h) * W + w];
        if (m == T(0)) continue;
        const std::int64_t base = ((std::int64_t(n) * H + h) * W + w) * C;
        for (int c = 0; c < C; ++c) {
          T d = v.data[base + c] - ref.data[base + c];
          acc += m * d * d;
        }
      }
    total += acc / norms[n];
  }
  total /= T(N);
  Var<T> o = tp(f).make(Tensor<T>::scalar(total), f.needs_grad());
  if (o.needs_grad()) {
    tp(f).set_backward(o, [t = f.tape, fi = f.id, oi = o.id, ref, mask, norms,
                           N, H, W, C] {
      T g = t->node(oi).grad.data[0];
      const auto& v2 = t->value(fi);
      auto& gf = t->grad(fi);
      for (int n = 0; n < N; ++n) {
        if (norms[n] <= T(0)) continue;
        T k = g * T(2) / (norms[n] * T(N));
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            T m = mask.data[(std::int64_t(n) * H + h) * W + w];
            if (m == T(0)) continue;
            const std::int64_t base = ((std::int64_t(n) * H + h) * W + w) * C;
            for (int c = 0; c < C; ++c)
              gf.data[base + c] += k * m * (v2.data[base + c] - ref.data[base + c]);
          }
      }
    });
  }
  return o;
}

// Mean over the channel dim of (N, H, W, C) -> (N, H, W, 1).
template <typename T>
Var<T> mean_channels(Var<T> x) {
  const auto& v = x.val();
  require_shape(v.rank() == 4, "mean_channels: rank");
  const int C = v.shape[3];
  const std::int64_t R = v.numel() / C;
  Tensor<T> out({v.shape[0], v.shape[1], v.shape[2], 1});
  for (std::int64_t r = 0; r < R; ++r) {
    T s = T(0);
    for (int c = 0; c < C; ++c) s += v.data[r * C + c];
    out.data[r] = s / T(C);
  }
  Var<T> o = tp(x).make(std::move(out), x.needs_grad());
  if (o.needs_grad()) {
    tp(x).set_backward(o, [t = x.tape, xi = x.id, oi = o.id, R, C] {
      const auto& g = t->node(oi).grad;
      auto& gx = t->grad(xi);
      for (std::int64_t r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) gx.data[r * C + c] += g.data[r] / T(C);
    });
  }
  return o;
}

// Loss value with an externally supplied gradient (for losses whose gradient
// is computed by a dedicated routine, e.g. CTC forward-backward).
template <typename T>
Var<T> external_grad_loss(Var<T> input, T value, Tensor<T> grad_wrt_input) {
  require_shape(grad_wrt_input.same_shape(input.val()), "external_grad_loss: shape");
  Var<T> o = tp(input).make(Tensor<T>::scalar(value), input.needs_grad());
  if (o.needs_grad()) {
    tp(input).set_backward(o, [t = input.tape, ii = input.id, oi = o.id,
                               gg = std::move(grad_wrt_input)] {
      t->grad(ii).data += t->node(oi).grad.data[0] * gg.data;
    });
  }
  return o;
}

template <typename T>
Var<T> operator+(Var<T> a, Var<T> b) {
  return add(a, b);
}
template <typename T>
Var<T> operator-(Var<T> a, Var<T> b) {
  return sub(a, b);
}
template <typename T>
Var<T> operator*(Var<T> a, Var<T> b) {
  return mul(a, b);
}

}  // namespace ops
}  // namespace glyphforge
