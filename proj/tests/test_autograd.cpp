#include <doctest.h>

#include "glyphforge/autograd.hpp"
#include "glyphforge/nn.hpp"
#include "gradcheck.hpp"

using namespace glyphforge;
using glyphforge::testing::GradCheck;
using glyphforge::testing::random_tensor;

namespace {

// Reduce any output to a scalar through a fixed random weighting so every
// element influences the loss.
Var<double> weighted_sum(Tape<double>& t, Var<double> x, std::uint64_t seed) {
  TensorD w = random_tensor(x.val().shape, seed);
  return ops::sum_all(ops::mul(x, t.constant(std::move(w))));
}

}  // namespace

TEST_SUITE("autograd") {

TEST_CASE("elementwise ops match finite differences") {
  auto a = random_tensor({2, 3}, 1);
  auto b = random_tensor({2, 3}, 2);
  GradCheck::run(
      [](Tape<double>& t, const std::vector<Var<double>>& v) {
        auto y = ops::mul(ops::add(v[0], v[1]), ops::sub(v[0], v[1]));
        y = ops::add_scalar(ops::scale(y, 0.7), 0.3);
        return weighted_sum(t, y, 11);
      },
      {a, b});
}

TEST_CASE("gelu and silu match finite differences") {
  auto x = random_tensor({3, 4}, 3);
  GradCheck::run(
      [](Tape<double>& t, const std::vector<Var<double>>& v) {
        return weighted_sum(t, ops::gelu(v[0]), 12);
      },
      {x});
  GradCheck::run(
      [](Tape<double>& t, const std::vector<Var<double>>& v) {
        return weighted_sum(t, ops::silu(v[0]), 13);
      },
      {x});
}

TEST_CASE("linear matches finite differences") {
  auto x = random_tensor({2, 3, 4}, 4);
  auto w = random_tensor({4, 5}, 5);
  auto b = random_tensor({5}, 6);
  GradCheck::run(
      [](Tape<double>& t, const std::vector<Var<double>>& v) {
        return weighted_sum(t, ops::linear(v[0], v[1], v[2]), 14);
      },
      {x, w, b});
}

TEST_CASE("bmm all transpose combinations") {
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      Shape sa = ta ? Shape{2, 4, 3} : Shape{2, 3, 4};
      Shape sb = tb ? Shape{2, 5, 4} : Shape{2, 4, 5};
      GradCheck::run(
          [ta, tb](Tape<double>& t, const std::vector<Var<double>>& v) {
            return weighted_sum(t, ops::bmm(v[0], v[1], ta, tb, 0.37), 15);
          },
          {random_tensor(sa, 7), random_tensor(sb, 8)});
    }
}

TEST_CASE("softmax with key mask") {
  auto x = random_tensor({2, 2, 3, 4}, 9);
  TensorD mask({2, 4});
  mask.data.setZero();
  mask.data[3] = -1e30;  // pad the last key of sample 0
  GradCheck::run(
      [mask](Tape<double>& t, const std::vector<Var<double>>& v) {
        return weighted_sum(t, ops::softmax_lastdim(v[0], &mask), 16);
      },
      {x});
}

TEST_CASE("masked softmax zeroes padded keys exactly") {
  TensorF x({1, 1, 2, 3});
  x.data << 0.5f, 1.0f, 9.0f, 0.1f, 0.2f, 5.0f;
  TensorF mask({1, 3});
  mask.data << 0.f, 0.f, -1e30f;
  Tape<float> t;
  auto y = ops::softmax_lastdim(t.constant(x), &mask);
  CHECK(y.val().at4(0, 0, 0, 2) == 0.0f);
  CHECK(y.val().at4(0, 0, 1, 2) == 0.0f);
  CHECK(y.val().at4(0, 0, 0, 0) + y.val().at4(0, 0, 0, 1) == doctest::Approx(1.f));
}

TEST_CASE("layernorm matches finite differences") {
  auto x = random_tensor({2, 3, 6}, 10);
  auto g = random_tensor({6}, 11, 0.3);
  auto b = random_tensor({6}, 12, 0.3);
  GradCheck::run(
      [](Tape<double>& t, const std::vector<Var<double>>& v) {
        return weighted_sum(t, ops::layernorm(v[0], v[1], v[2]), 17);
      },
      {x, g, b});
}

TEST_CASE("conv2d stride and padding match finite differences") {
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}}) {
    GradCheck::run(
        [stride = stride, pad = pad](Tape<double>& t, const std::vector<Var<double>>& v) {
          auto y = ops::conv2d(v[0], v[1], v[2], ops::ConvSpec{stride, pad});
          return weighted_sum(t, y, 18);
        },
        {random_tensor({2, 5, 6, 3}, 13), random_tensor({3, 3, 3, 4}, 14),
         random_tensor({4}, 15)});
  }
}

TEST_CASE("upsample2x, permute, concat, slice, reshape") {
  GradCheck::run(
      [](Tape<double>& t, const std::vector<Var<double>>& v) {
        auto up = ops::upsample2x(v[0]);
        auto p = ops::permute_0213(up);
        auto c = ops::concat_lastdim<double>({p, p});
        auto s = ops::slice_lastdim(c, 1, 3);
        auto r = ops::reshape(s, {2, 4 * 4 * 3});
        return weighted_sum(t, r, 19);
      },
      {random_tensor({2, 2, 2, 4}, 16)});
}

TEST_CASE("token modulation ops") {
  GradCheck::run(
      [](Tape<double>& t, const std::vector<Var<double>>& v) {
        auto y = ops::affine_tokens(v[0], v[1], v[2]);
        y = ops::mul_tokens(y, v[3]);
        return weighted_sum(t, y, 20);
      },
      {random_tensor({2, 3, 4}, 17), random_tensor({2, 4}, 18),
       random_tensor({2, 4}, 19), random_tensor({2, 4}, 21)});
}

TEST_CASE("mul_per_sample, posemb, seq concat, embeddings, replace_rows") {
  std::vector<int> ids{1, 0, 2, 2, 1, 0};
  std::vector<std::pair<int, int>> slots{{0, 1}, {1, 2}};
  GradCheck::run(
      [ids, slots](Tape<double>& t, const std::vector<Var<double>>& v) {
        auto emb = ops::embedding(v[0], ids, {2, 3});       // (2,3,D)
        auto pos = ops::add_posemb(emb, v[1]);              // + (3,D)
        auto rep = ops::replace_rows(pos, v[2], slots);     // swap two rows
        auto cat = ops::concat_seq(rep, rep);               // (2,6,D)
        auto sc = ops::mul_per_sample(cat, v[3]);           // per-sample scale
        return weighted_sum(t, sc, 22);
      },
      {random_tensor({4, 5}, 23), random_tensor({3, 5}, 24),
       random_tensor({2, 5}, 25), random_tensor({2}, 26)});
}

TEST_CASE("reductions and losses") {
  auto a = random_tensor({2, 3, 2, 4}, 27);
  auto b = random_tensor({2, 3, 2, 4}, 28);
  GradCheck::run(
      [](Tape<double>& t, const std::vector<Var<double>>& v) {
        auto m = ops::mse(v[0], v[1]);
        auto h = weighted_sum(t, ops::mean_over_height(v[0]), 29);
        auto c = weighted_sum(t, ops::mean_channels(v[1]), 30);
        return ops::add(ops::add(m, ops::scale(h, 0.1)), ops::scale(c, 0.1));
      },
      {a, b});
}

TEST_CASE("masked per-sample squared error") {
  auto f = random_tensor({2, 3, 4, 2}, 31);
  TensorD ref = random_tensor({2, 3, 4, 2}, 32);
  TensorD mask({2, 3, 4, 1});
  rng::Stream st(33, "mask");
  for (std::int64_t i = 0; i < mask.numel(); ++i) mask.data[i] = st.chance(0.5) ? 1.0 : 0.0;
  GradCheck::run(
      [ref, mask](Tape<double>& t, const std::vector<Var<double>>& v) {
        return ops::masked_sq_err_per_sample(v[0], ref, mask);
      },
      {f});
}

TEST_CASE("multihead attention block end to end") {
  ParamStore<double> ps(42);
  auto attn = MultiheadAttention<double>::create(ps, "attn", 8, 6, 2);
  auto x = random_tensor({2, 3, 8}, 34, 0.5);
  auto ctx = random_tensor({2, 4, 6}, 35, 0.5);
  TensorD mask({2, 4});
  mask.data.setZero();
  mask.data[2 * 4 - 1] = -1e30;
  GradCheck::run(
      [&](Tape<double>& t, const std::vector<Var<double>>& v) {
        Frame<double> f(t);
        // leaves v[0], v[1] are the data; params enter as leaves internally
        return weighted_sum(t, attn(f, ps, v[0], v[1], &mask, true), 36);
      },
      {x, ctx}, 1e-5, 1e-5);
}

TEST_CASE("param store collects gradients and steps") {
  ParamStore<float> ps(7);
  auto lin = Linear<float>::create(ps, "l", 3, 2);
  TensorF x({4, 3}, 1.f);
  Tape<float> tape;
  Frame<float> f(tape);
  auto y = lin(f, ps, tape.constant(x), true);
  auto loss = ops::mse_vs_const(y, TensorF({4, 2}, 0.f));
  tape.backward(loss);
  ps.zero_grads();
  f.collect_grads();
  CHECK(ps.grads().abs().sum() > 0.f);
  auto before = ps.raw();
  ps.adamw(1, 1e-2f, 0.9f, 0.999f, 1e-8f, 0.01f);
  CHECK((ps.raw() - before).abs().sum() > 0.f);
}

}  // TEST_SUITE
