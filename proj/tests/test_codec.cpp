#include <doctest.h>

#include "glyphforge/codec.hpp"
#include "gradcheck.hpp"

using namespace glyphforge;
using glyphforge::testing::random_tensor;

TEST_SUITE("latent-codec") {

TEST_CASE("rearrange: constant map") {
  TensorF map({64, 64, 1}, 1.f);
  auto z = ops::rearrange_s2d_tensor(map, 4);
  CHECK(z.shape == Shape{16, 16, 16});
  CHECK((z.data == 1.f).all());
}

TEST_CASE("rearrange: single-pixel index arithmetic") {
  TensorF map({64, 64, 1});
  map.at3(5, 7, 0) = 1.f;
  auto z = ops::rearrange_s2d_tensor(map, 4);
  // nonzero at spatial (1,1), channel (5 mod 4)*4 + (7 mod 4) = 7
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      for (int c = 0; c < 16; ++c) {
        float expect = (i == 1 && j == 1 && c == 7) ? 1.f : 0.f;
        CHECK(z.at3(i, j, c) == expect);
      }
}

TEST_CASE("rearrange: bijection and mass preservation on random maps") {
  for (int iter = 0; iter < 100; ++iter) {
    rng::Stream st(iter, "rearr");
    TensorF map({32, 32, 1});
    for (auto& v : map.data) v = st.chance(0.5) ? 1.f : 0.f;
    auto z = ops::rearrange_s2d_tensor(map, 4);
    CHECK(z.data.sum() == map.data.sum());
    auto back = ops::rearrange_inverse_tensor(z, 4);
    CHECK((back.data == map.data).all());
  }
}

TEST_CASE("rearrange rejects non-divisible sizes") {
  TensorF map({30, 30, 1});
  CHECK_THROWS_AS(ops::rearrange_s2d_tensor(map, 4), ShapeMismatch);
}

TEST_CASE("rearrange tape op matches finite differences") {
  testing::GradCheck::run(
      [](Tape<double>& t, const std::vector<Var<double>>& v) {
        auto z = ops::rearrange_s2d(v[0], 2);
        auto back = ops::rearrange_inverse(z, 2);
        TensorD w = random_tensor({1, 4, 4, 2}, 50);
        return ops::sum_all(ops::mul(back, t.constant(std::move(w))));
      },
      {random_tensor({1, 4, 4, 2}, 51)});
}

TEST_CASE("conv codec shapes and determinism") {
  auto codec = CodecModel<float>::create(CodecModel<float>::Kind::conv, 4, 4, 3);
  TensorF x = random_tensor({2, 64, 64, 3}, 52, 0.3).cast<float>();
  x.data = x.data.abs().min(1.f);
  auto z1 = codec.encode_tensor(x);
  auto z2 = codec.encode_tensor(x);
  CHECK(z1.shape == Shape{2, 16, 16, 4});
  CHECK((z1.data == z2.data).all());
  auto rec = codec.decode_image(z1);
  CHECK(rec.shape == x.shape);
  CHECK(rec.data.maxCoeff() <= 1.f);
  CHECK(rec.data.minCoeff() >= 0.f);
}

TEST_CASE("identity-s2d codec is lossless") {
  auto codec = CodecModel<float>::create(CodecModel<float>::Kind::identity_s2d, 4, 0, 0);
  CHECK(codec.c == 48);
  TensorF x = random_tensor({2, 32, 32, 3}, 53, 0.2).cast<float>();
  x.data = x.data.abs().min(1.f);
  auto z = codec.encode_tensor(x);
  CHECK(z.shape == Shape{2, 8, 8, 48});
  auto back = codec.decode_tensor(z);
  CHECK((back.data == x.data).all());
}

TEST_CASE("codec reconstruction MSE responds continuously to perturbations") {
  auto codec = CodecModel<float>::create(CodecModel<float>::Kind::conv, 4, 4, 5);
  TensorF x({1, 64, 64, 3}, 0.5f);
  auto recon_mse = [&](const TensorF& in) {
    auto rec = codec.decode_tensor(codec.encode_tensor(in));
    return (rec.data - in.data).square().mean();
  };
  float base = recon_mse(x);
  float prev_delta = 0.f;
  for (float eps : {1e-3f, 1e-2f, 1e-1f}) {
    TensorF y = x;
    rng::Stream st(54, "lip");
    for (auto& v : y.data)
      v = std::min(1.f, std::max(0.f, v + eps * (st.chance(0.5) ? 1.f : -1.f)));
    float delta = std::abs(recon_mse(y) - base);
    CHECK(delta < 10.f * eps + 1e-5f);
    CHECK(delta >= prev_delta * 0.01f);  // grows with eps, loosely
    prev_delta = delta;
  }
}

}  // TEST_SUITE
