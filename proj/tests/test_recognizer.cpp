#include <doctest.h>

#include "glyphforge/recognizer.hpp"
#include "gradcheck.hpp"

using namespace glyphforge;
using glyphforge::testing::random_tensor;

TEST_SUITE("recognizer") {

TEST_CASE("ctc gradient matches finite differences") {
  const int N = 2, L = 6, V = 4;  // blank = 3
  TensorD logits = random_tensor({N, L, V}, 60);
  std::vector<std::vector<int>> targets{{0, 1}, {2, 2}};  // includes a repeat
  auto res = ctc_loss(logits, targets, 3);
  REQUIRE(std::isfinite(res.loss));
  const double eps = 1e-6;
  for (std::int64_t i = 0; i < logits.numel(); ++i) {
    TensorD p = logits, m = logits;
    p.data[i] += eps;
    m.data[i] -= eps;
    double fd =
        (ctc_loss(p, targets, 3).loss - ctc_loss(m, targets, 3).loss) / (2 * eps);
    CHECK(std::abs(res.grad[i] - fd) < 1e-5);
  }
}

TEST_CASE("ctc loss is small when logits spell the target") {
  const int L = 6, V = 3;  // blank = 2
  TensorD logits({1, L, V}, -10.0);
  // columns: A _ B B _ _  ->  "AB"
  int cols[L] = {0, 2, 1, 1, 2, 2};
  for (int t = 0; t < L; ++t) logits.data[t * V + cols[t]] = 10.0;
  auto res = ctc_loss(logits, {{0, 1}}, 2);
  CHECK(res.loss < 1e-3);
  auto bad = ctc_loss(logits, {{1, 0}}, 2);
  CHECK(bad.loss > 5.0);
}

TEST_CASE("ctc flags infeasible targets instead of NaN") {
  TensorD logits({1, 3, 3});
  auto res = ctc_loss(logits, {{0, 0, 0}}, 2);  // needs >= 5 columns
  CHECK(std::isfinite(res.loss));
  CHECK((res.grad.data == 0.0).all());
}

TEST_CASE("best-path decode collapses repeats and drops blanks") {
  auto model = RecognizerModel<float>::create("AB", 1);
  TensorF cols({7, 3}, -1.f);
  // A A _ B B _ A -> "ABA"
  int ids[7] = {0, 0, 2, 1, 1, 2, 0};
  for (int t = 0; t < 7; ++t) cols.data[t * 3 + ids[t]] = 1.f;
  CHECK(model.decode_best_path(cols) == "ABA");
  TensorF blanks({5, 3}, 0.f);
  for (int t = 0; t < 5; ++t) blanks.data[t * 3 + 2] = 1.f;
  CHECK(model.decode_best_path(blanks) == "");
}

TEST_CASE("feature pyramid shapes follow stage strides 1,2,4") {
  auto model = RecognizerModel<float>::create(GlyphFont::default_charset(), 2);
  TensorF canvas({1, 64, 64, 1}, 0.25f);
  auto pyr = model.features(canvas);
  REQUIRE(pyr.levels.size() == 3);
  CHECK(pyr.levels[0].shape == Shape{1, 64, 64, 16});
  CHECK(pyr.levels[1].shape == Shape{1, 32, 32, 32});
  CHECK(pyr.levels[2].shape == Shape{1, 16, 16, 64});
  auto pooled = model.pooled_features(canvas);
  CHECK(pooled.shape == Shape{1, 64});
}

TEST_CASE("recognition is deterministic") {
  auto model = RecognizerModel<float>::create(GlyphFont::default_charset(), 3);
  TensorF crop = random_tensor({16, 64, 1}, 61, 0.2).cast<float>();
  crop.data = crop.data.abs().min(1.f);
  CHECK(model.recognize(crop) == model.recognize(crop));
}

TEST_CASE("receptive radii are exported analytically") {
  auto r = RecognizerModel<float>::receptive_radii();
  auto j = RecognizerModel<float>::jumps();
  CHECK(r == std::array<int, 3>{1, 2, 4});
  CHECK(j == std::array<int, 3>{1, 2, 4});
  auto lr = RecognizerModel<float>::locality_radii();
  for (int k = 0; k < 3; ++k) CHECK(lr[k] == r[k] + j[k] - 1);
}

TEST_CASE("feature perturbation smoke: far pixels leave features unchanged") {
  auto model = RecognizerModel<float>::create(GlyphFont::default_charset(), 4);
  TensorF a = random_tensor({1, 32, 32, 1}, 62, 0.2).cast<float>();
  a.data = a.data.abs().min(1.f);
  TensorF b = a;
  b.at4(0, 2, 2, 0) = 1.f - b.at4(0, 2, 2, 0);  // flip one far corner pixel
  auto fa = model.features(a), fb = model.features(b);
  bool any_diff = false;
  for (int k = 0; k < 3; ++k) {
    const auto& la = fa.levels[k];
    const auto& lb = fb.levels[k];
    int jump = RecognizerModel<float>::jumps()[k];
    int rad = RecognizerModel<float>::receptive_radii()[k];
    for (int y = 0; y < la.shape[1]; ++y)
      for (int x = 0; x < la.shape[2]; ++x)
        for (int c = 0; c < la.shape[3]; ++c) {
          bool same = la.at4(0, y, x, c) == lb.at4(0, y, x, c);
          // cells whose footprint cannot reach (2,2) must be identical
          if (std::abs(y * jump - 2) > rad + jump || std::abs(x * jump - 2) > rad + jump)
            CHECK(same);
          else if (!same)
            any_diff = true;
        }
  }
  CHECK(any_diff);
}

}  // TEST_SUITE
