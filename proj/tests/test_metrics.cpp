#include <doctest.h>

#include <functional>

#include "glyphforge/errors.hpp"
#include "glyphforge/metrics.hpp"

using namespace glyphforge;

namespace {

// Independent full-matrix DP oracle (recursive with memo), kept deliberately
// separate from the production two-row implementation.
int lev_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<int>> memo(a.size() + 1,
                                     std::vector<int>(b.size() + 1, -1));
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i,
                                                        std::size_t j) -> int {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    int& m = memo[i][j];
    if (m >= 0) return m;
    int best = go(i + 1, j + 1) + (a[i] != b[j]);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    return m = best;
  };
  return go(0, 0);
}

std::string rand_string(rng::Stream& st, int max_len) {
  int len = static_cast<int>(st.below(max_len + 1));
  std::string s;
  for (int i = 0; i < len; ++i) s += static_cast<char>('A' + st.below(6));
  return s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("ned: fixed examples") {
  CHECK(ned("HELLO", "HELLO") == 1.0);
  CHECK(ned("", "") == 1.0);
  CHECK(ned("KITTEN", "SITTING") == doctest::Approx(1.0 - 3.0 / 7.0));
  CHECK(ned("AB", "") == 0.0);
}

TEST_CASE("ned matches the DP oracle and is symmetric") {
  for (int i = 0; i < 1000; ++i) {
    rng::Stream st(i, "ned");
    std::string a = rand_string(st, 12), b = rand_string(st, 12);
    int lv = levenshtein(a, b);
    CHECK(lv == lev_oracle(a, b));
    CHECK(ned(a, b) == ned(b, a));
    if (!(a.empty() && b.empty()))
      CHECK(ned(a, b) ==
            doctest::Approx(1.0 - double(lv) / std::max(a.size(), b.size())));
  }
}

TEST_CASE("fid: identical feature sets give zero") {
  std::vector<Eigen::VectorXd> feats;
  rng::Stream st(9, "fid");
  for (int i = 0; i < 8; ++i) {
    Eigen::VectorXd v(3);
    for (int j = 0; j < 3; ++j) v[j] = st.normal();
    feats.push_back(v);
  }
  CHECK(std::abs(fid(feats, feats)) < 1e-6);
}

TEST_CASE("fid: gaussian fixtures via statistics injection") {
  // mean-shift term only: mu1=0, mu2=e1, sigmas identity
  Eigen::VectorXd mu1 = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd mu2 = Eigen::VectorXd::Zero(4);
  mu2[0] = 1.0;
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  CHECK(fid_from_stats(mu1, I, mu2, I) == doctest::Approx(1.0).epsilon(1e-9));

  // closed-form univariate: sigma^2 1 vs 4 -> 1 + 4 - 2*2 = 1
  Eigen::VectorXd z1 = Eigen::VectorXd::Zero(1), z2 = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd s1(1, 1), s2(1, 1);
  s1 << 1.0;
  s2 << 4.0;
  CHECK(fid_from_stats(z1, s1, z2, s2) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fid: symmetry and non-negativity on random sets") {
  rng::Stream st(10, "fid2");
  auto sample = [&](double mu, int n) {
    std::vector<Eigen::VectorXd> f;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd v(3);
      for (int j = 0; j < 3; ++j) v[j] = st.normal(mu, 1.0);
      f.push_back(v);
    }
    return f;
  };
  auto a = sample(0.0, 12), b = sample(0.7, 15);
  double ab = fid(a, b), ba = fid(b, a);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
  CHECK(ab >= 0.0);
}

TEST_CASE("fid: rank and finiteness guards") {
  std::vector<Eigen::VectorXd> small(3, Eigen::VectorXd::Zero(4));
  CHECK_THROWS_AS(fid(small, small), CovarianceRankError);
  std::vector<Eigen::VectorXd> bad(5, Eigen::VectorXd::Zero(2));
  bad[1][0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fid(bad, bad), NonFiniteFeatures);
}

TEST_CASE("sentence accuracy with stubbed recognizer") {
  EditSample s;
  s.lines = {{"AB", Rect{0, 0, 8, 8}}, {"CD", Rect{0, 8, 8, 16}}};
  s.caption = make_caption(s.lines);
  s.split = "test";
  RasterImage img({16, 8, 3});
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) img.at3(y, x, c) = 1.f;  // top region bright

  auto stub = [](const RasterImage& crop) {
    return crop.data.mean() > 0.5f ? std::string("AB") : std::string("");
  };
  // bright region reads back correctly, dark one as blank: 1 of 2 lines
  CHECK(sentence_accuracy({&s}, {img}, stub) == doctest::Approx(0.5));
  // all-blank predictions on nonempty texts
  auto blanks = [](const RasterImage&) { return std::string(); };
  CHECK(sentence_accuracy({&s}, {img}, blanks) == doctest::Approx(0.0));
}

TEST_CASE("evaluate_images: aggregation, class split, json round trip") {
  const std::string& cs = GlyphFont::default_charset();
  EditSample a;
  a.lines = {{"AB", Rect{0, 0, 8, 8}}};
  EditSample b;
  b.lines = {{"#$", Rect{0, 0, 8, 8}}, {"CD", Rect{0, 8, 8, 16}}};
  RasterImage img({16, 8, 3}, 0.3f);

  int call = 0;
  auto stub = [&](const RasterImage&) {
    // AB right, #$ right, CD wrong
    static const char* preds[] = {"AB", "#$", "XX"};
    return std::string(preds[call++]);
  };
  EvalReport r = evaluate_images({&a, &b}, {0, 1}, {img, img}, {img, img}, stub,
                                 nullptr, cs);
  CHECK(r.sample_count == 2);
  CHECK(r.line_count == 3);
  CHECK(r.sen_acc == doctest::Approx(2.0 / 3.0));
  CHECK(r.easy.line_count == 2);
  CHECK(r.easy.sen_acc == doctest::Approx(0.5));
  CHECK(r.complex_glyphs.line_count == 1);
  CHECK(r.complex_glyphs.sen_acc == doctest::Approx(1.0));
  CHECK(!r.has_fid);

  // round trip
  auto j = report_to_json(r);
  EvalReport r2 = report_from_json(j);
  CHECK(report_to_json(r2) == j);

  // re-aggregation oracle: recompute sen_acc from per-sample records
  int hits = 0, total = 0;
  for (const auto& sr : r2.samples)
    for (const auto& lr : sr.lines) {
      hits += lr.match;
      ++total;
    }
  CHECK(static_cast<double>(hits) / total == doctest::Approx(r2.sen_acc));
}

TEST_CASE("evaluate_images: empty set reports absent metrics") {
  EvalReport r = evaluate_images({}, {}, {}, {}, nullptr, nullptr, "AB");
  CHECK(r.sample_count == 0);
  CHECK(r.line_count == 0);
  CHECK(!r.has_fid);
  auto j = report_to_json(r);
  CHECK(j.at("fid").is_null());
}

}  // TEST_SUITE
