#include "glyphforge/metrics.hpp"

#include "glyphforge/errors.hpp"

namespace glyphforge {

int levenshtein(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double ned(const std::string& a, const std::string& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t mx = std::max(a.size(), b.size());
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(mx);
}

double fid_from_stats(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& sigma1,
                      const Eigen::VectorXd& mu2, const Eigen::MatrixXd& sigma2) {
  Eigen::MatrixXd prod = sigma1 * sigma2;
  Eigen::MatrixXd sym = 0.5 * (prod + prod.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  double tr_sqrt = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()[i]));
  double mean_term = (mu1 - mu2).squaredNorm();
  return mean_term + sigma1.trace() + sigma2.trace() - 2.0 * tr_sqrt;
}

namespace {

void fit_gaussian(const std::vector<Eigen::VectorXd>& feats, Eigen::VectorXd& mu,
                  Eigen::MatrixXd& sigma) {
  const int n = static_cast<int>(feats.size());
  const int d = static_cast<int>(feats[0].size());
  mu = Eigen::VectorXd::Zero(d);
  for (const auto& f : feats) {
    if (!f.allFinite()) throw NonFiniteFeatures("non-finite feature vector");
    mu += f;
  }
  mu /= n;
  sigma = Eigen::MatrixXd::Zero(d, d);
  for (const auto& f : feats) {
    Eigen::VectorXd c = f - mu;
    sigma += c * c.transpose();
  }
  sigma /= (n - 1);
}

}  // namespace

double fid(const std::vector<Eigen::VectorXd>& real,
           const std::vector<Eigen::VectorXd>& generated) {
  if (real.empty() || generated.empty())
    throw CovarianceRankError("fid: empty feature set");
  const int d = static_cast<int>(real[0].size());
  if (static_cast<int>(real.size()) < d + 1 ||
      static_cast<int>(generated.size()) < d + 1)
    throw CovarianceRankError("fid: need at least d+1 = " + std::to_string(d + 1) +
                              " samples per set (got " + std::to_string(real.size()) +
                              " and " + std::to_string(generated.size()) + ")");
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd s1, s2;
  fit_gaussian(real, mu1, s1);
  fit_gaussian(generated, mu2, s2);
  return fid_from_stats(mu1, s1, mu2, s2);
}

nlohmann::json report_to_json(const EvalReport& r) {
  auto cls = [](const ClassAggregate& c) {
    return nlohmann::json{{"lines", c.line_count}, {"sen_acc", c.sen_acc}, {"ned", c.ned}};
  };
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.samples) {
    nlohmann::json lines = nlohmann::json::array();
    for (const auto& l : s.lines)
      lines.push_back({{"target", l.target},
                       {"predicted", l.predicted},
                       {"ned", l.ned},
                       {"match", l.match},
                       {"class", l.line_class}});
    samples.push_back({{"id", s.sample_id}, {"lines", lines}});
  }
  nlohmann::json j{{"version", r.version},
                   {"sample_count", r.sample_count},
                   {"line_count", r.line_count},
                   {"sen_acc", r.sen_acc},
                   {"ned", r.ned},
                   {"fid", r.has_fid ? nlohmann::json(r.fid) : nlohmann::json()},
                   {"by_class", {{"easy", cls(r.easy)}, {"complex", cls(r.complex_glyphs)}}},
                   {"samples", samples}};
  if (!r.fid_note.empty()) j["fid_note"] = r.fid_note;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.version = j.at("version").get<int>();
  r.sample_count = j.at("sample_count").get<int>();
  r.line_count = j.at("line_count").get<int>();
  r.sen_acc = j.at("sen_acc").get<double>();
  r.ned = j.at("ned").get<double>();
  if (!j.at("fid").is_null()) {
    r.has_fid = true;
    r.fid = j.at("fid").get<double>();
  }
  r.fid_note = j.value("fid_note", "");
  auto cls = [](const nlohmann::json& c) {
    ClassAggregate a;
    a.line_count = c.at("lines").get<int>();
    a.sen_acc = c.at("sen_acc").get<double>();
    a.ned = c.at("ned").get<double>();
    return a;
  };
  r.easy = cls(j.at("by_class").at("easy"));
  r.complex_glyphs = cls(j.at("by_class").at("complex"));
  for (const auto& sj : j.at("samples")) {
    SampleResult s;
    s.sample_id = sj.at("id").get<int>();
    for (const auto& lj : sj.at("lines")) {
      LineResult l;
      l.target = lj.at("target").get<std::string>();
      l.predicted = lj.at("predicted").get<std::string>();
      l.ned = lj.at("ned").get<double>();
      l.match = lj.at("match").get<bool>();
      l.line_class = lj.at("class").get<std::string>();
      s.lines.push_back(std::move(l));
    }
    r.samples.push_back(std::move(s));
  }
  return r;
}

double sentence_accuracy(const std::vector<const EditSample*>& samples,
                         const std::vector<RasterImage>& images,
                         const RecognizeFn& recognize) {
  if (images.size() != samples.size())
    throw MissingImage("sentence_accuracy: image count mismatch");
  int total = 0, hit = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (const TextLine& l : samples[i]->lines) {
      std::string pred = recognize(crop_image(images[i], l.region));
      hit += pred == l.text;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / total;
}

EvalReport evaluate_images(const std::vector<const EditSample*>& samples,
                           const std::vector<int>& sample_ids,
                           const std::vector<RasterImage>& edited,
                           const std::vector<RasterImage>& reference,
                           const RecognizeFn& recognize, const FeatureFn& features,
                           const std::string& charset) {
  if (edited.size() != samples.size())
    throw MissingImage("evaluate_images: edited image count mismatch");
  EvalReport r;
  r.sample_count = static_cast<int>(samples.size());
  double ned_sum = 0.0;
  int hit = 0;
  struct Acc {
    int n = 0, hit = 0;
    double ned = 0.0;
  } easy, comp;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    SampleResult sr;
    sr.sample_id = sample_ids.empty() ? static_cast<int>(i) : sample_ids[i];
    for (const TextLine& l : samples[i]->lines) {
      LineResult lr;
      lr.target = l.text;
      lr.predicted = recognize(crop_image(edited[i], l.region));
      lr.ned = ned(lr.target, lr.predicted);
      lr.match = lr.target == lr.predicted;
      bool comp_line = is_composite_line(l.text, charset);
      lr.line_class = comp_line ? "complex" : "easy";
      Acc& a = comp_line ? comp : easy;
      ++a.n;
      a.hit += lr.match;
      a.ned += lr.ned;
      ned_sum += lr.ned;
      hit += lr.match;
      ++r.line_count;
      sr.lines.push_back(std::move(lr));
    }
    r.samples.push_back(std::move(sr));
  }
  if (r.line_count > 0) {
    r.sen_acc = static_cast<double>(hit) / r.line_count;
    r.ned = ned_sum / r.line_count;
  }
  auto cls = [](const Acc& a) {
    ClassAggregate c;
    c.line_count = a.n;
    if (a.n > 0) {
      c.sen_acc = static_cast<double>(a.hit) / a.n;
      c.ned = a.ned / a.n;
    }
    return c;
  };
  r.easy = cls(easy);
  r.complex_glyphs = cls(comp);

  if (features && !edited.empty()) {
    std::vector<Eigen::VectorXd> fr = features(reference);
    std::vector<Eigen::VectorXd> fg = features(edited);
    const int d = fr.empty() ? 0 : static_cast<int>(fr[0].size());
    if (d > 0 && static_cast<int>(fr.size()) >= d + 1 &&
        static_cast<int>(fg.size()) >= d + 1) {
      r.has_fid = true;
      r.fid = fid(fr, fg);
    } else {
      r.fid_note = "fid skipped: need at least d+1 = " + std::to_string(d + 1) +
                   " images per set";
    }
  } else if (samples.empty()) {
    r.fid_note = "fid skipped: empty evaluation set";
  }
  return r;
}

}  // namespace glyphforge
