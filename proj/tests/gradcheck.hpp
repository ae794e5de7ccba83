#pragma once

#include <doctest.h>

#include <functional>
#include <vector>

#include "glyphforge/autograd.hpp"
#include "glyphforge/rng.hpp"

namespace glyphforge::testing {

// Central-difference gradient check in double precision. `forward` builds the
// graph from leaf vars (one per input, same order) and returns a scalar loss.
struct GradCheck {
  using Forward =
      std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

  static double eval(const Forward& forward, const std::vector<TensorD>& inputs,
                     std::vector<Var<double>>* leaves_out = nullptr,
                     Tape<double>* tape = nullptr) {
    Tape<double> local;
    Tape<double>& tp = tape ? *tape : local;
    std::vector<Var<double>> leaves;
    for (const auto& t : inputs) leaves.push_back(tp.leaf(t, true));
    Var<double> loss = forward(tp, leaves);
    REQUIRE(loss.val().numel() == 1);
    if (leaves_out) *leaves_out = leaves;
    if (tape) tp.backward(loss);
    return loss.val()[0];
  }

  static void run(const Forward& forward, std::vector<TensorD> inputs,
                  double eps = 1e-5, double tol = 1e-6) {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    eval(forward, inputs, &leaves, &tape);

    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const auto& node = tape.node(leaves[k].id);
      TensorD analytic = node.grad.numel() > 0 ? node.grad : TensorD(inputs[k].shape);
      for (std::int64_t i = 0; i < inputs[k].numel(); ++i) {
        std::vector<TensorD> plus = inputs, minus = inputs;
        plus[k].data[i] += eps;
        minus[k].data[i] -= eps;
        double fd = (eval(forward, plus) - eval(forward, minus)) / (2 * eps);
        double got = analytic[i];
        double scale = std::max({1.0, std::abs(fd), std::abs(got)});
        INFO("input ", k, " element ", i, " analytic=", got, " fd=", fd);
        CHECK(std::abs(got - fd) / scale < tol);
      }
    }
  }
};

inline TensorD random_tensor(Shape s, std::uint64_t seed, double scale = 1.0) {
  TensorD t(std::move(s));
  rng::Stream st(seed, "gradcheck");
  for (std::int64_t i = 0; i < t.numel(); ++i) t.data[i] = st.normal(0.0, scale);
  return t;
}

}  // namespace glyphforge::testing
