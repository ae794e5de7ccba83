#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "glyphforge/errors.hpp"

namespace glyphforge {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

inline void require_shape(bool cond, const std::string& what) {
  if (!cond) throw ShapeMismatch(what);
}

// Dense row-major tensor over a contiguous Eigen array. Rank is dynamic
// (0..4 in practice); the last dimension is the fastest-varying one.
template <typename T>
struct Tensor {
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  using MatMap =
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatMap = Eigen::Map<
      const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Shape shape;
  Array data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)) {
    data = Array::Zero(shape_numel(shape));
  }
  Tensor(Shape s, T fill) : shape(std::move(s)) {
    data = Array::Constant(shape_numel(shape), fill);
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, T v) { return Tensor(std::move(s), v); }
  static Tensor scalar(T v) { return Tensor({1}, v); }
  static Tensor from(Shape s, std::initializer_list<T> vals) {
    Tensor t(std::move(s));
    require_shape(static_cast<std::int64_t>(vals.size()) == t.numel(),
                  "initializer size mismatch");
    std::int64_t i = 0;
    for (T v : vals) t.data[i++] = v;
    return t;
  }

  std::int64_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[i < 0 ? shape.size() + i : i]; }

  T& operator[](std::int64_t i) { return data[i]; }
  T operator[](std::int64_t i) const { return data[i]; }

  // (y, x, c) accessor for rank-3 image tensors.
  T& at3(int a, int b, int c) {
    return data[(static_cast<std::int64_t>(a) * shape[1] + b) * shape[2] + c];
  }
  T at3(int a, int b, int c) const {
    return data[(static_cast<std::int64_t>(a) * shape[1] + b) * shape[2] + c];
  }
  T& at4(int a, int b, int c, int d) {
    return data[((static_cast<std::int64_t>(a) * shape[1] + b) * shape[2] + c) *
                    shape[3] +
                d];
  }
  T at4(int a, int b, int c, int d) const {
    return data[((static_cast<std::int64_t>(a) * shape[1] + b) * shape[2] + c) *
                    shape[3] +
                d];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // View as a (rows x cols) row-major matrix; rows*cols must equal numel().
  MatMap mat(std::int64_t rows, std::int64_t cols) {
    require_shape(rows * cols == numel(), "mat view size mismatch");
    return MatMap(data.data(), rows, cols);
  }
  ConstMatMap mat(std::int64_t rows, std::int64_t cols) const {
    require_shape(rows * cols == numel(), "mat view size mismatch");
    return ConstMatMap(data.data(), rows, cols);
  }
  // Fold all leading dims: (numel/lastdim, lastdim).
  MatMap mat() { return mat(numel() / dim(-1), dim(-1)); }
  ConstMatMap mat() const { return mat(numel() / dim(-1), dim(-1)); }

  Tensor reshaped(Shape s) const {
    require_shape(shape_numel(s) == numel(), "reshape numel mismatch");
    Tensor t;
    t.shape = std::move(s);
    t.data = data;
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t;
    t.shape = shape;
    t.data = data.template cast<U>();
    return t;
  }

  bool all_finite() const { return data.isFinite().all(); }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace glyphforge
