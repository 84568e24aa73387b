#pragma once

#include <cstddef>
#include <vector>

#include "sigcl/tensor.hpp"

namespace sigcl {

// Small row-major double matrix for loss and clustering arithmetic.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }
  double* row(std::size_t r) { return v.data() + r * cols; }

  static Mat from_tensor(const Tensor& t) {
    Mat m(t.dim(0), t.size() / t.dim(0));
    for (std::size_t i = 0; i < t.size(); ++i) m.v[i] = t[i];
    return m;
  }
  Tensor to_tensor() const {
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
    return t;
  }
};

}  // namespace sigcl
