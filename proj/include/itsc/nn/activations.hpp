#pragma once

#include "../core.hpp"

namespace itsc::nn {

template <class Real>
void relu_forward(const Real* x, std::size_t n, Real* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > Real(0) ? x[i] : Real(0);
}

// Subgradient at exactly 0 is 0. Accumulates into gx.
template <class Real>
void relu_backward(const Real* gy, const Real* x, std::size_t n, Real* gx) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > Real(0)) gx[i] += gy[i];
}

template <class Real>
Matrix<Real> relu_forward(const Matrix<Real>& x) {
  Matrix<Real> y(x.rows, x.cols);
  relu_forward(x.data.data(), x.size(), y.data.data());
  return y;
}

template <class Real>
Matrix<Real> relu_backward(const Matrix<Real>& gy, const Matrix<Real>& x) {
  require(gy.same_shape(x), "relu backward: shape mismatch");
  Matrix<Real> gx(x.rows, x.cols);
  relu_backward(gy.data.data(), x.data.data(), x.size(), gx.data.data());
  return gx;
}

}  // namespace itsc::nn
