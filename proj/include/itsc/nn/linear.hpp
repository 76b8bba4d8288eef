#pragma once

// Affine map y = W x + b, batched over rows: x is [B][in], y is [B][out],
// W is [out][in].

#include "../core.hpp"

namespace itsc::nn {

template <class Real>
void linear_forward(const Real* x, int B, int in, int out, const Real* W, const Real* bias,
                    Real* y) {
  for (int b = 0; b < B; ++b) {
    const Real* xb = x + static_cast<std::size_t>(b) * in;
    Real* yb = y + static_cast<std::size_t>(b) * out;
    for (int o = 0; o < out; ++o) {
      const Real* wr = W + static_cast<std::size_t>(o) * in;
      Real acc = 0;
#pragma omp simd reduction(+ : acc)
      for (int i = 0; i < in; ++i) acc += wr[i] * xb[i];
      yb[o] = acc + (bias ? bias[o] : Real(0));
    }
  }
}

// Accumulates into gx/gW/gb; gx may be null.
template <class Real>
void linear_backward(const Real* gy, const Real* x, int B, int in, int out, const Real* W,
                     Real* gx, Real* gW, Real* gb) {
  for (int b = 0; b < B; ++b) {
    const Real* gyb = gy + static_cast<std::size_t>(b) * out;
    const Real* xb = x + static_cast<std::size_t>(b) * in;
    for (int o = 0; o < out; ++o) {
      const Real g = gyb[o];
      if (gb) gb[o] += g;
      if (gW) {
        Real* gwr = gW + static_cast<std::size_t>(o) * in;
#pragma omp simd
        for (int i = 0; i < in; ++i) gwr[i] += g * xb[i];
      }
      if (gx) {
        const Real* wr = W + static_cast<std::size_t>(o) * in;
        Real* gxb = gx + static_cast<std::size_t>(b) * in;
#pragma omp simd
        for (int i = 0; i < in; ++i) gxb[i] += g * wr[i];
      }
    }
  }
}

// Shape-checked single-vector wrappers (x as 1 x in row).
template <class Real>
Matrix<Real> linear_forward(const Matrix<Real>& x, const Matrix<Real>& W,
                            const Matrix<Real>& bias) {
  require(W.cols == x.cols, "linear: W is " + shape_str(W.rows, W.cols) + ", input has " +
                                std::to_string(x.cols) + " features");
  require(bias.empty() || static_cast<int>(bias.size()) == W.rows, "linear: bias size mismatch");
  Matrix<Real> y(x.rows, W.rows);
  linear_forward(x.data.data(), x.rows, x.cols, W.rows, W.data.data(),
                 bias.empty() ? nullptr : bias.data.data(), y.data.data());
  return y;
}

template <class Real>
void linear_backward(const Matrix<Real>& grad_out, const Matrix<Real>& cached_input,
                     const Matrix<Real>& W, Matrix<Real>& grad_input, Matrix<Real>& grad_w,
                     Matrix<Real>& grad_bias) {
  require(!cached_input.empty(), "linear backward: missing forward input cache");
  require(grad_out.rows == cached_input.rows && grad_out.cols == W.rows,
          "linear backward: grad_output shape mismatch");
  grad_input = Matrix<Real>(cached_input.rows, cached_input.cols);
  grad_w = Matrix<Real>(W.rows, W.cols);
  grad_bias = Matrix<Real>(1, W.rows);
  linear_backward(grad_out.data.data(), cached_input.data.data(), cached_input.rows,
                  cached_input.cols, W.rows, W.data.data(), grad_input.data.data(),
                  grad_w.data.data(), grad_bias.data.data());
}

}  // namespace itsc::nn
