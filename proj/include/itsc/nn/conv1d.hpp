#pragma once

// Dilated 1d convolution with "same" zero padding: output time length always
// equals input time length. Weights are packed [out][in][k]; feature maps are
// [channel][t] row-major.

#include "../core.hpp"

namespace itsc::nn {

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 1;  // odd
  int dilation = 1;

  int padding() const { return dilation * (kernel_size - 1) / 2; }
  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_size;
  }

  void validate() const {
    require(in_channels > 0 && out_channels > 0,
            "conv1d: channel counts must be positive, got in=" + std::to_string(in_channels) +
                " out=" + std::to_string(out_channels));
    require(kernel_size >= 1 && kernel_size % 2 == 1,
            "conv1d: kernel_size must be odd and positive, got " + std::to_string(kernel_size));
    require(dilation >= 1, "conv1d: dilation must be >= 1, got " + std::to_string(dilation));
  }
};

// x: [in][T], w: [out][in][f], bias: [out] (may be null), y: [out][T] (overwritten).
template <class Real>
void conv1d_forward(const Real* x, int T, const ConvSpec& s, const Real* w, const Real* bias,
                    Real* y) {
  const int f = s.kernel_size, pad = s.padding();
  for (int o = 0; o < s.out_channels; ++o) {
    Real* yo = y + static_cast<std::size_t>(o) * T;
    const Real b = bias ? bias[o] : Real(0);
    for (int t = 0; t < T; ++t) yo[t] = b;
    for (int ci = 0; ci < s.in_channels; ++ci) {
      const Real* xc = x + static_cast<std::size_t>(ci) * T;
      const Real* wr = w + (static_cast<std::size_t>(o) * s.in_channels + ci) * f;
      for (int k = 0; k < f; ++k) {
        const int off = s.dilation * k - pad;  // taps outside [0,T) read as zero
        const Real wk = wr[k];
        const int t0 = std::max(0, -off), t1 = std::min(T, T - off);
#pragma omp simd
        for (int t = t0; t < t1; ++t) yo[t] += wk * xc[t + off];
      }
    }
  }
}

// Accumulates into gx/gw/gb (callers zero them once per batch). gx may be null.
template <class Real>
void conv1d_backward(const Real* gy, const Real* x, int T, const ConvSpec& s, const Real* w,
                     Real* gx, Real* gw, Real* gb) {
  const int f = s.kernel_size, pad = s.padding();
  for (int o = 0; o < s.out_channels; ++o) {
    const Real* go = gy + static_cast<std::size_t>(o) * T;
    if (gb) {
      double acc = 0;
#pragma omp simd reduction(+ : acc)
      for (int t = 0; t < T; ++t) acc += static_cast<double>(go[t]);
      gb[o] += static_cast<Real>(acc);
    }
    for (int ci = 0; ci < s.in_channels; ++ci) {
      const Real* xc = x + static_cast<std::size_t>(ci) * T;
      Real* gwr = gw ? gw + (static_cast<std::size_t>(o) * s.in_channels + ci) * f : nullptr;
      const Real* wr = w + (static_cast<std::size_t>(o) * s.in_channels + ci) * f;
      Real* gxc = gx ? gx + static_cast<std::size_t>(ci) * T : nullptr;
      for (int k = 0; k < f; ++k) {
        const int off = s.dilation * k - pad;
        const int t0 = std::max(0, -off), t1 = std::min(T, T - off);
        if (gwr) {
          Real acc = 0;
#pragma omp simd reduction(+ : acc)
          for (int t = t0; t < t1; ++t) acc += go[t] * xc[t + off];
          gwr[k] += acc;
        }
        if (gxc) {
          const Real wk = wr[k];
#pragma omp simd
          for (int t = t0; t < t1; ++t) gxc[t + off] += wk * go[t];
        }
      }
    }
  }
}

// Shape-checked wrappers over Matrix. Weight matrix is out_channels x (in_channels*f).
template <class Real>
Matrix<Real> conv1d_forward(const Matrix<Real>& x, const ConvSpec& s, const Matrix<Real>& w,
                            const Matrix<Real>& bias) {
  s.validate();
  require(x.rows == s.in_channels, "conv1d: input has " + std::to_string(x.rows) +
                                       " channels, spec expects " + std::to_string(s.in_channels));
  require(x.cols >= 1, "conv1d: empty input");
  require(w.rows == s.out_channels && w.cols == s.in_channels * s.kernel_size,
          "conv1d: weight shape " + shape_str(w.rows, w.cols) + " does not match spec");
  require(bias.empty() || static_cast<int>(bias.size()) == s.out_channels,
          "conv1d: bias size mismatch");
  Matrix<Real> y(s.out_channels, x.cols);
  conv1d_forward(x.data.data(), x.cols, s, w.data.data(),
                 bias.empty() ? nullptr : bias.data.data(), y.data.data());
  return y;
}

template <class Real>
void conv1d_backward(const Matrix<Real>& grad_out, const Matrix<Real>& cached_input,
                     const ConvSpec& s, const Matrix<Real>& w, Matrix<Real>& grad_input,
                     Matrix<Real>& grad_w, Matrix<Real>& grad_bias) {
  s.validate();
  require(!cached_input.empty(), "conv1d backward: missing forward input cache");
  require(grad_out.rows == s.out_channels && grad_out.cols == cached_input.cols,
          "conv1d backward: grad_output shape mismatch");
  require(cached_input.rows == s.in_channels, "conv1d backward: cached input channel mismatch");
  grad_input = Matrix<Real>(cached_input.rows, cached_input.cols);
  grad_w = Matrix<Real>(w.rows, w.cols);
  grad_bias = Matrix<Real>(1, s.out_channels);
  conv1d_backward(grad_out.data.data(), cached_input.data.data(), cached_input.cols, s,
                  w.data.data(), grad_input.data.data(), grad_w.data.data(),
                  grad_bias.data.data());
}

}  // namespace itsc::nn
