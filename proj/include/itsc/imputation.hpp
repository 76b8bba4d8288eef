#pragma once

// Temporal imputation: a GRU scans the series step by step, a regression head
// on the previous hidden state estimates the current value, and the estimate
// is substituted wherever the mask marks the value missing:
//
//   z_t = sigmoid(W_xz u_t + W_hz h_{t-1} + b_z)
//   r_t = sigmoid(W_xr u_t + W_hr h_{t-1} + b_r)
//   hc_t = tanh(W_xh u_t + W_hh (r_t . h_{t-1}) + b_h)
//   h_t = z_t . hc_t + (1 - z_t) . h_{t-1}
//   xhat_{t+1} = W_imp h_t + b_imp
//   u_t = m_t . x_t + (1 - m_t) . xhat_t
//
// with h_0 = 0 and xhat_1 = 0. The merge is implemented as a select, so the
// stored value at a masked-out position is never read and observed values
// pass through bit-exactly.

#include "core.hpp"
#include "random.hpp"

namespace itsc {

template <class Real>
struct GruParams {
  int input_size = 0;   // n
  int hidden_size = 0;  // m
  Matrix<Real> w_xz, w_hz, w_xr, w_hr, w_xh, w_hh;  // m x n / m x m
  Matrix<Real> b_z, b_r, b_h;                       // 1 x m
  Matrix<Real> w_imp;                               // n x m regression head
  Matrix<Real> b_imp;                               // 1 x n

  GruParams() = default;
  GruParams(int n, int m) : input_size(n), hidden_size(m) {
    require(n >= 1 && m >= 1, "gru: input and hidden sizes must be >= 1");
    w_xz = w_xr = w_xh = Matrix<Real>(m, n);
    w_hz = w_hr = w_hh = Matrix<Real>(m, m);
    b_z = b_r = b_h = Matrix<Real>(1, m);
    w_imp = Matrix<Real>(n, m);
    b_imp = Matrix<Real>(1, n);
  }

  void init(Rng& rng) {
    uniform_init(w_xz, input_size, rng);
    uniform_init(w_hz, hidden_size, rng);
    uniform_init(w_xr, input_size, rng);
    uniform_init(w_hr, hidden_size, rng);
    uniform_init(w_xh, input_size, rng);
    uniform_init(w_hh, hidden_size, rng);
    uniform_init(w_imp, hidden_size, rng);
    b_z.zero();
    b_r.zero();
    b_h.zero();
    b_imp.zero();
  }

  void zero_all() {
    for (Matrix<Real>* m : {&w_xz, &w_hz, &w_xr, &w_hr, &w_xh, &w_hh, &b_z, &b_r, &b_h, &w_imp,
                            &b_imp})
      m->zero();
  }

  // Fixed field order; also the checkpoint blob order for this module.
  template <class Fn>
  void for_each(Fn&& fn) {
    fn("gru.w_xz", w_xz); fn("gru.w_hz", w_hz); fn("gru.b_z", b_z);
    fn("gru.w_xr", w_xr); fn("gru.w_hr", w_hr); fn("gru.b_r", b_r);
    fn("gru.w_xh", w_xh); fn("gru.w_hh", w_hh); fn("gru.b_h", b_h);
    fn("gru.w_imp", w_imp); fn("gru.b_imp", b_imp);
  }
};

namespace detail {

template <class Real>
inline Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

// y = W a + W2 b + bias, rows of W/W2 contiguous
template <class Real>
inline void two_matvec(const Matrix<Real>& W, const Real* a, const Matrix<Real>& W2,
                       const Real* b, const Real* bias, int m, Real* y) {
  for (int o = 0; o < m; ++o) {
    const Real* w1 = W[o];
    const Real* w2 = W2[o];
    Real acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int i = 0; i < W.cols; ++i) acc += w1[i] * a[i];
    Real acc2 = 0;
#pragma omp simd reduction(+ : acc2)
    for (int i = 0; i < W2.cols; ++i) acc2 += w2[i] * b[i];
    y[o] = acc + acc2 + bias[o];
  }
}

}  // namespace detail

template <class Real>
struct GruStepCache {
  std::vector<Real> u, h_prev;  // n, m
  std::vector<Real> z, r, hc;   // m each
};

// One GRU step. h_out may alias h_prev's storage only if cache is filled first;
// callers here never alias. cache is optional (training only).
template <class Real>
void gru_cell(const Real* u, const Real* h_prev, const GruParams<Real>& p, Real* h_out,
              GruStepCache<Real>* cache = nullptr) {
  const int m = p.hidden_size, n = p.input_size;
  std::vector<Real> z(m), r(m), hc(m), rh(m);
  detail::two_matvec(p.w_xz, u, p.w_hz, h_prev, p.b_z[0], m, z.data());
  detail::two_matvec(p.w_xr, u, p.w_hr, h_prev, p.b_r[0], m, r.data());
  for (int i = 0; i < m; ++i) {
    z[i] = detail::sigmoid(z[i]);
    r[i] = detail::sigmoid(r[i]);
    rh[i] = r[i] * h_prev[i];
  }
  detail::two_matvec(p.w_xh, u, p.w_hh, rh.data(), p.b_h[0], m, hc.data());
  for (int i = 0; i < m; ++i) {
    hc[i] = std::tanh(hc[i]);
    h_out[i] = z[i] * hc[i] + (Real(1) - z[i]) * h_prev[i];
  }
  if (cache) {
    cache->u.assign(u, u + n);
    cache->h_prev.assign(h_prev, h_prev + m);
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->hc = std::move(hc);
  }
}

// Shape-checked wrapper (u, h_prev as 1 x n / 1 x m rows).
template <class Real>
Matrix<Real> gru_cell(const Matrix<Real>& u, const Matrix<Real>& h_prev,
                      const GruParams<Real>& p) {
  require(u.rows == 1 && u.cols == p.input_size,
          "gru_cell: input is " + shape_str(u.rows, u.cols) + ", expected 1x" +
              std::to_string(p.input_size));
  require(h_prev.rows == 1 && h_prev.cols == p.hidden_size,
          "gru_cell: hidden is " + shape_str(h_prev.rows, h_prev.cols) + ", expected 1x" +
              std::to_string(p.hidden_size));
  Matrix<Real> h(1, p.hidden_size);
  gru_cell(u.data.data(), h_prev.data.data(), p, h.data.data());
  return h;
}

// Accumulates parameter grads into `g`; writes du (n) and dh_prev (m).
template <class Real>
void gru_cell_backward(const Real* dh, const GruStepCache<Real>& c, const GruParams<Real>& p,
                       GruParams<Real>& g, Real* du, Real* dh_prev) {
  const int m = p.hidden_size, n = p.input_size;
  std::vector<Real> da_z(m), da_r(m), da_h(m), d_rh(m);
  // h = z.hc + (1-z).h_prev
  for (int i = 0; i < m; ++i) {
    const Real dz = dh[i] * (c.hc[i] - c.h_prev[i]);
    const Real dhc = dh[i] * c.z[i];
    dh_prev[i] = dh[i] * (Real(1) - c.z[i]);
    da_h[i] = dhc * (Real(1) - c.hc[i] * c.hc[i]);
    da_z[i] = dz * c.z[i] * (Real(1) - c.z[i]);
  }
  // candidate: a_h = W_xh u + W_hh (r.h_prev) + b_h
  for (int i = 0; i < m; ++i) {
    Real acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int o = 0; o < m; ++o) acc += p.w_hh.at(o, i) * da_h[o];
    d_rh[i] = acc;
  }
  for (int i = 0; i < m; ++i) {
    const Real dr = d_rh[i] * c.h_prev[i];
    dh_prev[i] += d_rh[i] * c.r[i];
    da_r[i] = dr * c.r[i] * (Real(1) - c.r[i]);
  }
  // gate pre-activation contributions
  for (int o = 0; o < m; ++o) {
    const Real az = da_z[o], ar = da_r[o], ah = da_h[o];
    g.b_z[0][o] += az;
    g.b_r[0][o] += ar;
    g.b_h[0][o] += ah;
    Real* gwxz = g.w_xz[o];
    Real* gwxr = g.w_xr[o];
    Real* gwxh = g.w_xh[o];
    const Real* u = c.u.data();
#pragma omp simd
    for (int i = 0; i < n; ++i) {
      gwxz[i] += az * u[i];
      gwxr[i] += ar * u[i];
      gwxh[i] += ah * u[i];
    }
    Real* gwhz = g.w_hz[o];
    Real* gwhr = g.w_hr[o];
    Real* gwhh = g.w_hh[o];
    const Real* hp = c.h_prev.data();
    const Real* r = c.r.data();
#pragma omp simd
    for (int i = 0; i < m; ++i) {
      gwhz[i] += az * hp[i];
      gwhr[i] += ar * hp[i];
      gwhh[i] += ah * (r[i] * hp[i]);
    }
  }
  for (int i = 0; i < n; ++i) {
    Real acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int o = 0; o < m; ++o)
      acc += p.w_xz.at(o, i) * da_z[o] + p.w_xr.at(o, i) * da_r[o] + p.w_xh.at(o, i) * da_h[o];
    du[i] = acc;
  }
  for (int i = 0; i < m; ++i) {
    Real acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int o = 0; o < m; ++o) acc += p.w_hz.at(o, i) * da_z[o] + p.w_hr.at(o, i) * da_r[o];
    dh_prev[i] += acc;
  }
}

// xhat = W_imp h + b_imp
template <class Real>
void estimate_next(const Real* h, const GruParams<Real>& p, Real* xhat) {
  for (int j = 0; j < p.input_size; ++j) {
    const Real* wr = p.w_imp[j];
    Real acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int i = 0; i < p.hidden_size; ++i) acc += wr[i] * h[i];
    xhat[j] = acc + p.b_imp[0][j];
  }
}

template <class Real>
Matrix<Real> estimate_next(const Matrix<Real>& h_prev, const GruParams<Real>& p) {
  require(h_prev.rows == 1 && h_prev.cols == p.hidden_size, "estimate_next: hidden size mismatch");
  require(all_finite(h_prev), "estimate_next: non-finite hidden state");
  Matrix<Real> x(1, p.input_size);
  estimate_next(h_prev.data.data(), p, x.data.data());
  return x;
}

template <class Real>
struct ImputationTrace {
  int length = 0, dims = 0, hidden = 0;
  Matrix<Real> u;     // T x n merged sequence
  Matrix<Real> xhat;  // T x n estimates; row 0 is the xhat_1 = 0 convention
  Matrix<Real> h;     // T x m hidden states h_1..h_T
  Matrix<Real> mask;  // T x n copy
  bool all_missing = false;  // mask was identically zero: pure free-run
};

template <class Real>
struct ImputationCache {
  std::vector<GruStepCache<Real>> steps;  // one per time step
};

template <class Real>
ImputationTrace<Real> impute_sequence(const Matrix<Real>& x, const Matrix<Real>& mask,
                                      const GruParams<Real>& p,
                                      ImputationCache<Real>* cache = nullptr) {
  const int T = x.rows, n = x.cols, m = p.hidden_size;
  require(n == p.input_size, "impute_sequence: series has " + std::to_string(n) +
                                 " dims, params expect " + std::to_string(p.input_size));
  require(mask.rows == T && mask.cols == n, "impute_sequence: mask shape mismatch");
  require(T >= 2, "impute_sequence: need T >= 2, got " + std::to_string(T));
  bool any_observed = false;
  for (const Real v : mask.data) {
    require(v == Real(0) || v == Real(1), "impute_sequence: mask entries must be 0 or 1");
    if (v == Real(1)) any_observed = true;
  }

  ImputationTrace<Real> tr;
  tr.length = T;
  tr.dims = n;
  tr.hidden = m;
  tr.u = Matrix<Real>(T, n);
  tr.xhat = Matrix<Real>(T, n);
  tr.h = Matrix<Real>(T, m);
  tr.mask = mask;
  tr.all_missing = !any_observed;
  if (cache) cache->steps.resize(T);

  std::vector<Real> h_prev(m, Real(0));  // h_0 = 0
  for (int t = 0; t < T; ++t) {
    const Real* xt = x[t];
    const Real* mt = mask[t];
    const Real* est = tr.xhat[t];  // xhat_t; row 0 stays zero
    Real* ut = tr.u[t];
    for (int j = 0; j < n; ++j) ut[j] = mt[j] == Real(1) ? xt[j] : est[j];
    gru_cell(ut, h_prev.data(), p, tr.h[t], cache ? &cache->steps[t] : nullptr);
    if (t + 1 < T) estimate_next(tr.h[t], p, tr.xhat[t + 1]);
    h_prev.assign(tr.h[t], tr.h[t] + m);
  }
  return tr;
}

// Backpropagation through the unrolled recurrence.
//   du_up:    T x n upstream gradient on the merged sequence U (empty = zero)
//   dxhat_up: T x n upstream gradient on the estimates (empty = zero)
//   dh_last:  optional gradient on h_T (length m), used by the linear-head variant
// Parameter grads are accumulated into `g`. When dx is non-null it receives the
// gradient on the stored input; masked-out positions get exactly zero.
template <class Real>
void impute_sequence_backward(const ImputationTrace<Real>& tr, const ImputationCache<Real>& cache,
                              const GruParams<Real>& p, const Matrix<Real>& du_up,
                              const Matrix<Real>& dxhat_up, const Real* dh_last,
                              GruParams<Real>& g, Matrix<Real>* dx = nullptr) {
  const int T = tr.length, n = tr.dims, m = tr.hidden;
  require(static_cast<int>(cache.steps.size()) == T, "impute backward: missing forward cache");
  require(du_up.empty() || (du_up.rows == T && du_up.cols == n),
          "impute backward: du shape mismatch");
  require(dxhat_up.empty() || (dxhat_up.rows == T && dxhat_up.cols == n),
          "impute backward: dxhat shape mismatch");
  if (dx) *dx = Matrix<Real>(T, n);

  std::vector<Real> dh(m, Real(0));
  if (dh_last)
    for (int i = 0; i < m; ++i) dh[i] = dh_last[i];
  std::vector<Real> du_cell(n), dh_prev(m), dxh(n);

  for (int t = T - 1; t >= 0; --t) {
    gru_cell_backward(dh.data(), cache.steps[t], p, g, du_cell.data(), dh_prev.data());
    const Real* mt = tr.mask[t];
    for (int j = 0; j < n; ++j) {
      const Real du_total = du_cell[j] + (du_up.empty() ? Real(0) : du_up[t][j]);
      if (dx) (*dx)[t][j] = mt[j] == Real(1) ? du_total : Real(0);
      dxh[j] = (mt[j] == Real(1) ? Real(0) : du_total) +
               (dxhat_up.empty() ? Real(0) : dxhat_up[t][j]);
    }
    if (t >= 1) {
      // xhat_t = W_imp h_{t-1} + b_imp, h_{t-1} = tr.h row t-1
      const Real* h_in = tr.h[t - 1];
      for (int j = 0; j < n; ++j) {
        const Real d = dxh[j];
        g.b_imp[0][j] += d;
        Real* gw = g.w_imp[j];
#pragma omp simd
        for (int i = 0; i < m; ++i) gw[i] += d * h_in[i];
      }
      for (int i = 0; i < m; ++i) {
        Real acc = 0;
#pragma omp simd reduction(+ : acc)
        for (int j = 0; j < n; ++j) acc += p.w_imp.at(j, i) * dxh[j];
        dh_prev[i] += acc;
      }
    }
    // xhat_1 is the zero constant: gradient on it is dropped
    dh = dh_prev;
  }
}

}  // namespace itsc
