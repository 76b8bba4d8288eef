#pragma once

// Batch normalization over a [batch][channel][time] tensor: statistics are
// taken per channel across (batch, time). Train mode normalizes with biased
// variance; running stats receive the unbiased estimate (momentum update),
// matching the usual deep-learning convention.

#include "../core.hpp"

namespace itsc::nn {

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

enum class BnMode { train, eval };

template <class Real>
struct BnCache {
  int batch = 0, channels = 0, length = 0;
  std::vector<Real> xhat;      // normalized input, same layout as x
  std::vector<double> mean;    // per channel
  std::vector<double> var;     // per channel, biased
  std::vector<double> inv_std; // per channel, 1/sqrt(var+eps)
  std::size_t count() const { return static_cast<std::size_t>(batch) * length; }
};

// Pure function of (x, gamma, beta); running stats are updated separately so
// gradient checking can re-evaluate the forward without side effects.
template <class Real>
void batchnorm_train_forward(const Real* x, int B, int C, int T, const Real* gamma,
                             const Real* beta, double eps, Real* y, BnCache<Real>& cache) {
  require(B >= 1 && C >= 1 && T >= 1, "batchnorm: bad tensor dims");
  const std::size_t m = static_cast<std::size_t>(B) * T;
  if (m < 2)
    throw shape_error("batchnorm: train mode needs >= 2 elements per channel, got " +
                      std::to_string(m));
  cache.batch = B;
  cache.channels = C;
  cache.length = T;
  cache.xhat.resize(static_cast<std::size_t>(B) * C * T);
  cache.mean.assign(C, 0.0);
  cache.var.assign(C, 0.0);
  cache.inv_std.assign(C, 0.0);
  for (int c = 0; c < C; ++c) {
    double sum = 0, sq = 0;
    for (int b = 0; b < B; ++b) {
      const Real* row = x + (static_cast<std::size_t>(b) * C + c) * T;
#pragma omp simd reduction(+ : sum, sq)
      for (int t = 0; t < T; ++t) {
        const double v = static_cast<double>(row[t]);
        sum += v;
        sq += v * v;
      }
    }
    const double mean = sum / static_cast<double>(m);
    double var = sq / static_cast<double>(m) - mean * mean;
    if (var < 0) var = 0;  // guard roundoff on constant channels
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.mean[c] = mean;
    cache.var[c] = var;
    cache.inv_std[c] = inv;
    const Real g = gamma[c], be = beta[c];
    for (int b = 0; b < B; ++b) {
      const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
      const Real* row = x + base;
      Real* xh = cache.xhat.data() + base;
      Real* yo = y + base;
      for (int t = 0; t < T; ++t) {
        const Real h = static_cast<Real>((static_cast<double>(row[t]) - mean) * inv);
        xh[t] = h;
        yo[t] = g * h + be;
      }
    }
  }
}

template <class Real>
void batchnorm_update_running(const BnCache<Real>& cache, double momentum, Real* run_mean,
                              Real* run_var) {
  const double m = static_cast<double>(cache.count());
  const double unbias = m > 1 ? m / (m - 1.0) : 1.0;
  for (int c = 0; c < cache.channels; ++c) {
    run_mean[c] = static_cast<Real>((1.0 - momentum) * run_mean[c] + momentum * cache.mean[c]);
    run_var[c] =
        static_cast<Real>((1.0 - momentum) * run_var[c] + momentum * cache.var[c] * unbias);
  }
}

template <class Real>
void batchnorm_eval_forward(const Real* x, int B, int C, int T, const Real* gamma,
                            const Real* beta, const Real* run_mean, const Real* run_var,
                            double eps, Real* y) {
  for (int c = 0; c < C; ++c) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(run_var[c]) + eps);
    const double mean = static_cast<double>(run_mean[c]);
    const Real g = gamma[c], be = beta[c];
    for (int b = 0; b < B; ++b) {
      const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
      const Real* row = x + base;
      Real* yo = y + base;
      for (int t = 0; t < T; ++t)
        yo[t] = static_cast<Real>(g * ((static_cast<double>(row[t]) - mean) * inv) + be);
    }
  }
}

// Accumulates into gx/ggamma/gbeta; gx may be null.
template <class Real>
void batchnorm_backward(const Real* gy, const BnCache<Real>& cache, const Real* gamma, Real* gx,
                        Real* ggamma, Real* gbeta) {
  const int B = cache.batch, C = cache.channels, T = cache.length;
  const double m = static_cast<double>(cache.count());
  for (int c = 0; c < C; ++c) {
    double sum_gy = 0, sum_gy_xhat = 0;
    for (int b = 0; b < B; ++b) {
      const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
      const Real* go = gy + base;
      const Real* xh = cache.xhat.data() + base;
#pragma omp simd reduction(+ : sum_gy, sum_gy_xhat)
      for (int t = 0; t < T; ++t) {
        sum_gy += static_cast<double>(go[t]);
        sum_gy_xhat += static_cast<double>(go[t]) * static_cast<double>(xh[t]);
      }
    }
    if (gbeta) gbeta[c] += static_cast<Real>(sum_gy);
    if (ggamma) ggamma[c] += static_cast<Real>(sum_gy_xhat);
    if (gx) {
      const double g_inv = static_cast<double>(gamma[c]) * cache.inv_std[c];
      const double mean_gy = sum_gy / m, mean_gy_xhat = sum_gy_xhat / m;
      for (int b = 0; b < B; ++b) {
        const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
        const Real* go = gy + base;
        const Real* xh = cache.xhat.data() + base;
        Real* gxc = gx + base;
        for (int t = 0; t < T; ++t)
          gxc[t] += static_cast<Real>(
              g_inv * (static_cast<double>(go[t]) - mean_gy -
                       static_cast<double>(xh[t]) * mean_gy_xhat));
      }
    }
  }
}

// Stateful wrapper used where a module owns its affine params and running
// stats (one instance per conv branch).
template <class Real>
struct BatchNorm1d {
  Matrix<Real> gamma, beta;        // 1 x channels
  Matrix<Real> run_mean, run_var;  // buffers
  double eps = kBnEps;
  double momentum = kBnMomentum;

  BatchNorm1d() = default;
  explicit BatchNorm1d(int channels)
      : gamma(1, channels, Real(1)),
        beta(1, channels, Real(0)),
        run_mean(1, channels, Real(0)),
        run_var(1, channels, Real(1)) {}

  int channels() const { return gamma.cols; }

  void forward(const Real* x, int B, int T, BnMode mode, Real* y, BnCache<Real>* cache,
               bool update_running = true) {
    if (mode == BnMode::train) {
      require(cache != nullptr, "batchnorm: train forward needs a cache");
      batchnorm_train_forward(x, B, channels(), T, gamma.data.data(), beta.data.data(), eps, y,
                              *cache);
      if (update_running)
        batchnorm_update_running(*cache, momentum, run_mean.data.data(), run_var.data.data());
    } else {
      batchnorm_eval_forward(x, B, channels(), T, gamma.data.data(), beta.data.data(),
                             run_mean.data.data(), run_var.data.data(), eps, y);
    }
  }
};

}  // namespace itsc::nn
