#pragma once

// Adam with bias correction. One state per parameter tensor; moments are kept
// in double regardless of the parameter precision.

#include "../core.hpp"

namespace itsc::nn {

struct AdamState {
  long long step_count = 0;
  std::vector<double> m, v;  // first and second moment accumulators
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double lr) : m(n, 0.0), v(n, 0.0), learning_rate(lr) {}
};

template <class Real>
void adam_step(Real* params, const Real* grads, std::size_t n, AdamState& st) {
  require(st.m.size() == n && st.v.size() == n,
          "adam_step: state sized for " + std::to_string(st.m.size()) + " params, got " +
              std::to_string(n));
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(static_cast<double>(grads[i])))
      throw numeric_error("adam_step: non-finite gradient at coordinate " + std::to_string(i));
  st.step_count += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = static_cast<double>(grads[i]);
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] = static_cast<Real>(static_cast<double>(params[i]) -
                                  st.learning_rate * mhat / (std::sqrt(vhat) + st.eps));
  }
}

template <class Real>
void adam_step(Matrix<Real>& params, const Matrix<Real>& grads, AdamState& st) {
  require(params.same_shape(grads), "adam_step: param/grad shape mismatch");
  adam_step(params.data.data(), grads.data.data(), params.size(), st);
}

}  // namespace itsc::nn
