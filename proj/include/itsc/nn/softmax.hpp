#pragma once

// Softmax + cross-entropy, fused for numerical stability (max subtraction,
// log-sum-exp). Gradient is (p - onehot) / batch.

#include "../core.hpp"

namespace itsc::nn {

// logits: [B][C]; labels: B class indices in [0,C). probs and grad_logits are
// optional outputs with the same layout as logits. Returns the mean loss.
template <class Real>
double softmax_cross_entropy(const Real* logits, int B, int C, const int* labels, Real* probs,
                             Real* grad_logits) {
  require(C >= 2, "softmax_cross_entropy: need at least 2 classes, got " + std::to_string(C));
  require(B >= 1, "softmax_cross_entropy: empty batch");
  double loss = 0;
  std::vector<double> p(C);
  for (int b = 0; b < B; ++b) {
    const int y = labels[b];
    require(y >= 0 && y < C, "softmax_cross_entropy: label " + std::to_string(y) +
                                 " out of range [0," + std::to_string(C) + ")");
    const Real* row = logits + static_cast<std::size_t>(b) * C;
    double mx = static_cast<double>(row[0]);
    for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double denom = 0;
    for (int c = 0; c < C; ++c) {
      p[c] = std::exp(static_cast<double>(row[c]) - mx);
      denom += p[c];
    }
    const double log_denom = std::log(denom);
    loss += log_denom - (static_cast<double>(row[y]) - mx);
    const double inv_q = 1.0 / static_cast<double>(B);
    for (int c = 0; c < C; ++c) {
      const double pc = p[c] / denom;
      if (probs) probs[static_cast<std::size_t>(b) * C + c] = static_cast<Real>(pc);
      if (grad_logits)
        grad_logits[static_cast<std::size_t>(b) * C + c] =
            static_cast<Real>((pc - (c == y ? 1.0 : 0.0)) * inv_q);
    }
  }
  return loss / static_cast<double>(B);
}

template <class Real>
struct SoftmaxCeResult {
  double loss = 0;
  Matrix<Real> probabilities;
  Matrix<Real> grad_logits;
};

template <class Real>
SoftmaxCeResult<Real> softmax_cross_entropy(const Matrix<Real>& logits,
                                            const std::vector<int>& labels) {
  require(static_cast<int>(labels.size()) == logits.rows,
          "softmax_cross_entropy: batch/label count mismatch");
  SoftmaxCeResult<Real> r;
  r.probabilities = Matrix<Real>(logits.rows, logits.cols);
  r.grad_logits = Matrix<Real>(logits.rows, logits.cols);
  r.loss = softmax_cross_entropy(logits.data.data(), logits.rows, logits.cols, labels.data(),
                                 r.probabilities.data.data(), r.grad_logits.data.data());
  return r;
}

}  // namespace itsc::nn
