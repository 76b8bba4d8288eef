#pragma once

// Multi-scale feature learning: N stacked layers, each running K parallel
// dilated convolutions of different kernel sizes, each branch going
// Conv1d -> ReLU -> BN (that order), concatenated channel-wise. A global
// average pool over time plus a linear softmax head closes the classifier.
//
// Kernel schedule: layers 1..N-1 use {4k+3 : k=1..K} = {7, 11, ..., 4K+3};
// the final layer always uses {1, 3, 5}.

#include "core.hpp"
#include "nn/activations.hpp"
#include "nn/batchnorm.hpp"
#include "nn/conv1d.hpp"
#include "nn/linear.hpp"
#include "nn/softmax.hpp"
#include "random.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace itsc {

struct MsflSpec {
  int num_layers = 2;        // N
  int scales_per_layer = 6;  // K
  int dilation = 2;          // d on the large-kernel layers; final layer uses 1
  int branch_channels = 32;  // conv filters per kernel branch
  int num_classes = 0;       // C
  int input_channels = 0;    // n

  void validate() const {
    require(num_layers >= 1, "msfl: num_layers must be >= 1");
    require(scales_per_layer >= 1, "msfl: scales_per_layer must be >= 1");
    require(dilation >= 1, "msfl: dilation must be >= 1");
    require(branch_channels >= 1, "msfl: branch_channels must be >= 1");
    require(num_classes >= 2, "msfl: need at least 2 classes");
    require(input_channels >= 1, "msfl: input_channels must be >= 1");
  }
};

// Kernel sizes of layer `layer_index` (1-based) in an N-layer module.
inline std::vector<int> kernel_set(int layer_index, int scales_per_layer, int num_layers) {
  require(layer_index >= 1 && layer_index <= num_layers,
          "kernel_set: layer index " + std::to_string(layer_index) + " out of range [1," +
              std::to_string(num_layers) + "]");
  require(scales_per_layer >= 1, "kernel_set: need at least one scale");
  if (layer_index == num_layers) return {1, 3, 5};
  std::vector<int> sizes(scales_per_layer);
  for (int k = 1; k <= scales_per_layer; ++k) sizes[k - 1] = 4 * k + 3;
  return sizes;
}

template <class Real>
struct ConvBnBranch {
  nn::ConvSpec conv;
  Matrix<Real> w;  // out_channels x (in_channels * kernel)
  Matrix<Real> b;  // 1 x out_channels
  nn::BatchNorm1d<Real> bn;
};

template <class Real>
struct MsflLayer {
  int in_channels = 0;
  int dilation = 1;
  std::vector<ConvBnBranch<Real>> branches;

  int out_channels() const {
    return static_cast<int>(branches.size()) ? static_cast<int>(branches.size()) *
                                                   branches.front().conv.out_channels
                                             : 0;
  }
};

template <class Real>
struct MsflParams {
  MsflSpec spec;
  std::vector<MsflLayer<Real>> layers;
  Matrix<Real> head_w;  // num_classes x feature_dim
  Matrix<Real> head_b;  // 1 x num_classes

  MsflParams() = default;
  explicit MsflParams(const MsflSpec& s) : spec(s) {
    s.validate();
    int in_ch = s.input_channels;
    layers.resize(s.num_layers);
    for (int i = 1; i <= s.num_layers; ++i) {
      MsflLayer<Real>& layer = layers[i - 1];
      layer.in_channels = in_ch;
      layer.dilation = (i == s.num_layers) ? 1 : s.dilation;
      const std::vector<int> kernels = kernel_set(i, s.scales_per_layer, s.num_layers);
      layer.branches.resize(kernels.size());
      for (std::size_t k = 0; k < kernels.size(); ++k) {
        ConvBnBranch<Real>& br = layer.branches[k];
        br.conv = nn::ConvSpec{in_ch, s.branch_channels, kernels[k], layer.dilation};
        br.conv.validate();
        br.w = Matrix<Real>(s.branch_channels, in_ch * kernels[k]);
        br.b = Matrix<Real>(1, s.branch_channels);
        br.bn = nn::BatchNorm1d<Real>(s.branch_channels);
      }
      in_ch = layer.out_channels();
    }
    head_w = Matrix<Real>(s.num_classes, in_ch);
    head_b = Matrix<Real>(1, s.num_classes);
  }

  int feature_dim() const { return layers.empty() ? 0 : layers.back().out_channels(); }

  void init(Rng& rng) {
    for (auto& layer : layers)
      for (auto& br : layer.branches) {
        uniform_init(br.w, layer.in_channels * br.conv.kernel_size, rng);
        br.b.zero();
      }
    uniform_init(head_w, head_w.cols, rng);
    head_b.zero();
  }

  // Trainable tensors in fixed (checkpoint) order.
  template <class Fn>
  void for_each_param(Fn&& fn) {
    for (std::size_t li = 0; li < layers.size(); ++li)
      for (std::size_t bi = 0; bi < layers[li].branches.size(); ++bi) {
        ConvBnBranch<Real>& br = layers[li].branches[bi];
        const std::string tag = "msfl.l" + std::to_string(li + 1) + ".k" +
                                std::to_string(br.conv.kernel_size);
        fn(tag + ".conv_w", br.w);
        fn(tag + ".conv_b", br.b);
        fn(tag + ".bn_gamma", br.bn.gamma);
        fn(tag + ".bn_beta", br.bn.beta);
      }
    fn("head.w", head_w);
    fn("head.b", head_b);
  }

  // Non-trainable buffers (BN running stats), same ordering scheme.
  template <class Fn>
  void for_each_buffer(Fn&& fn) {
    for (std::size_t li = 0; li < layers.size(); ++li)
      for (std::size_t bi = 0; bi < layers[li].branches.size(); ++bi) {
        ConvBnBranch<Real>& br = layers[li].branches[bi];
        const std::string tag = "msfl.l" + std::to_string(li + 1) + ".k" +
                                std::to_string(br.conv.kernel_size);
        fn(tag + ".bn_run_mean", br.bn.run_mean);
        fn(tag + ".bn_run_var", br.bn.run_var);
      }
  }
};

// Zero-valued gradient holder mirroring the trainable tensors of MsflParams.
template <class Real>
MsflParams<Real> make_zero_grads(const MsflParams<Real>& p) {
  MsflParams<Real> g = p;
  g.for_each_param([](const std::string&, Matrix<Real>& m) { m.zero(); });
  return g;
}

template <class Real>
struct MsflLayerCache {
  std::vector<Real> input;                       // [B][C_in][T]
  std::vector<std::vector<Real>> conv_out;       // per branch, [B][cb][T] pre-ReLU
  std::vector<nn::BnCache<Real>> bn;             // per branch
};

template <class Real>
struct MsflCache {
  int batch = 0, time = 0;
  std::vector<MsflLayerCache<Real>> layers;
  std::vector<Real> features;  // final layer output [B][feat][T]
  Matrix<Real> pooled;         // B x feat
};

namespace detail {

// Weight/bias grads of one conv over a whole batch. Parallel over output
// channels: each coordinate is accumulated by exactly one thread in fixed
// batch order, so the result does not depend on the thread count.
template <class Real>
void conv_backward_weights_batch(const Real* gy, const Real* x, int B, int T,
                                 const nn::ConvSpec& s, Real* gw, Real* gb) {
  const int f = s.kernel_size, pad = s.padding();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int o = 0; o < s.out_channels; ++o) {
    for (int b = 0; b < B; ++b) {
      const Real* go = gy + (static_cast<std::size_t>(b) * s.out_channels + o) * T;
      double acc_b = 0;
#pragma omp simd reduction(+ : acc_b)
      for (int t = 0; t < T; ++t) acc_b += static_cast<double>(go[t]);
      gb[o] += static_cast<Real>(acc_b);
      for (int ci = 0; ci < s.in_channels; ++ci) {
        const Real* xc = x + (static_cast<std::size_t>(b) * s.in_channels + ci) * T;
        Real* gwr = gw + (static_cast<std::size_t>(o) * s.in_channels + ci) * f;
        for (int k = 0; k < f; ++k) {
          const int off = s.dilation * k - pad;
          const int t0 = std::max(0, -off), t1 = std::min(T, T - off);
          Real acc = 0;
#pragma omp simd reduction(+ : acc)
          for (int t = t0; t < t1; ++t) acc += go[t] * xc[t + off];
          gwr[k] += acc;
        }
      }
    }
  }
}

// One multi-scale layer over a [B][C_in][T] tensor; output [B][C_out][T].
template <class Real>
void msfl_layer_forward(const Real* x, int B, int T, MsflLayer<Real>& layer, nn::BnMode mode,
                        bool update_running, Real* y, MsflLayerCache<Real>* cache) {
  const int cb = layer.branches.front().conv.out_channels;
  const int c_out = layer.out_channels();
  const std::size_t branch_elems = static_cast<std::size_t>(B) * cb * T;
  if (cache) {
    cache->conv_out.resize(layer.branches.size());
    cache->bn.resize(layer.branches.size());
  }
  std::vector<Real> conv_buf(branch_elems), bn_buf(branch_elems);
  for (std::size_t k = 0; k < layer.branches.size(); ++k) {
    ConvBnBranch<Real>& br = layer.branches[k];
    std::vector<Real>& pre = cache ? cache->conv_out[k] : conv_buf;
    pre.resize(branch_elems);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int b = 0; b < B; ++b)
      nn::conv1d_forward(x + static_cast<std::size_t>(b) * layer.in_channels * T, T, br.conv,
                         br.w.data.data(), br.b.data.data(),
                         pre.data() + static_cast<std::size_t>(b) * cb * T);
    nn::relu_forward(pre.data(), branch_elems, bn_buf.data());
    nn::BnCache<Real> local_bn;
    nn::BnCache<Real>& bnc = cache ? cache->bn[k] : local_bn;
    if (mode == nn::BnMode::train)
      br.bn.forward(bn_buf.data(), B, T, mode, bn_buf.data(), &bnc, update_running);
    else
      br.bn.forward(bn_buf.data(), B, T, mode, bn_buf.data(), nullptr);
    // scatter branch rows into the channel-concatenated output
    for (int b = 0; b < B; ++b)
      std::copy_n(bn_buf.data() + static_cast<std::size_t>(b) * cb * T,
                  static_cast<std::size_t>(cb) * T,
                  y + (static_cast<std::size_t>(b) * c_out + k * cb) * T);
  }
}

template <class Real>
void msfl_layer_backward(const Real* gy, int B, int T, MsflLayer<Real>& layer,
                         const MsflLayerCache<Real>& cache, MsflLayer<Real>& grads, Real* gx) {
  const int cb = layer.branches.front().conv.out_channels;
  const int c_out = layer.out_channels();
  const std::size_t branch_elems = static_cast<std::size_t>(B) * cb * T;
  std::vector<Real> g_bn(branch_elems), g_pre(branch_elems);
  if (gx)
    std::fill(gx, gx + static_cast<std::size_t>(B) * layer.in_channels * T, Real(0));
  for (std::size_t k = 0; k < layer.branches.size(); ++k) {
    ConvBnBranch<Real>& br = layer.branches[k];
    ConvBnBranch<Real>& gbr = grads.branches[k];
    // gather this branch's channel block
    for (int b = 0; b < B; ++b)
      std::copy_n(gy + (static_cast<std::size_t>(b) * c_out + k * cb) * T,
                  static_cast<std::size_t>(cb) * T,
                  g_bn.data() + static_cast<std::size_t>(b) * cb * T);
    std::fill(g_pre.begin(), g_pre.end(), Real(0));
    nn::batchnorm_backward(g_bn.data(), cache.bn[k], br.bn.gamma.data.data(), g_pre.data(),
                           gbr.bn.gamma.data.data(), gbr.bn.beta.data.data());
    // ReLU: zero where the conv output was <= 0
    const std::vector<Real>& pre = cache.conv_out[k];
    for (std::size_t i = 0; i < branch_elems; ++i)
      if (!(pre[i] > Real(0))) g_pre[i] = Real(0);
    // conv: input grads parallel over batch; weight grads over out-channels
    if (gx) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (int b = 0; b < B; ++b)
        nn::conv1d_backward(g_pre.data() + static_cast<std::size_t>(b) * cb * T,
                            cache.input.data() + static_cast<std::size_t>(b) * layer.in_channels * T,
                            T, br.conv, br.w.data.data(),
                            gx + static_cast<std::size_t>(b) * layer.in_channels * T,
                            static_cast<Real*>(nullptr), static_cast<Real*>(nullptr));
    }
    conv_backward_weights_batch(g_pre.data(), cache.input.data(), B, T, br.conv,
                                gbr.w.data.data(), gbr.b.data.data());
  }
}

}  // namespace detail

// Full module forward over a batch: x is [B][n][T]; returns logits (B x C).
// Cache is required for backward; eval mode runs without one.
template <class Real>
Matrix<Real> msfl_forward(const Real* x, int B, int T, MsflParams<Real>& p, nn::BnMode mode,
                          MsflCache<Real>* cache, bool update_running = true) {
  p.spec.validate();
  require(B >= 1 && T >= 1, "msfl_forward: empty batch");
  if (cache) {
    cache->batch = B;
    cache->time = T;
    cache->layers.resize(p.layers.size());
  }
  std::vector<Real> cur(x, x + static_cast<std::size_t>(B) * p.spec.input_channels * T);
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    MsflLayer<Real>& layer = p.layers[li];
    std::vector<Real> next(static_cast<std::size_t>(B) * layer.out_channels() * T);
    if (cache) cache->layers[li].input = cur;
    detail::msfl_layer_forward(cur.data(), B, T, layer, mode, update_running, next.data(),
                               cache ? &cache->layers[li] : nullptr);
    cur = std::move(next);
  }
  // global average pool over time
  const int feat = p.feature_dim();
  Matrix<Real> pooled(B, feat);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < feat; ++c) {
      const Real* row = cur.data() + (static_cast<std::size_t>(b) * feat + c) * T;
      double acc = 0;
#pragma omp simd reduction(+ : acc)
      for (int t = 0; t < T; ++t) acc += static_cast<double>(row[t]);
      pooled[b][c] = static_cast<Real>(acc / T);
    }
  Matrix<Real> logits(B, p.spec.num_classes);
  nn::linear_forward(pooled.data.data(), B, feat, p.spec.num_classes, p.head_w.data.data(),
                     p.head_b.data.data(), logits.data.data());
  if (cache) {
    cache->features = std::move(cur);
    cache->pooled = std::move(pooled);
  }
  return logits;
}

// grad_logits: B x C. Accumulates parameter grads into `g`. When gx is
// non-null it receives the gradient on the module input ([B][n][T], overwritten).
template <class Real>
void msfl_backward(const Matrix<Real>& grad_logits, MsflParams<Real>& p,
                   const MsflCache<Real>& cache, MsflParams<Real>& g, Real* gx) {
  const int B = cache.batch, T = cache.time, feat = p.feature_dim();
  require(grad_logits.rows == B && grad_logits.cols == p.spec.num_classes,
          "msfl_backward: grad_logits shape mismatch");
  Matrix<Real> g_pooled(B, feat);
  nn::linear_backward(grad_logits.data.data(), cache.pooled.data.data(), B, feat,
                      p.spec.num_classes, p.head_w.data.data(), g_pooled.data.data(),
                      g.head_w.data.data(), g.head_b.data.data());
  // un-pool: spread evenly over time
  std::vector<Real> g_cur(static_cast<std::size_t>(B) * feat * T);
  const Real inv_t = Real(1) / static_cast<Real>(T);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < feat; ++c) {
      const Real v = g_pooled[b][c] * inv_t;
      Real* row = g_cur.data() + (static_cast<std::size_t>(b) * feat + c) * T;
      for (int t = 0; t < T; ++t) row[t] = v;
    }
  for (int li = static_cast<int>(p.layers.size()) - 1; li >= 0; --li) {
    MsflLayer<Real>& layer = p.layers[li];
    const bool need_gx = (li > 0) || (gx != nullptr);
    std::vector<Real> g_prev;
    Real* g_prev_ptr = nullptr;
    if (need_gx) {
      if (li == 0) {
        g_prev_ptr = gx;
      } else {
        g_prev.resize(static_cast<std::size_t>(B) * layer.in_channels * T);
        g_prev_ptr = g_prev.data();
      }
    }
    detail::msfl_layer_backward(g_cur.data(), B, T, layer, cache.layers[li], g.layers[li],
                                g_prev_ptr);
    if (li > 0) g_cur = std::move(g_prev);
  }
}

// Single-sample classifier probabilities (spec op): pool over time, linear
// head, softmax. x_n: feature map [channels][T].
template <class Real>
std::vector<Real> classify(const Matrix<Real>& x_n, const Matrix<Real>& head_w,
                           const Matrix<Real>& head_b) {
  require(all_finite(x_n), "classify: non-finite feature map");
  require(head_w.cols == x_n.rows, "classify: head expects " + std::to_string(head_w.cols) +
                                       " channels, feature map has " + std::to_string(x_n.rows));
  const int C = head_w.rows;
  Matrix<Real> pooled(1, x_n.rows);
  for (int c = 0; c < x_n.rows; ++c) {
    double acc = 0;
    for (int t = 0; t < x_n.cols; ++t) acc += static_cast<double>(x_n[c][t]);
    pooled[0][c] = static_cast<Real>(acc / x_n.cols);
  }
  Matrix<Real> logits = nn::linear_forward(pooled, head_w, head_b);
  double mx = logits[0][0];
  for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(logits[0][c]));
  std::vector<Real> probs(C);
  double denom = 0;
  for (int c = 0; c < C; ++c) {
    const double e = std::exp(static_cast<double>(logits[0][c]) - mx);
    probs[c] = static_cast<Real>(e);
    denom += e;
  }
  for (int c = 0; c < C; ++c) probs[c] = static_cast<Real>(probs[c] / denom);
  return probs;
}

}  // namespace itsc
