#pragma once

// Joint model: GRU temporal imputation feeding the multi-scale feature
// learner, trained end to end. Two ablation variants share the plumbing:
//   zero_fill    - no imputation model; missing positions become 0 (w/o TIM)
//   linear_head  - no feature learner; linear classifier on the GRU's final
//                  hidden state (w/o MSFL)

#include "imputation.hpp"
#include "msfl.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace itsc {

enum class Variant { full, zero_fill, linear_head };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::zero_fill: return "zero_fill";
    case Variant::linear_head: return "linear_head";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "zero_fill") return Variant::zero_fill;
  if (s == "linear_head") return Variant::linear_head;
  throw io_error("unknown model variant: " + s);
}

template <class Real>
struct ParamRef {
  std::string name;
  Matrix<Real>* value = nullptr;
  Matrix<Real>* grad = nullptr;
};

template <class Real>
struct BufferRef {
  std::string name;
  Matrix<Real>* value = nullptr;
};

template <class Real>
struct Model {
  Variant variant = Variant::full;
  int input_dims = 0;
  int num_classes = 0;
  int hidden_size = 0;
  MsflSpec msfl_spec;  // valid when has_msfl()

  GruParams<Real> gru, gru_g;
  MsflParams<Real> msfl, msfl_g;
  Matrix<Real> lin_w, lin_b;    // linear_head classifier on h_T
  Matrix<Real> lin_wg, lin_bg;

  bool has_gru() const { return variant != Variant::zero_fill; }
  bool has_msfl() const { return variant != Variant::linear_head; }

  static Model make(Variant variant, int input_dims, int num_classes, int hidden_size,
                    const MsflSpec& base_spec, std::uint64_t seed) {
    Model m;
    m.variant = variant;
    m.input_dims = input_dims;
    m.num_classes = num_classes;
    m.hidden_size = hidden_size;
    Rng rng(mix_seed(seed, 0x6d6f64656cULL));
    if (m.has_gru()) {
      m.gru = GruParams<Real>(input_dims, hidden_size);
      m.gru.init(rng);
      m.gru_g = GruParams<Real>(input_dims, hidden_size);
      m.gru_g.zero_all();
    }
    if (m.has_msfl()) {
      m.msfl_spec = base_spec;
      m.msfl_spec.input_channels = input_dims;
      m.msfl_spec.num_classes = num_classes;
      m.msfl = MsflParams<Real>(m.msfl_spec);
      m.msfl.init(rng);
      m.msfl_g = make_zero_grads(m.msfl);
    } else {
      m.lin_w = Matrix<Real>(num_classes, hidden_size);
      m.lin_b = Matrix<Real>(1, num_classes);
      uniform_init(m.lin_w, hidden_size, rng);
      m.lin_wg = Matrix<Real>(num_classes, hidden_size);
      m.lin_bg = Matrix<Real>(1, num_classes);
    }
    return m;
  }

  // Trainable tensors in checkpoint order.
  std::vector<ParamRef<Real>> params() {
    std::vector<ParamRef<Real>> out;
    if (has_gru()) {
      const std::size_t base = out.size();
      gru.for_each([&](const std::string& n, Matrix<Real>& m) {
        out.push_back({n, &m, nullptr});
      });
      std::size_t i = base;
      gru_g.for_each([&](const std::string&, Matrix<Real>& m) { out[i++].grad = &m; });
    }
    if (has_msfl()) {
      const std::size_t base = out.size();
      msfl.for_each_param([&](const std::string& n, Matrix<Real>& m) {
        out.push_back({n, &m, nullptr});
      });
      std::size_t i = base;
      msfl_g.for_each_param([&](const std::string&, Matrix<Real>& m) { out[i++].grad = &m; });
    } else {
      out.push_back({"lin.w", &lin_w, &lin_wg});
      out.push_back({"lin.b", &lin_b, &lin_bg});
    }
    return out;
  }

  std::vector<BufferRef<Real>> buffers() {
    std::vector<BufferRef<Real>> out;
    if (has_msfl())
      msfl.for_each_buffer([&](const std::string& n, Matrix<Real>& m) {
        out.push_back({n, &m});
      });
    return out;
  }

  void zero_grads() {
    for (auto& p : params()) p.grad->zero();
  }

  int feature_dim() const { return has_msfl() ? msfl.feature_dim() : hidden_size; }
};

template <class Real>
struct LabeledSeries {
  Matrix<Real> x;     // T x n
  Matrix<Real> mask;  // T x n in {0,1}
  int label = 0;
  int id = 0;
};

// Reusable per-batch scratch (traces, caches, tensors).
template <class Real>
struct BatchWork {
  std::vector<ImputationTrace<Real>> traces;
  std::vector<ImputationCache<Real>> caches;
  std::vector<GruParams<Real>> sample_grads;  // per-sample buffers: gradient
                                              // reduction is batch-order fixed
                                              // regardless of thread count
  std::vector<Real> u;                        // [B][n][T]
  std::vector<Real> gu;                       // [B][n][T]
  MsflCache<Real> msfl_cache;
  Matrix<Real> h_last;  // B x m (linear_head)
  std::vector<int> labels;
};

template <class Real>
struct BatchStats {
  double l_imp = 0, l_cls = 0, l_total = 0;
  int correct = 0;
  int batch = 0;
};

namespace detail {

// Merge step shared by training and evaluation; fills work.u ([B][n][T]) and,
// when the variant has a GRU, the traces (+ caches when training).
template <class Real>
void build_merged_input(Model<Real>& model, const std::vector<LabeledSeries<Real>>& data,
                        const std::vector<int>& idx, bool with_cache, BatchWork<Real>& work) {
  const int B = static_cast<int>(idx.size());
  const int T = data[idx[0]].x.rows, n = data[idx[0]].x.cols;
  work.u.resize(static_cast<std::size_t>(B) * n * T);
  work.labels.resize(B);
  for (int b = 0; b < B; ++b) work.labels[b] = data[idx[b]].label;
  if (model.has_gru()) {
    work.traces.resize(B);
    if (with_cache) work.caches.resize(B);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int b = 0; b < B; ++b) {
      const LabeledSeries<Real>& s = data[idx[b]];
      work.traces[b] =
          impute_sequence(s.x, s.mask, model.gru, with_cache ? &work.caches[b] : nullptr);
      // transpose T x n -> [n][T]
      Real* ub = work.u.data() + static_cast<std::size_t>(b) * n * T;
      for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j) ub[static_cast<std::size_t>(j) * T + t] = work.traces[b].u[t][j];
    }
  } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int b = 0; b < B; ++b) {
      const LabeledSeries<Real>& s = data[idx[b]];
      Real* ub = work.u.data() + static_cast<std::size_t>(b) * n * T;
      for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j)
          ub[static_cast<std::size_t>(j) * T + t] =
              s.mask[t][j] == Real(1) ? s.x[t][j] : Real(0);
    }
  }
}

// Masked squared error of the estimates over steps 2..T for one trace, plus
// (optionally) its gradient d/dxhat scaled by `grad_scale`.
template <class Real>
double masked_estimate_sqerr(const LabeledSeries<Real>& s, const ImputationTrace<Real>& tr,
                             double grad_scale, Matrix<Real>* dxhat) {
  double acc = 0;
  for (int t = 1; t < tr.length; ++t)
    for (int j = 0; j < tr.dims; ++j)
      if (s.mask[t][j] == Real(1)) {
        const double diff = static_cast<double>(tr.xhat[t][j]) - static_cast<double>(s.x[t][j]);
        acc += diff * diff;
        if (dxhat) (*dxhat)[t][j] = static_cast<Real>(2.0 * diff * grad_scale);
      }
  return acc;
}

}  // namespace detail

// One optimization step's forward+backward over a batch (grads accumulated
// into the model's grad tensors; caller zeroes and applies the optimizer).
template <class Real>
BatchStats<Real> train_batch(Model<Real>& model, const std::vector<LabeledSeries<Real>>& data,
                             const std::vector<int>& idx, double alpha, double beta,
                             BatchWork<Real>& work) {
  const int B = static_cast<int>(idx.size());
  require(B >= 1, "train_batch: empty batch");
  const int T = data[idx[0]].x.rows, n = data[idx[0]].x.cols, C = model.num_classes;
  detail::build_merged_input(model, data, idx, /*with_cache=*/true, work);

  // classifier forward
  Matrix<Real> logits;
  if (model.has_msfl()) {
    logits = msfl_forward(work.u.data(), B, T, model.msfl, nn::BnMode::train, &work.msfl_cache);
  } else {
    work.h_last = Matrix<Real>(B, model.hidden_size);
    for (int b = 0; b < B; ++b)
      std::copy_n(work.traces[b].h[T - 1], model.hidden_size, work.h_last[b]);
    logits = Matrix<Real>(B, C);
    nn::linear_forward(work.h_last.data.data(), B, model.hidden_size, C, model.lin_w.data.data(),
                       model.lin_b.data.data(), logits.data.data());
  }
  auto ce = nn::softmax_cross_entropy(logits, work.labels);

  BatchStats<Real> stats;
  stats.batch = B;
  stats.l_cls = ce.loss;
  for (int b = 0; b < B; ++b) {
    int arg = 0;
    for (int c = 1; c < C; ++c)
      if (ce.probabilities[b][c] > ce.probabilities[b][arg]) arg = c;
    if (arg == work.labels[b]) ++stats.correct;
  }

  // imputation loss + gradient on the estimates
  std::vector<Matrix<Real>> dxhat;
  if (model.has_gru()) {
    dxhat.assign(B, Matrix<Real>(T, n));
    double sum = 0;
    for (int b = 0; b < B; ++b)
      sum += detail::masked_estimate_sqerr(data[idx[b]], work.traces[b], beta / B, &dxhat[b]);
    stats.l_imp = sum / B;
  }
  stats.l_total = alpha * stats.l_cls + beta * stats.l_imp;

  // backward: scale the cross-entropy gradient by alpha once
  for (auto& v : ce.grad_logits.data) v = static_cast<Real>(alpha * v);

  const Matrix<Real> empty;
  if (model.has_msfl()) {
    work.gu.resize(static_cast<std::size_t>(B) * n * T);
    msfl_backward(ce.grad_logits, model.msfl, work.msfl_cache, model.msfl_g,
                  model.has_gru() ? work.gu.data() : nullptr);
    if (model.has_gru()) {
      if (static_cast<int>(work.sample_grads.size()) < B)
        work.sample_grads.resize(B, GruParams<Real>(n, model.hidden_size));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (int b = 0; b < B; ++b) {
        work.sample_grads[b].zero_all();
        Matrix<Real> du(T, n);
        const Real* gub = work.gu.data() + static_cast<std::size_t>(b) * n * T;
        for (int t = 0; t < T; ++t)
          for (int j = 0; j < n; ++j) du[t][j] = gub[static_cast<std::size_t>(j) * T + t];
        impute_sequence_backward(work.traces[b], work.caches[b], model.gru, du, dxhat[b],
                                 static_cast<const Real*>(nullptr), work.sample_grads[b]);
      }
    }
  } else {
    Matrix<Real> gh(B, model.hidden_size);
    nn::linear_backward(ce.grad_logits.data.data(), work.h_last.data.data(), B,
                        model.hidden_size, C, model.lin_w.data.data(), gh.data.data(),
                        model.lin_wg.data.data(), model.lin_bg.data.data());
    if (static_cast<int>(work.sample_grads.size()) < B)
      work.sample_grads.resize(B, GruParams<Real>(n, model.hidden_size));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int b = 0; b < B; ++b) {
      work.sample_grads[b].zero_all();
      impute_sequence_backward(work.traces[b], work.caches[b], model.gru, empty, dxhat[b],
                               gh[b], work.sample_grads[b]);
    }
  }

  // deterministic reduction: batch order, independent of thread count
  if (model.has_gru())
    for (int b = 0; b < B; ++b) {
      GruParams<Real>& sg = work.sample_grads[b];
      auto add = [](Matrix<Real>& dst, const Matrix<Real>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
      };
      add(model.gru_g.w_xz, sg.w_xz); add(model.gru_g.w_hz, sg.w_hz); add(model.gru_g.b_z, sg.b_z);
      add(model.gru_g.w_xr, sg.w_xr); add(model.gru_g.w_hr, sg.w_hr); add(model.gru_g.b_r, sg.b_r);
      add(model.gru_g.w_xh, sg.w_xh); add(model.gru_g.w_hh, sg.w_hh); add(model.gru_g.b_h, sg.b_h);
      add(model.gru_g.w_imp, sg.w_imp); add(model.gru_g.b_imp, sg.b_imp);
    }

  if (!std::isfinite(stats.l_total))
    throw numeric_error("train_batch: non-finite loss");
  return stats;
}

// Eval-mode class predictions for a batch of samples.
template <class Real>
std::vector<int> predict(Model<Real>& model, const std::vector<LabeledSeries<Real>>& data,
                         const std::vector<int>& idx, BatchWork<Real>& work,
                         Matrix<Real>* features = nullptr) {
  const int B = static_cast<int>(idx.size());
  const int T = data[idx[0]].x.rows, n = data[idx[0]].x.cols, C = model.num_classes;
  detail::build_merged_input(model, data, idx, /*with_cache=*/false, work);
  Matrix<Real> logits;
  Matrix<Real> feat;
  if (model.has_msfl()) {
    MsflCache<Real> cache;  // eval mode: cache only used to read pooled features
    logits = msfl_forward(work.u.data(), B, T, model.msfl, nn::BnMode::eval,
                          features ? &cache : nullptr);
    if (features) feat = std::move(cache.pooled);
  } else {
    feat = Matrix<Real>(B, model.hidden_size);
    for (int b = 0; b < B; ++b)
      std::copy_n(work.traces[b].h[T - 1], model.hidden_size, feat[b]);
    logits = Matrix<Real>(B, C);
    nn::linear_forward(feat.data.data(), B, model.hidden_size, C, model.lin_w.data.data(),
                       model.lin_b.data.data(), logits.data.data());
  }
  if (features) *features = std::move(feat);
  std::vector<int> pred(B);
  for (int b = 0; b < B; ++b) {
    int arg = 0;
    for (int c = 1; c < C; ++c)
      if (logits[b][c] > logits[b][arg]) arg = c;
    pred[b] = arg;
  }
  return pred;
}

}  // namespace itsc
