#pragma once

// Joint training: masked imputation loss + softmax cross-entropy, combined as
// alpha * l_cls + beta * l_imp, optimized with Adam over the epoch/batch loop.

#include <chrono>
#include <functional>
#include <iostream>

#include "data.hpp"
#include "model.hpp"
#include "nn/adam.hpp"

namespace itsc {

struct LossWeights {
  double alpha = 1.0;  // classification
  double beta = 1.0;   // imputation

  void validate() const {
    require(alpha >= 0 && beta >= 0, "loss weights must be non-negative");
    require(alpha > 0 || beta > 0, "loss weights must not both be zero");
  }
};

struct LossReport {
  double l_imp = 0, l_cls = 0, l_total = 0;
  int batch_size = 0;
};

inline double total_loss(double l_cls, double l_imp, const LossWeights& w) {
  w.validate();
  return w.alpha * l_cls + w.beta * l_imp;
}

// Mean over samples of the squared estimate error at observed positions of
// steps 2..T. xhat rows align with x rows; row 0 is ignored by construction.
template <class Real>
double imputation_loss(const std::vector<Matrix<Real>>& x, const std::vector<Matrix<Real>>& xhat,
                       const std::vector<Matrix<Real>>& mask) {
  require(x.size() == xhat.size() && x.size() == mask.size(),
          "imputation_loss: batch size mismatch");
  require(!x.empty(), "imputation_loss: empty batch");
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i].same_shape(mask[i]) && x[i].same_shape(xhat[i]),
            "imputation_loss: sample shape mismatch");
    for (int t = 1; t < x[i].rows; ++t)
      for (int j = 0; j < x[i].cols; ++j)
        if (mask[i][t][j] == Real(1)) {
          const double d = static_cast<double>(x[i][t][j]) - static_cast<double>(xhat[i][t][j]);
          acc += d * d;
        }
  }
  return acc / static_cast<double>(x.size());
}

// -(1/Q) sum log p[label]; probabilities of ~0 at the true label are clamped
// at 1e-12 (reported through the optional flag).
template <class Real>
double classification_loss(const std::vector<int>& labels, const Matrix<Real>& probabilities,
                           bool* clamped = nullptr) {
  require(static_cast<int>(labels.size()) == probabilities.rows,
          "classification_loss: batch size mismatch");
  require(probabilities.rows >= 1, "classification_loss: empty batch");
  if (clamped) *clamped = false;
  double acc = 0;
  for (int b = 0; b < probabilities.rows; ++b) {
    const int y = labels[b];
    require(y >= 0 && y < probabilities.cols, "classification_loss: label out of range");
    double p = static_cast<double>(probabilities[b][y]);
    if (p < 1e-12) {
      p = 1e-12;
      if (clamped) *clamped = true;
    }
    acc -= std::log(p);
  }
  return acc / probabilities.rows;
}

struct MetricsReport {
  double accuracy = 0;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  int num_classes = 0;
  long long num_samples = 0;
  std::vector<long long> confusion;  // [true][pred], row-major C x C

  long long confusion_at(int t, int p) const { return confusion[t * num_classes + p]; }
};

// Metrics from (true, predicted) pairs; zero-division (empty predicted or
// true class) counts as 0 for that class, per the macro-averaging convention.
inline MetricsReport compute_metrics(const std::vector<int>& truth, const std::vector<int>& pred,
                                     int num_classes) {
  require(truth.size() == pred.size(), "metrics: label/prediction count mismatch");
  require(!truth.empty(), "metrics: empty evaluation set");
  MetricsReport r;
  r.num_classes = num_classes;
  r.num_samples = static_cast<long long>(truth.size());
  r.confusion.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  long long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] >= 0 && truth[i] < num_classes && pred[i] >= 0 && pred[i] < num_classes,
            "metrics: class index out of range");
    r.confusion[static_cast<std::size_t>(truth[i]) * num_classes + pred[i]] += 1;
    if (truth[i] == pred[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  double psum = 0, rsum = 0, fsum = 0;
  for (int c = 0; c < num_classes; ++c) {
    long long tp = r.confusion_at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < num_classes; ++o)
      if (o != c) {
        fp += r.confusion_at(o, c);
        fn += r.confusion_at(c, o);
      }
    const double prec = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double rec = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f1 = (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    psum += prec;
    rsum += rec;
    fsum += f1;
  }
  r.macro_precision = psum / num_classes;
  r.macro_recall = rsum / num_classes;
  r.macro_f1 = fsum / num_classes;
  return r;
}

struct TrainSettings {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 3e-4;
  LossWeights weights;
  std::uint64_t seed = 0;

  void validate() const {
    require(epochs >= 1, "train: epochs must be >= 1");
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(learning_rate > 0, "train: learning rate must be positive");
    weights.validate();
  }
};

struct EpochStats {
  int epoch = 0;
  double l_imp = 0, l_cls = 0, l_total = 0;
  double train_acc = 0;
  double seconds = 0;
};

template <class Real>
std::vector<LabeledSeries<Real>> to_series(const DatasetBundle& bundle) {
  std::vector<LabeledSeries<Real>> out(bundle.samples.size());
  for (std::size_t i = 0; i < bundle.samples.size(); ++i) {
    const TimeSeriesSample& s = bundle.samples[i];
    LabeledSeries<Real>& d = out[i];
    d.x = Matrix<Real>(s.values.rows, s.values.cols);
    d.mask = Matrix<Real>(s.mask.rows, s.mask.cols);
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      d.x.data[k] = static_cast<Real>(s.values.data[k]);
      d.mask.data[k] = static_cast<Real>(s.mask.data[k]);
    }
    d.label = s.label;
    d.id = s.id;
  }
  return out;
}

// Full training loop. Shuffling, init and every other random draw derive from
// settings.seed; identical inputs give identical loss histories. on_epoch (if
// set) fires after every epoch, so callers can stream the history to disk and
// keep it when a later epoch aborts.
template <class Real>
std::vector<EpochStats> train(Model<Real>& model, const std::vector<LabeledSeries<Real>>& data,
                              const TrainSettings& settings, std::ostream* log = nullptr,
                              const std::function<void(const EpochStats&)>& on_epoch = {}) {
  settings.validate();
  require(!data.empty(), "train: empty dataset");

  auto refs = model.params();
  std::vector<nn::AdamState> opt;
  opt.reserve(refs.size());
  for (auto& p : refs) opt.emplace_back(p.value->size(), settings.learning_rate);

  BatchWork<Real> work;
  std::vector<EpochStats> history;
  history.reserve(settings.epochs);
  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches =
        batch_iter(static_cast<int>(data.size()), settings.batch_size, settings.seed, epoch);
    EpochStats es;
    es.epoch = epoch;
    long long correct = 0, seen = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      model.zero_grads();
      BatchStats<Real> st;
      try {
        st = train_batch(model, data, batches[bi], settings.weights.alpha,
                         settings.weights.beta, work);
      } catch (const numeric_error& e) {
        throw numeric_error("epoch " + std::to_string(epoch) + " batch " + std::to_string(bi) +
                            ": " + e.what());
      }
      for (std::size_t i = 0; i < refs.size(); ++i)
        nn::adam_step(refs[i].value->data.data(), refs[i].grad->data.data(),
                      refs[i].value->size(), opt[i]);
      es.l_imp += st.l_imp * st.batch;
      es.l_cls += st.l_cls * st.batch;
      es.l_total += st.l_total * st.batch;
      correct += st.correct;
      seen += st.batch;
    }
    es.l_imp /= static_cast<double>(seen);
    es.l_cls /= static_cast<double>(seen);
    es.l_total /= static_cast<double>(seen);
    es.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(es);
    if (on_epoch) on_epoch(es);
    if (log)
      (*log) << "epoch " << epoch << "  l_imp " << es.l_imp << "  l_cls " << es.l_cls
             << "  l_total " << es.l_total << "  train_acc " << es.train_acc << "\n";
  }
  return history;
}

// Eval-mode metrics over a dataset.
template <class Real>
MetricsReport evaluate(Model<Real>& model, const std::vector<LabeledSeries<Real>>& data,
                       int eval_batch = 64) {
  require(!data.empty(), "evaluate: empty dataset");
  BatchWork<Real> work;
  std::vector<int> truth, pred;
  truth.reserve(data.size());
  pred.reserve(data.size());
  std::vector<int> idx;
  for (std::size_t start = 0; start < data.size(); start += eval_batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + eval_batch); ++i)
      idx.push_back(static_cast<int>(i));
    const auto p = predict(model, data, idx, work);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      truth.push_back(data[idx[k]].label);
      pred.push_back(p[k]);
    }
  }
  return compute_metrics(truth, pred, model.num_classes);
}

}  // namespace itsc
