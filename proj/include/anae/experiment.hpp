#pragma once

#include <cmath>
#include <tuple>
#include <ostream>
#include <string>
#include <vector>

#include "anae/dataset.hpp"
#include "anae/logistic.hpp"
#include "anae/metrics.hpp"
#include "anae/model.hpp"
#include "anae/split.hpp"
#include "anae/train.hpp"

namespace anae {

struct LinkPredictionResult {
  double auc = 0;
  double ap = 0;
};

inline LinkPredictionResult evaluate_link_prediction(const Matrix& z, const EdgeSplit& split) {
  ScoredPairs s = link_scores(z, split.test_pos, split.test_neg);
  return {auc(s), average_precision(s)};
}

struct ClassificationResult {
  double fraction = 0;
  double micro_mean = 0;
  double micro_std = 0;
  double macro_mean = 0;
  double macro_std = 0;
  std::vector<F1Scores> runs;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

}  // namespace detail

/// Per repeat r: draw ⌊fraction·n⌋ training nodes uniformly with an RNG seeded
/// from (seed, r), fit logistic regression on their embeddings, score the rest.
/// Returns mean and sample standard deviation of Micro/Macro-F1.
inline ClassificationResult classification_experiment(const Matrix& z, const LabelVector& labels, double fraction,
                                                      int repeats, std::uint64_t seed, LogisticOptions opts = {}) {
  const auto n = static_cast<std::size_t>(z.rows());
  if (labels.labels.size() != n) throw DimensionError("classification: labels do not match embeddings");
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n)
    throw std::invalid_argument("classification: fraction must leave both training and evaluation nodes");
  if (repeats < 1) throw std::invalid_argument("classification: repeats must be >= 1");

  ClassificationResult out;
  out.fraction = fraction;
  std::vector<double> micro, macro;
  for (int r = 0; r < repeats; ++r) {
    Rng rng(mix_seed(seed, 5000 + static_cast<std::uint64_t>(r)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    Matrix z_train(static_cast<Index>(n_train), z.cols()), z_test(static_cast<Index>(n - n_train), z.cols());
    std::vector<int> y_train, y_test;
    for (std::size_t k = 0; k < n; ++k) {
      const auto row = z.row(static_cast<Index>(order[k]));
      if (k < n_train) {
        z_train.row(static_cast<Index>(k)) = row;
        y_train.push_back(labels.labels[order[k]]);
      } else {
        z_test.row(static_cast<Index>(k - n_train)) = row;
        y_test.push_back(labels.labels[order[k]]);
      }
    }
    ClassifierModel clf = fit_logistic(z_train, y_train, labels.num_classes, opts);
    F1Scores f = f1_scores(clf.predict(z_test), y_test, labels.num_classes);
    out.runs.push_back(f);
    micro.push_back(f.micro);
    macro.push_back(f.macro);
  }
  std::tie(out.micro_mean, out.micro_std) = detail::mean_std(micro);
  std::tie(out.macro_mean, out.macro_std) = detail::mean_std(macro);
  return out;
}

struct MetricRow {
  std::string dataset;
  std::string task;
  std::string metric;
  double value = 0;
  double stddev = 0;
  std::uint64_t seed = 0;
};

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "dataset,task,metric,value,stddev,seed\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.dataset << ',' << r.task << ',' << r.metric << ',' << r.value << ',' << r.stddev << ',' << r.seed << '\n';
}

struct SweepRow {
  int dim = 0;
  int hidden = 0;
  double fraction = 0;
  double micro = 0;
  double macro = 0;
};

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "dim,hidden,fraction,micro_f1,macro_f1\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.dim << ',' << r.hidden << ',' << r.fraction << ',' << r.micro << ',' << r.macro << '\n';
}

/// Trains one model per embedding width (first hidden layer twice as wide) on
/// the full graph and scores node classification at `fraction` labels.
inline std::vector<SweepRow> dimension_sweep(const SparseGraph& g, const Matrix& x, const LabelVector& labels,
                                             const ModelConfig& base, const std::vector<int>& dims = {8, 16, 32, 64, 128, 256},
                                             double fraction = 0.5, int repeats = 10) {
  if (base.encoder_dims.size() != 2) throw std::invalid_argument("dimension_sweep expects a two-layer encoder");
  std::vector<SweepRow> rows;
  for (int dim : dims) {
    ModelConfig cfg = base;
    cfg.encoder_dims = {2 * dim, dim};
    AnaeModel model(cfg, x.cols());
    TrainResult tr = fit(model, g, x);
    ClassificationResult cr = classification_experiment(tr.embedding, labels, fraction, repeats, cfg.seed);
    rows.push_back({dim, 2 * dim, fraction, cr.micro_mean, cr.macro_mean});
  }
  return rows;
}

}  // namespace anae
