#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "anae/graph.hpp"

namespace anae {

struct ScoredPairs {
  std::vector<Edge> pairs;
  std::vector<double> scores;
  std::vector<int> labels;  // 1 positive, 0 negative
};

/// Inner-product scores for positives followed by negatives.
inline ScoredPairs link_scores(const Matrix& z, const std::vector<Edge>& positives,
                               const std::vector<Edge>& negatives) {
  ScoredPairs s;
  auto push = [&](const std::vector<Edge>& v, int label) {
    for (auto [a, b] : v) {
      s.pairs.emplace_back(a, b);
      s.scores.push_back(z.row(static_cast<Index>(a)).dot(z.row(static_cast<Index>(b))));
      s.labels.push_back(label);
    }
  };
  push(positives, 1);
  push(negatives, 0);
  return s;
}

/// P(score of random positive > score of random negative), ties counting ½,
/// from the Mann-Whitney rank sum with average ranks for ties.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0;
  std::size_t num_pos = 0;
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo;
    while (hi < order.size() && scores[order[hi]] == scores[order[lo]]) ++hi;
    const double avg_rank = 0.5 * static_cast<double>(lo + 1 + hi);  // mean of ranks lo+1..hi
    for (std::size_t k = lo; k < hi; ++k)
      if (labels[order[k]] == 1) {
        pos_rank_sum += avg_rank;
        ++num_pos;
      }
    lo = hi;
  }
  const std::size_t num_neg = scores.size() - num_pos;
  if (num_pos == 0 || num_neg == 0) throw std::invalid_argument("auc: need both positive and negative pairs");
  const double p = static_cast<double>(num_pos);
  return (pos_rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(num_neg));
}

inline double auc(const ScoredPairs& s) { return auc(s.scores, s.labels); }

/// Non-interpolated AP: Σ_k (R_k − R_{k−1}) P_k over the list sorted by
/// descending score, ties kept in input order.
inline double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("average_precision: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto total_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (total_pos == 0) throw std::invalid_argument("average_precision: no positive pairs");
  double ap = 0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] != 1) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return ap / static_cast<double>(total_pos);
}

inline double average_precision(const ScoredPairs& s) { return average_precision(s.scores, s.labels); }

struct F1Scores {
  double micro = 0;
  double macro = 0;
};

/// Micro-F1 from global counts (= accuracy for single-label data); Macro-F1 as
/// the plain mean of per-class F1, where a class with no true or predicted
/// members scores 0.
inline F1Scores f1_scores(const std::vector<int>& pred, const std::vector<int>& truth, int num_classes) {
  if (pred.size() != truth.size() || pred.empty()) throw std::invalid_argument("f1_scores: bad sizes");
  std::vector<double> tp(static_cast<std::size_t>(num_classes)), fp(tp.size()), fn(tp.size());
  double correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = static_cast<std::size_t>(pred[i]), t = static_cast<std::size_t>(truth[i]);
    if (p >= tp.size() || t >= tp.size()) throw std::invalid_argument("f1_scores: label out of range");
    if (p == t) {
      tp[p] += 1;
      correct += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  F1Scores out;
  double sum_tp = 0, sum_fp = 0, sum_fn = 0, macro = 0;
  for (std::size_t c = 0; c < tp.size(); ++c) {
    sum_tp += tp[c];
    sum_fp += fp[c];
    sum_fn += fn[c];
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    macro += denom > 0 ? 2 * tp[c] / denom : 0.0;
  }
  out.micro = 2 * sum_tp / (2 * sum_tp + sum_fp + sum_fn);
  out.macro = macro / num_classes;
  return out;
}

}  // namespace anae
