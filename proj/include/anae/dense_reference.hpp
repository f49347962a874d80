#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "anae/graph.hpp"
#include "anae/model.hpp"

namespace anae::fixtures {

// Test oracle: the encoder/decoder pipeline with n x n matrices and plain
// loops. Attention builds the full masked logit matrix (−∞ off-graph) and
// row-softmaxes it; no CSR, no tape, no Eigen products.

struct DenseForward {
  Matrix z;
  Matrix reconstruction;
};

namespace detail {

inline Matrix dense_linear(const Matrix& h, const Matrix& w) {  // h wᵀ
  Matrix out(h.rows(), w.rows());
  for (Index i = 0; i < h.rows(); ++i)
    for (Index o = 0; o < w.rows(); ++o) {
      double s = 0;
      for (Index c = 0; c < h.cols(); ++c) s += h(i, c) * w(o, c);
      out(i, o) = s;
    }
  return out;
}

inline Matrix dense_coefficients(const Matrix& adj, const Matrix& wh, const Matrix& attn, int head, Index width,
                                 double slope, bool attention) {
  const Index n = adj.rows();
  Matrix alpha = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    std::vector<double> row(static_cast<std::size_t>(n), -std::numeric_limits<double>::infinity());
    double m = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (adj(i, j) == 0) continue;
      double e;
      if (attention) {
        e = 0;
        for (Index c = 0; c < width; ++c)
          e += attn(head, c) * wh(i, head * width + c) + attn(head, width + c) * wh(j, head * width + c);
        e = e >= 0 ? e : slope * e;
      } else {
        e = std::log(adj(i, j));  // softmax of log-weights = row normalization
      }
      row[static_cast<std::size_t>(j)] = e;
      m = std::max(m, e);
    }
    double zsum = 0;
    for (Index j = 0; j < n; ++j)
      if (adj(i, j) != 0) zsum += std::exp(row[static_cast<std::size_t>(j)] - m);
    for (Index j = 0; j < n; ++j)
      if (adj(i, j) != 0) alpha(i, j) = std::exp(row[static_cast<std::size_t>(j)] - m) / zsum;
  }
  return alpha;
}

inline Matrix dense_layer(const Matrix& adj, const Matrix& h, const LayerParams& layer, const ModelConfig& cfg) {
  const Matrix wh = dense_linear(h, layer.weight.value);
  const Index width = layer.head_width();
  const bool attention = cfg.aggregation == Aggregation::attention;
  Matrix out = Matrix::Zero(h.rows(), layer.combine == HeadCombine::concat ? width * layer.heads : width);
  for (int k = 0; k < layer.heads; ++k) {
    Matrix alpha = dense_coefficients(adj, wh, layer.attn.value, k, width, cfg.leaky_slope, attention);
    for (Index i = 0; i < h.rows(); ++i)
      for (Index c = 0; c < width; ++c) {
        double s = 0;
        for (Index j = 0; j < h.rows(); ++j) s += alpha(i, j) * wh(j, k * width + c);
        if (layer.combine == HeadCombine::concat)
          out(i, k * width + c) = s;
        else
          out(i, c) += s / layer.heads;
      }
  }
  if (layer.activation == Activation::elu)
    for (Index k = 0; k < out.size(); ++k) {
      double& v = out.data()[k];
      v = v > 0 ? v : std::expm1(v);
    }
  return out;
}

}  // namespace detail

/// Eval-mode (no dropout) Z and X′ for `model` on a self-looped graph.
inline DenseForward dense_reference_forward(const SparseGraph& g, const Matrix& x, AnaeModel& model) {
  const Matrix adj = to_dense(g);
  const ModelConfig& cfg = model.config();
  DenseForward out;
  Matrix h = x;
  for (std::size_t l = 0; l < model.num_encoder_layers(); ++l) h = detail::dense_layer(adj, h, model.encoder_layer(l), cfg);
  out.z = h;
  if (cfg.decoder == DecoderKind::structure) return out;
  for (std::size_t l = 0; l < model.num_decoder_layers(); ++l) {
    const LayerParams& layer = model.decoder_layer(l);
    if (cfg.decoder == DecoderKind::graph) {
      h = detail::dense_layer(adj, h, layer, cfg);
    } else {
      h = detail::dense_linear(h, layer.weight.value);
      if (layer.activation == Activation::elu)
        for (Index k = 0; k < h.size(); ++k) h.data()[k] = h.data()[k] > 0 ? h.data()[k] : std::expm1(h.data()[k]);
    }
  }
  out.reconstruction = h;
  return out;
}

}  // namespace anae::fixtures
