#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "anae/graph.hpp"
#include "anae/tape.hpp"

namespace anae {

/// Bipartite message-passing structure for one layer: `num_dst` target rows,
/// each with a CSR slice of source columns in [0, num_src). Destination node r
/// is also source node r (targets form a prefix of the sources), which lets
/// attention read the target's own transformed features.
struct Block {
  std::size_t num_dst = 0;
  std::size_t num_src = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  std::vector<double> weights;

  std::size_t nnz() const { return col_indices.size(); }
};

inline Block full_block(const SparseGraph& g) {
  return Block{g.num_nodes, g.num_nodes, g.row_offsets, g.col_indices, g.edge_weights};
}

/// Softmax within each [offsets[s], offsets[s+1]) slice, after subtracting the
/// slice maximum. Throws on an empty slice.
inline std::vector<double> segment_softmax(std::span<const double> logits,
                                           std::span<const std::size_t> offsets) {
  std::vector<double> out(logits.size());
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (lo >= hi) throw std::invalid_argument("segment_softmax: empty segment " + std::to_string(s));
    double m = logits[lo];
    for (std::size_t k = lo + 1; k < hi; ++k) m = std::max(m, logits[k]);
    double z = 0;
    for (std::size_t k = lo; k < hi; ++k) {
      out[k] = std::exp(logits[k] - m);
      z += out[k];
    }
    for (std::size_t k = lo; k < hi; ++k) out[k] /= z;
  }
  return out;
}

/// Column-wise segment softmax of an nnz x K edge tensor (one column per head).
inline Var segment_softmax(Var logits, const std::vector<std::size_t>& offsets) {
  if (static_cast<std::size_t>(logits.rows()) != offsets.back())
    throw DimensionError("segment_softmax: logits do not match segment offsets");
  Tape& t = logits.tape();
  std::size_t il = logits.id();
  const Matrix& x = logits.value();
  Matrix y(x.rows(), x.cols());
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (Index h = 0; h < x.cols(); ++h) {
    for (Index e = 0; e < x.rows(); ++e) col[static_cast<std::size_t>(e)] = x(e, h);
    auto sm = segment_softmax(col, offsets);
    for (Index e = 0; e < x.rows(); ++e) y(e, h) = sm[static_cast<std::size_t>(e)];
  }
  return t.record(std::move(y), {logits}, [il, offsets](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix gx(g.rows(), g.cols());
    for (Index h = 0; h < g.cols(); ++h) {
      for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        double dot = 0;
        for (std::size_t k = offsets[s]; k < offsets[s + 1]; ++k)
          dot += y(static_cast<Index>(k), h) * g(static_cast<Index>(k), h);
        for (std::size_t k = offsets[s]; k < offsets[s + 1]; ++k) {
          const auto e = static_cast<Index>(k);
          gx(e, h) = y(e, h) * (g(e, h) - dot);
        }
      }
    }
    t.accumulate(il, gx);
  });
}

/// Per-node, per-head score s[i,k] = a_k[offset : offset+f] · (Wh_i)_k, where
/// `attn` is K x 2f and `wh` holds K column blocks of width f. offset is 0 for
/// the target half of the attention vector and f for the neighbor half.
inline Var head_scores(Var wh, Var attn, int heads, bool neighbor_half) {
  const Index f = attn.cols() / 2;
  if (attn.rows() != heads || attn.cols() != 2 * f || wh.cols() != heads * f)
    throw DimensionError("head_scores: attention vector does not match head layout");
  Tape& t = wh.tape();
  std::size_t iw = wh.id(), ia = attn.id();
  const Index off = neighbor_half ? f : 0;
  Matrix s(wh.rows(), heads);
  for (int k = 0; k < heads; ++k)
    s.col(k) = wh.value().middleCols(k * f, f) * attn.value().row(k).segment(off, f).transpose();
  return t.record(std::move(s), {wh, attn}, [iw, ia, heads, f, off](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(iw)) {
      Matrix gw(g.rows(), heads * f);
      for (int k = 0; k < heads; ++k)
        gw.middleCols(k * f, f) = g.col(k) * t.value(ia).row(k).segment(off, f);
      t.accumulate(iw, gw);
    }
    if (t.needs_grad(ia)) {
      Matrix ga = Matrix::Zero(heads, 2 * f);
      for (int k = 0; k < heads; ++k)
        ga.row(k).segment(off, f) = g.col(k).transpose() * t.value(iw).middleCols(k * f, f);
      t.accumulate(ia, ga);
    }
  });
}

/// Edge logits e[(i,j),k] = dst[i,k] + src[j,k] laid out along the block's CSR.
inline Var edge_logits(Var dst_scores, Var src_scores, const Block& blk) {
  if (static_cast<std::size_t>(dst_scores.rows()) != blk.num_dst ||
      static_cast<std::size_t>(src_scores.rows()) != blk.num_src || dst_scores.cols() != src_scores.cols())
    throw DimensionError("edge_logits: score shapes do not match block");
  Tape& t = dst_scores.tape();
  std::size_t id = dst_scores.id(), is = src_scores.id();
  const Index heads = dst_scores.cols();
  Matrix e(static_cast<Index>(blk.nnz()), heads);
  for (std::size_t i = 0; i < blk.num_dst; ++i)
    for (std::size_t k = blk.row_offsets[i]; k < blk.row_offsets[i + 1]; ++k)
      e.row(static_cast<Index>(k)) = dst_scores.value().row(static_cast<Index>(i)) +
                                     src_scores.value().row(static_cast<Index>(blk.col_indices[k]));
  // Backward keeps its own copy of the block structure.
  return t.record(std::move(e), {dst_scores, src_scores},
                  [id, is, offsets = blk.row_offsets, cols = blk.col_indices, heads,
                   nd = blk.num_dst, ns = blk.num_src](Tape& t, std::size_t self) {
                    const Matrix& g = t.grad(self);
                    Matrix gd = Matrix::Zero(static_cast<Index>(nd), heads);
                    Matrix gs = Matrix::Zero(static_cast<Index>(ns), heads);
                    for (std::size_t i = 0; i < nd; ++i)
                      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
                        gd.row(static_cast<Index>(i)) += g.row(static_cast<Index>(k));
                        gs.row(static_cast<Index>(cols[k])) += g.row(static_cast<Index>(k));
                      }
                    t.accumulate(id, gd);
                    t.accumulate(is, gs);
                  });
}

/// out[i, head k block] = Σ_{(i,j) in blk} α[(i,j),k] · wh[j, head k block].
/// `coeffs` is nnz x K; `wh` is num_src x (K f).
inline Var aggregate(Var coeffs, Var wh, const Block& blk) {
  const Index heads = coeffs.cols();
  if (static_cast<std::size_t>(coeffs.rows()) != blk.nnz() ||
      static_cast<std::size_t>(wh.rows()) != blk.num_src || wh.cols() % heads != 0)
    throw DimensionError("aggregate: coefficient/feature shapes do not match block");
  Tape& t = coeffs.tape();
  std::size_t ic = coeffs.id(), iw = wh.id();
  const Index f = wh.cols() / heads;
  const Matrix& a = coeffs.value();
  const Matrix& x = wh.value();
  Matrix out = Matrix::Zero(static_cast<Index>(blk.num_dst), wh.cols());
  for (std::size_t i = 0; i < blk.num_dst; ++i) {
    const auto r = static_cast<Index>(i);
    for (std::size_t k = blk.row_offsets[i]; k < blk.row_offsets[i + 1]; ++k) {
      const auto e = static_cast<Index>(k);
      const auto j = static_cast<Index>(blk.col_indices[k]);
      for (Index h = 0; h < heads; ++h) out.row(r).segment(h * f, f) += a(e, h) * x.row(j).segment(h * f, f);
    }
  }
  return t.record(std::move(out), {coeffs, wh},
                  [ic, iw, heads, f, offsets = blk.row_offsets, cols = blk.col_indices,
                   nd = blk.num_dst](Tape& t, std::size_t self) {
                    const Matrix& g = t.grad(self);
                    const Matrix& a = t.value(ic);
                    const Matrix& x = t.value(iw);
                    const bool want_a = t.needs_grad(ic), want_x = t.needs_grad(iw);
                    Matrix ga = want_a ? Matrix::Zero(a.rows(), a.cols()) : Matrix();
                    Matrix gx = want_x ? Matrix::Zero(x.rows(), x.cols()) : Matrix();
                    for (std::size_t i = 0; i < nd; ++i) {
                      const auto r = static_cast<Index>(i);
                      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
                        const auto e = static_cast<Index>(k);
                        const auto j = static_cast<Index>(cols[k]);
                        for (Index h = 0; h < heads; ++h) {
                          if (want_a) ga(e, h) = g.row(r).segment(h * f, f).dot(x.row(j).segment(h * f, f));
                          if (want_x) gx.row(j).segment(h * f, f) += a(e, h) * g.row(r).segment(h * f, f);
                        }
                      }
                    }
                    if (want_a) t.accumulate(ic, ga);
                    if (want_x) t.accumulate(iw, gx);
                  });
}

/// Row-normalized edge weights α_ij = w_ij / Σ_k w_ik, replicated across
/// `heads` columns. Parameter-free.
inline Matrix gcn_coefficients(const Block& blk, int heads = 1) {
  Matrix a(static_cast<Index>(blk.nnz()), heads);
  for (std::size_t i = 0; i < blk.num_dst; ++i) {
    double s = 0;
    for (std::size_t k = blk.row_offsets[i]; k < blk.row_offsets[i + 1]; ++k) s += blk.weights[k];
    if (blk.row_offsets[i] == blk.row_offsets[i + 1] || s == 0)
      throw std::invalid_argument("gcn_coefficients: node " + std::to_string(i) + " has no weighted neighbors");
    for (std::size_t k = blk.row_offsets[i]; k < blk.row_offsets[i + 1]; ++k)
      a.row(static_cast<Index>(k)).setConstant(blk.weights[k] / s);
  }
  return a;
}

}  // namespace anae
