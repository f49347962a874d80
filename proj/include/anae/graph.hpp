#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "anae/error.hpp"

namespace anae {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Undirected edge stored with first < second.
using Edge = std::pair<std::size_t, std::size_t>;

inline Edge canonical(std::size_t a, std::size_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }

/// Symmetric adjacency in CSR form. Column indices are strictly increasing per row.
struct SparseGraph {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  std::vector<double> edge_weights;

  std::size_t nnz() const { return col_indices.size(); }
  std::size_t degree(std::size_t i) const { return row_offsets[i + 1] - row_offsets[i]; }

  bool has_edge(std::size_t i, std::size_t j) const {
    auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    return std::binary_search(first, last, j);
  }

  std::size_t max_degree() const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < num_nodes; ++i) best = std::max(best, degree(i));
    return best;
  }

  bool has_self_loops() const {
    for (std::size_t i = 0; i < num_nodes; ++i)
      if (!has_edge(i, i)) return false;
    return true;
  }

  // Each undirected non-loop edge once, (i < j), in row-major order.
  std::vector<Edge> undirected_edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < num_nodes; ++i)
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        if (col_indices[k] > i) out.emplace_back(i, col_indices[k]);
    return out;
  }
};

/// Dense node-by-feature matrix; row i is node i's attribute vector.
struct AttributeMatrix {
  Matrix values;

  Index num_nodes() const { return values.rows(); }
  Index num_features() const { return values.cols(); }
};

struct LabelVector {
  std::vector<int> labels;
  int num_classes = 0;
};

// Builds a symmetric CSR graph from undirected edges. Duplicates collapse to one
// entry with weight 1; self pairs are dropped.
inline SparseGraph graph_from_edges(std::size_t num_nodes, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::size_t>> adj(num_nodes);
  for (auto [a, b] : edges) {
    if (a >= num_nodes || b >= num_nodes) throw DimensionError("edge endpoint out of range");
    if (a == b) continue;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  SparseGraph g;
  g.num_nodes = num_nodes;
  g.row_offsets.assign(num_nodes + 1, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    auto& row = adj[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.row_offsets[i + 1] = g.row_offsets[i] + row.size();
    g.col_indices.insert(g.col_indices.end(), row.begin(), row.end());
  }
  g.edge_weights.assign(g.col_indices.size(), 1.0);
  return g;
}

/// Inserts (i, i) with `weight` into every row that lacks it. Idempotent.
inline SparseGraph add_self_loops(const SparseGraph& g, double weight = 1.0) {
  SparseGraph out;
  out.num_nodes = g.num_nodes;
  out.row_offsets.assign(g.num_nodes + 1, 0);
  out.col_indices.reserve(g.nnz() + g.num_nodes);
  out.edge_weights.reserve(g.nnz() + g.num_nodes);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    bool placed = false;
    for (std::size_t k = g.row_offsets[i]; k < g.row_offsets[i + 1]; ++k) {
      std::size_t j = g.col_indices[k];
      if (!placed && j >= i) {
        if (j != i) {
          out.col_indices.push_back(i);
          out.edge_weights.push_back(weight);
        }
        placed = true;
      }
      out.col_indices.push_back(j);
      out.edge_weights.push_back(g.edge_weights[k]);
    }
    if (!placed) {
      out.col_indices.push_back(i);
      out.edge_weights.push_back(weight);
    }
    out.row_offsets[i + 1] = out.col_indices.size();
  }
  return out;
}

inline Matrix to_dense(const SparseGraph& g) {
  Matrix a = Matrix::Zero(static_cast<Index>(g.num_nodes), static_cast<Index>(g.num_nodes));
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    for (std::size_t k = g.row_offsets[i]; k < g.row_offsets[i + 1]; ++k)
      a(static_cast<Index>(i), static_cast<Index>(g.col_indices[k])) = g.edge_weights[k];
  return a;
}

// Checks the CSR structural invariants; returns false on the first violation.
inline bool is_valid_symmetric(const SparseGraph& g) {
  if (g.row_offsets.size() != g.num_nodes + 1 || g.row_offsets.back() != g.col_indices.size() ||
      g.edge_weights.size() != g.col_indices.size())
    return false;
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    if (g.row_offsets[i] > g.row_offsets[i + 1]) return false;
    for (std::size_t k = g.row_offsets[i]; k < g.row_offsets[i + 1]; ++k) {
      std::size_t j = g.col_indices[k];
      if (j >= g.num_nodes) return false;
      if (k > g.row_offsets[i] && g.col_indices[k - 1] >= j) return false;
      auto first = g.col_indices.begin() + static_cast<std::ptrdiff_t>(g.row_offsets[j]);
      auto last = g.col_indices.begin() + static_cast<std::ptrdiff_t>(g.row_offsets[j + 1]);
      auto it = std::lower_bound(first, last, i);
      if (it == last || *it != i) return false;
      if (g.edge_weights[static_cast<std::size_t>(it - g.col_indices.begin())] != g.edge_weights[k])
        return false;
    }
  }
  return true;
}

// Relabels nodes: node i of `g` becomes node perm[i].
inline SparseGraph permute(const SparseGraph& g, const std::vector<std::size_t>& perm) {
  std::vector<Edge> edges;
  for (auto [a, b] : g.undirected_edges()) edges.emplace_back(perm[a], perm[b]);
  SparseGraph out = graph_from_edges(g.num_nodes, edges);
  return g.has_self_loops() ? add_self_loops(out) : out;
}

// Scales each nonzero row to unit L1 norm.
inline void row_normalize(AttributeMatrix& x) {
  for (Index i = 0; i < x.values.rows(); ++i) {
    double s = x.values.row(i).cwiseAbs().sum();
    if (s > 0) x.values.row(i) /= s;
  }
}

}  // namespace anae
