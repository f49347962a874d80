#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "anae/graph.hpp"
#include "anae/graph_ops.hpp"
#include "anae/rng.hpp"

namespace anae {

/// Computation graph for one minibatch. `node_sets[l]` lists (global ids) the
/// sources of `blocks[l]`; `node_sets[L]` is the batch itself. Every set starts
/// with the destination set of the block it feeds.
struct SampledBatch {
  std::vector<std::vector<std::size_t>> node_sets;
  std::vector<Block> blocks;

  const std::vector<std::size_t>& input_nodes() const { return node_sets.front(); }
  const std::vector<std::size_t>& batch() const { return node_sets.back(); }
};

/// Samples up to `fanout` neighbors per destination per layer (the self-loop is
/// always kept, in addition), working backwards from the batch for
/// `num_layers` layers. Kept neighbors stay in CSR order, so with a fanout at
/// least the max degree each row matches the full-graph row exactly.
inline SampledBatch sample_blocks(const SparseGraph& g, std::span<const std::size_t> batch, int num_layers,
                                  int fanout, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("sample_blocks: empty batch");
  if (fanout < 1) throw std::invalid_argument("sample_blocks: fanout must be >= 1");
  SampledBatch out;
  out.node_sets.resize(static_cast<std::size_t>(num_layers) + 1);
  out.blocks.resize(static_cast<std::size_t>(num_layers));
  out.node_sets.back().assign(batch.begin(), batch.end());

  std::vector<std::size_t> others;
  std::vector<std::size_t> kept;
  for (int l = num_layers - 1; l >= 0; --l) {
    const auto& dst = out.node_sets[static_cast<std::size_t>(l) + 1];
    std::vector<std::size_t> src = dst;
    std::unordered_map<std::size_t, std::size_t> local;
    for (std::size_t k = 0; k < dst.size(); ++k) local.emplace(dst[k], k);
    if (local.size() != dst.size()) throw std::invalid_argument("sample_blocks: duplicate batch node");

    Block blk;
    blk.num_dst = dst.size();
    blk.row_offsets.assign(1, 0);
    for (std::size_t v : dst) {
      others.clear();
      bool self_loop = false;
      for (std::size_t k = g.row_offsets[v]; k < g.row_offsets[v + 1]; ++k) {
        if (g.col_indices[k] == v)
          self_loop = true;
        else
          others.push_back(k);
      }
      if (others.size() > static_cast<std::size_t>(fanout)) {
        for (std::size_t k = 0; k < static_cast<std::size_t>(fanout); ++k) {
          std::size_t pick = k + static_cast<std::size_t>(rng.index(others.size() - k));
          std::swap(others[k], others[pick]);
        }
        others.resize(static_cast<std::size_t>(fanout));
      }
      kept = others;
      if (self_loop) {
        for (std::size_t k = g.row_offsets[v]; k < g.row_offsets[v + 1]; ++k)
          if (g.col_indices[k] == v) kept.push_back(k);
      }
      std::sort(kept.begin(), kept.end());
      for (std::size_t k : kept) {
        const std::size_t u = g.col_indices[k];
        auto [it, inserted] = local.emplace(u, src.size());
        if (inserted) src.push_back(u);
        blk.col_indices.push_back(it->second);
        blk.weights.push_back(g.edge_weights[k]);
      }
      blk.row_offsets.push_back(blk.col_indices.size());
    }
    blk.num_src = src.size();
    out.blocks[static_cast<std::size_t>(l)] = std::move(blk);
    out.node_sets[static_cast<std::size_t>(l)] = std::move(src);
  }
  return out;
}

}  // namespace anae
