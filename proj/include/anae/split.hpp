#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anae/error.hpp"
#include "anae/graph.hpp"
#include "anae/rng.hpp"

namespace anae {

/// Held-out edge protocol for link prediction. Positives partition the
/// original undirected edge set; negatives are node pairs absent from it.
struct EdgeSplit {
  std::vector<Edge> train_pos;
  std::vector<Edge> val_pos;
  std::vector<Edge> test_pos;
  std::vector<Edge> val_neg;
  std::vector<Edge> test_neg;
  std::uint64_t seed = 0;
};

struct SplitRatios {
  double train = 0.85;
  double val = 0.05;
  double test = 0.10;
};

inline constexpr std::size_t kMinSplitEdges = 20;

/// Samples `count` distinct unordered non-adjacent pairs (no self pairs), also
/// avoiding everything in `exclude`. Rejection sampling while the pool is
/// sparse, enumeration when it is nearly exhausted.
inline std::vector<Edge> sample_negative_edges(const SparseGraph& g, std::size_t count,
                                               std::uint64_t rng_seed,
                                               const std::set<Edge>& exclude = {}) {
  const std::size_t n = g.num_nodes;
  const std::size_t all_pairs = n < 2 ? 0 : n * (n - 1) / 2;
  const std::size_t present = g.undirected_edges().size();
  std::size_t excluded_free = 0;
  for (const auto& e : exclude)
    if (e.first != e.second && !g.has_edge(e.first, e.second)) ++excluded_free;
  const std::size_t available = all_pairs - present - excluded_free;
  if (count > available)
    throw std::invalid_argument("cannot sample " + std::to_string(count) +
                                " negative pairs; only " + std::to_string(available) + " exist");
  std::vector<Edge> out;
  if (count == 0) return out;
  Rng rng(rng_seed);

  if (count * 2 > available) {
    std::vector<Edge> pool;
    pool.reserve(available);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (!g.has_edge(i, j) && !exclude.count({i, j})) pool.emplace_back(i, j);
    for (std::size_t k = 0; k < count; ++k) {
      std::size_t pick = k + static_cast<std::size_t>(rng.index(pool.size() - k));
      std::swap(pool[k], pool[pick]);
    }
    pool.resize(count);
    return pool;
  }

  std::set<Edge> chosen;
  while (out.size() < count) {
    std::size_t a = static_cast<std::size_t>(rng.index(n));
    std::size_t b = static_cast<std::size_t>(rng.index(n));
    if (a == b) continue;
    Edge e = canonical(a, b);
    if (g.has_edge(e.first, e.second) || exclude.count(e) || !chosen.insert(e).second) continue;
    out.push_back(e);
  }
  return out;
}

/// Shuffles undirected edges with `seed`, then takes round(test*E) test,
/// round(val*E) validation, and the remainder for training. Negatives match
/// the positive counts for both validation and test, disjoint from each other.
inline EdgeSplit split_edges(const SparseGraph& g, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  std::vector<Edge> edges = g.undirected_edges();
  const bool held_out = ratios.val > 0 || ratios.test > 0;
  if (held_out && edges.size() < kMinSplitEdges)
    throw std::invalid_argument("graph has " + std::to_string(edges.size()) +
                                " undirected edges; at least " + std::to_string(kMinSplitEdges) +
                                " are needed to split");
  Rng rng(mix_seed(seed, 0));
  rng.shuffle(edges);
  const auto e = static_cast<double>(edges.size());
  const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * e));
  const auto n_val = static_cast<std::size_t>(std::llround(ratios.val * e));

  EdgeSplit split;
  split.seed = seed;
  split.test_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.val_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test),
                       edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  split.train_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), edges.end());

  split.test_neg = sample_negative_edges(g, n_test, mix_seed(seed, 1));
  std::set<Edge> taken(split.test_neg.begin(), split.test_neg.end());
  split.val_neg = sample_negative_edges(g, n_val, mix_seed(seed, 2), taken);
  return split;
}

/// Symmetric self-looped graph over the training positives only.
inline SparseGraph build_train_graph(const EdgeSplit& split, std::size_t num_nodes) {
  return add_self_loops(graph_from_edges(num_nodes, split.train_pos));
}

inline nlohmann::json split_to_json(const EdgeSplit& s) {
  auto pairs = [](const std::vector<Edge>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (auto [a, b] : v) arr.push_back({a, b});
    return arr;
  };
  return {{"seed", s.seed},         {"train_pos", pairs(s.train_pos)}, {"val_pos", pairs(s.val_pos)},
          {"test_pos", pairs(s.test_pos)}, {"val_neg", pairs(s.val_neg)},     {"test_neg", pairs(s.test_neg)}};
}

inline EdgeSplit split_from_json(const nlohmann::json& j) {
  auto pairs = [&](const char* key) {
    std::vector<Edge> out;
    for (const auto& p : j.at(key)) out.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
    return out;
  };
  EdgeSplit s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train_pos = pairs("train_pos");
  s.val_pos = pairs("val_pos");
  s.test_pos = pairs("test_pos");
  s.val_neg = pairs("val_neg");
  s.test_neg = pairs("test_neg");
  return s;
}

// FNV-1a over the serialized split; identifies a split in ablation tables.
inline std::uint64_t split_hash(const EdgeSplit& s) {
  std::string text = split_to_json(s).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace anae
