#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "test_support.hpp"

using namespace anae;
using anae::testing::fixture;
using anae::testing::random_graph;

namespace {

Dataset load_text(const std::string& content, const std::string& cites) {
  std::istringstream c(content), e(cites);
  return load_content_cites(c, e);
}

std::set<Edge> as_set(const std::vector<Edge>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(Loader, ThreeNodesOneCitation) {
  Dataset ds = fixture("triangle3").load();
  ASSERT_EQ(ds.graph.num_nodes, 3u);
  EXPECT_EQ(ds.attributes.num_features(), 2);
  EXPECT_EQ(ds.graph.row_offsets, (std::vector<std::size_t>{0, 1, 2, 2}));
  EXPECT_EQ(ds.graph.col_indices, (std::vector<std::size_t>{1, 0}));
  Matrix expected(3, 3);
  expected << 0, 1, 0, 1, 0, 0, 0, 0, 0;
  EXPECT_EQ(to_dense(ds.graph), expected);
  EXPECT_EQ(ds.labels.num_classes, 2);
  EXPECT_EQ(ds.labels.labels, (std::vector<int>{0, 1, 0}));
}

TEST(Loader, EmptyCitesGivesIsolatedNodes) {
  Dataset ds = load_text("a 1 0 x\nb 0 1 y\nc 1 1 z\nd 0 0 x\n", "");
  EXPECT_EQ(ds.graph.num_nodes, 4u);
  EXPECT_EQ(ds.graph.nnz(), 0u);
  EXPECT_TRUE(is_valid_symmetric(ds.graph));
}

TEST(Loader, DuplicatesCollapseAndDanglingDropped) {
  Dataset ds = load_text("a 1 x\nb 0 y\nc 1 x\n", "a b\nb a\na b\na zz\nqq c\nc c\n");
  EXPECT_EQ(ds.graph.undirected_edges(), (std::vector<Edge>{{0, 1}}));
  EXPECT_EQ(ds.dangling_citations, 2u);
  for (double w : ds.graph.edge_weights) EXPECT_EQ(w, 1.0);
}

TEST(Loader, MalformedLinesNameTheLine) {
  try {
    load_text("a 1 0 x\nb 1 oops y\n", "");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  try {
    load_text("a 1 0 x\n", "a\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1);
  }
  EXPECT_THROW(load_text("a 1 0 x\nb 1 y\n", ""), DimensionError);
  EXPECT_THROW(load_text("a 1 x\na 0 y\n", ""), ParseError);
}

TEST(Loader, MatchesHandListedFixtureEdges) {
  for (const auto& f : fixtures::load_all_fixtures(anae::testing::fixture_dir())) {
    Dataset ds = f.load();
    EXPECT_EQ(ds.graph.num_nodes, f.num_nodes) << f.name;
    EXPECT_EQ(ds.attributes.num_features(), f.num_features) << f.name;
    EXPECT_EQ(to_dense(ds.graph), f.expected_adjacency()) << f.name;
    EXPECT_TRUE(is_valid_symmetric(ds.graph)) << f.name;
    EXPECT_TRUE(ds.attributes.values.allFinite());
  }
}

TEST(Loader, CitesOrderDoesNotMatter) {
  auto f = fixture("grid20");
  std::vector<std::string> lines;
  std::istringstream in(f.cites);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  Dataset base = f.load();
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(lines);
    std::string shuffled;
    for (auto& l : lines) {
      // also flip direction of some citations
      if (rng.bernoulli(0.5)) {
        auto tab = l.find('\t');
        l = l.substr(tab + 1) + "\t" + l.substr(0, tab);
      }
      shuffled += l + "\n";
    }
    Dataset ds = load_text(f.content, shuffled);
    EXPECT_EQ(ds.graph.row_offsets, base.graph.row_offsets);
    EXPECT_EQ(ds.graph.col_indices, base.graph.col_indices);
  }
}

// Dense oracle: build the symmetric 0/1 matrix directly from the edge list
// and compare with the CSR on random graphs of up to 200 nodes.
TEST(Loader, CsrEqualsDenseSymmetrization) {
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.index(200));
    const std::size_t m = static_cast<std::size_t>(rng.index(3 * n + 1));
    std::vector<Edge> raw;
    Matrix dense = Matrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
    for (std::size_t k = 0; k < m; ++k) {
      auto a = static_cast<std::size_t>(rng.index(n)), b = static_cast<std::size_t>(rng.index(n));
      raw.emplace_back(a, b);  // directed, possibly duplicated or self
      if (a != b) {
        dense(static_cast<Index>(a), static_cast<Index>(b)) = 1;
        dense(static_cast<Index>(b), static_cast<Index>(a)) = 1;
      }
    }
    SparseGraph g = graph_from_edges(n, raw);
    EXPECT_TRUE(is_valid_symmetric(g));
    EXPECT_EQ(to_dense(g), dense);
  }
}

TEST(SelfLoops, SingleNode) {
  SparseGraph g = add_self_loops(graph_from_edges(1, {}));
  EXPECT_EQ(g.col_indices, (std::vector<std::size_t>{0}));
  EXPECT_EQ(g.edge_weights, (std::vector<double>{1.0}));
}

TEST(SelfLoops, AddsExactlyNAndIsIdempotent) {
  for (const auto& f : fixtures::load_all_fixtures(anae::testing::fixture_dir())) {
    SparseGraph g = f.load().graph;
    SparseGraph once = add_self_loops(g);
    EXPECT_EQ(once.nnz(), g.nnz() + g.num_nodes);
    EXPECT_TRUE(once.has_self_loops());
    EXPECT_TRUE(is_valid_symmetric(once));
    SparseGraph twice = add_self_loops(once);
    EXPECT_EQ(twice.row_offsets, once.row_offsets);
    EXPECT_EQ(twice.col_indices, once.col_indices);
    EXPECT_EQ(twice.edge_weights, once.edge_weights);
  }
  SparseGraph w = add_self_loops(graph_from_edges(2, {{0, 1}}), 2.5);
  EXPECT_EQ(w.edge_weights, (std::vector<double>{2.5, 1.0, 1.0, 2.5}));
}

TEST(Split, SizesForCoraEdgeCount) {
  // Same undirected edge count as the published Cora statistics.
  SparseGraph g = random_graph(2708, 5429, 3);
  EdgeSplit s = split_edges(g, {}, 7);
  EXPECT_EQ(s.test_pos.size(), 543u);
  EXPECT_EQ(s.val_pos.size(), 271u);
  EXPECT_EQ(s.train_pos.size(), 4615u);
  EXPECT_EQ(s.train_pos.size() + s.val_pos.size() + s.test_pos.size(), 5429u);
  EXPECT_EQ(s.test_neg.size(), 543u);
  EXPECT_EQ(s.val_neg.size(), 271u);
  SparseGraph train = build_train_graph(s, g.num_nodes);
  EXPECT_EQ(train.undirected_edges().size(), 4615u);
  for (auto [a, b] : s.test_pos) EXPECT_FALSE(train.has_edge(a, b));
  for (auto [a, b] : s.val_pos) EXPECT_FALSE(train.has_edge(a, b));
  for (auto [a, b] : s.test_neg) EXPECT_FALSE(g.has_edge(a, b));
}

TEST(Split, PartitionAndNegativeInvariants) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SparseGraph g = random_graph(60 + seed, 150 + 5 * seed, seed);
    EdgeSplit s = split_edges(g, {}, seed);
    std::set<Edge> all = as_set(g.undirected_edges());
    std::set<Edge> uni;
    std::size_t total = 0;
    for (const auto* part : {&s.train_pos, &s.val_pos, &s.test_pos}) {
      total += part->size();
      uni.insert(part->begin(), part->end());
    }
    EXPECT_EQ(total, all.size());  // pairwise disjoint
    EXPECT_EQ(uni, all);
    EXPECT_EQ(s.test_neg.size(), s.test_pos.size());
    EXPECT_EQ(s.val_neg.size(), s.val_pos.size());
    std::set<Edge> negs;
    for (const auto* part : {&s.val_neg, &s.test_neg})
      for (auto e : *part) {
        EXPECT_LT(e.first, e.second);
        EXPECT_FALSE(all.count(e));
        EXPECT_TRUE(negs.insert(e).second) << "duplicate negative";
      }
    SparseGraph train = build_train_graph(s, g.num_nodes);
    EXPECT_TRUE(train.has_self_loops());
    EXPECT_TRUE(is_valid_symmetric(train));
    EXPECT_EQ(as_set(train.undirected_edges()), as_set(s.train_pos));
  }
}

TEST(Split, DeterministicPerSeed) {
  SparseGraph g = random_graph(100, 300, 1);
  EdgeSplit a = split_edges(g, {}, 42), b = split_edges(g, {}, 42), c = split_edges(g, {}, 43);
  EXPECT_EQ(split_to_json(a), split_to_json(b));
  EXPECT_NE(split_to_json(a), split_to_json(c));
  EXPECT_EQ(split_hash(a), split_hash(b));
}

TEST(Split, TrainOnlyRatios) {
  SparseGraph g = random_graph(30, 50, 2);
  EdgeSplit s = split_edges(g, {1.0, 0.0, 0.0}, 1);
  EXPECT_EQ(s.train_pos.size(), 50u);
  EXPECT_TRUE(s.val_pos.empty() && s.test_pos.empty() && s.test_neg.empty());
  SparseGraph rebuilt = build_train_graph(s, g.num_nodes);
  SparseGraph looped = add_self_loops(g);
  EXPECT_EQ(rebuilt.col_indices, looped.col_indices);
  EXPECT_EQ(rebuilt.row_offsets, looped.row_offsets);
  // training-only splits are allowed on tiny graphs too
  EXPECT_NO_THROW(split_edges(random_graph(6, 5, 1), {1.0, 0.0, 0.0}, 1));
}

TEST(Split, RefusesTinyGraphs) {
  EXPECT_THROW(split_edges(random_graph(30, 19, 1), {}, 1), std::invalid_argument);
  EXPECT_NO_THROW(split_edges(random_graph(30, 20, 1), {}, 1));
  EXPECT_THROW(split_edges(random_graph(30, 40, 1), {0.5, 0.2, 0.2}, 1), std::invalid_argument);
}

TEST(Split, JsonRoundTrip) {
  SparseGraph g = random_graph(80, 200, 9);
  EdgeSplit s = split_edges(g, {}, 9);
  auto text = split_to_json(s).dump();
  EdgeSplit back = split_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_EQ(back.train_pos, s.train_pos);
  EXPECT_EQ(back.test_neg, s.test_neg);
  EXPECT_EQ(split_hash(back), split_hash(s));
}

TEST(NegativeSampling, ForcedPair) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j)
      if (!(i == 2 && j == 4)) edges.emplace_back(i, j);
  SparseGraph g = graph_from_edges(6, edges);
  auto neg = sample_negative_edges(g, 1, 3);
  ASSERT_EQ(neg.size(), 1u);
  EXPECT_EQ(neg[0], (Edge{2, 4}));
  EXPECT_THROW(sample_negative_edges(g, 2, 3), std::invalid_argument);
  EXPECT_TRUE(sample_negative_edges(g, 0, 3).empty());
}

TEST(NegativeSampling, ExhaustiveMembership) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SparseGraph g = add_self_loops(random_graph(25, 60, seed));
    const std::size_t free_pairs = 25 * 24 / 2 - 60;
    for (std::size_t count : {std::size_t{1}, std::size_t{30}, free_pairs / 2 + 3, free_pairs}) {
      auto neg = sample_negative_edges(g, count, seed);
      std::set<Edge> seen(neg.begin(), neg.end());
      EXPECT_EQ(seen.size(), count);
      for (auto [a, b] : neg) {
        EXPECT_NE(a, b);
        EXPECT_FALSE(g.has_edge(a, b));
      }
      EXPECT_EQ(neg, sample_negative_edges(g, count, seed));
    }
    EXPECT_THROW(sample_negative_edges(g, free_pairs + 1, seed), std::invalid_argument);
  }
}
