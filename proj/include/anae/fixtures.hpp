#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "anae/dataset.hpp"
#include "anae/rng.hpp"

namespace anae::fixtures {

/// A miniature dataset stored as `.content`/`.cites` under a fixtures tree,
/// with its hand-listed undirected edges for cross-checking the loader.
struct TinyGraphFixture {
  std::string name;
  std::string content;
  std::string cites;
  std::vector<Edge> expected_edges;  // dense indices, content order
  std::size_t num_nodes = 0;
  Index num_features = 0;

  Dataset load() const {
    std::istringstream c(content), e(cites);
    Dataset ds = load_content_cites(c, e);
    ds.name = name;
    return ds;
  }

  Matrix expected_adjacency() const {
    Matrix a = Matrix::Zero(static_cast<Index>(num_nodes), static_cast<Index>(num_nodes));
    for (auto [i, j] : expected_edges) {
      a(static_cast<Index>(i), static_cast<Index>(j)) = 1;
      a(static_cast<Index>(j), static_cast<Index>(i)) = 1;
    }
    return a;
  }
};

struct FixtureSpec {
  const char* name;
  std::size_t num_nodes;
  Index num_features;
  std::vector<Edge> edges;
};

inline std::vector<FixtureSpec> fixture_specs() {
  std::vector<Edge> grid;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      const std::size_t v = r * 5 + c;
      if (c < 4) grid.emplace_back(v, v + 1);
      if (r < 3) grid.emplace_back(v, v + 5);
    }
  grid.insert(grid.end(), {{0, 6}, {12, 18}, {7, 13}});
  return {
      {"triangle3", 3, 2, {{0, 1}}},
      {"ring6", 6, 4, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {0, 3}}},
      {"star5", 5, 3, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}},
      {"path4", 4, 3, {{0, 1}, {1, 2}, {2, 3}}},
      {"path8", 8, 3, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}}},
      {"grid20", 20, 5, grid},
      {"isolated3", 3, 2, {}},
  };
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open fixture file " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline TinyGraphFixture load_fixture(const std::filesystem::path& dir, const std::string& name) {
  for (const auto& spec : fixture_specs()) {
    if (name != spec.name) continue;
    TinyGraphFixture f;
    f.name = name;
    f.content = read_text(dir / (name + ".content"));
    f.cites = read_text(dir / (name + ".cites"));
    f.expected_edges = spec.edges;
    f.num_nodes = spec.num_nodes;
    f.num_features = spec.num_features;
    return f;
  }
  throw std::invalid_argument("unknown fixture '" + name + "'");
}

inline std::vector<TinyGraphFixture> load_all_fixtures(const std::filesystem::path& dir) {
  std::vector<TinyGraphFixture> out;
  for (const auto& spec : fixture_specs()) out.push_back(load_fixture(dir, spec.name));
  return out;
}

/// Stochastic block model rendered to content/cites text and parsed by the
/// production loader. Attributes are the one-hot block id followed by
/// `noise_columns` Bernoulli(noise_p) bits; labels are block ids.
inline Dataset make_sbm_fixture(const std::vector<std::size_t>& blocks, double p_in, double p_out, std::uint64_t seed,
                                int noise_columns = 20, double noise_p = 0.1) {
  Rng rng(seed);
  std::vector<std::size_t> block_of;
  for (std::size_t b = 0; b < blocks.size(); ++b) block_of.insert(block_of.end(), blocks[b], b);
  const std::size_t n = block_of.size();
  std::ostringstream content, cites;
  for (std::size_t i = 0; i < n; ++i) {
    content << 'v' << i;
    for (std::size_t b = 0; b < blocks.size(); ++b) content << '\t' << (block_of[i] == b ? 1 : 0);
    for (int c = 0; c < noise_columns; ++c) content << '\t' << (rng.bernoulli(noise_p) ? 1 : 0);
    content << "\tb" << block_of[i] << '\n';
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(block_of[i] == block_of[j] ? p_in : p_out)) cites << 'v' << i << '\t' << 'v' << j << '\n';
  std::istringstream c(content.str()), e(cites.str());
  Dataset ds = load_content_cites(c, e);
  ds.name = "sbm";
  return ds;
}

}  // namespace anae::fixtures
