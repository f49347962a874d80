#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "anae/error.hpp"
#include "anae/graph.hpp"

namespace anae {

/// An attributed network as read from a `.content` / `.cites` pair. The graph
/// carries no self-loops; callers add them when building model inputs.
struct Dataset {
  std::string name;
  SparseGraph graph;
  AttributeMatrix attributes;
  LabelVector labels;
  std::vector<std::string> node_ids;    // dense index -> original id
  std::vector<std::string> class_names;  // class id -> label string
  std::size_t dangling_citations = 0;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline double parse_real(const std::string& s, long line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw ParseError("bad attribute value '" + s + "'", line);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("bad attribute value '" + s + "'", line);
  }
}

}  // namespace detail

/// Parses content lines `id f_1 ... f_d label` and cites lines `a b`.
/// Nodes are indexed in content order, class ids follow the sorted label names,
/// edges are symmetrized and deduplicated, and cites naming unknown ids are
/// dropped and counted.
inline Dataset load_content_cites(std::istream& content, std::istream& cites) {
  Dataset ds;
  std::unordered_map<std::string, std::size_t> index_of;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  long feature_count = -1;

  std::string line;
  long lineno = 0;
  while (std::getline(content, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) throw ParseError("content line needs an id and a label", lineno);
    long d = static_cast<long>(fields.size()) - 2;
    if (feature_count < 0) {
      feature_count = d;
    } else if (d != feature_count) {
      throw DimensionError("line " + std::to_string(lineno) + ": expected " +
                           std::to_string(feature_count) + " features, found " + std::to_string(d));
    }
    if (!index_of.emplace(fields.front(), ds.node_ids.size()).second)
      throw ParseError("duplicate node id '" + fields.front() + "'", lineno);
    ds.node_ids.push_back(fields.front());
    std::vector<double> row(static_cast<std::size_t>(d));
    for (long f = 0; f < d; ++f) row[static_cast<std::size_t>(f)] = detail::parse_real(fields[static_cast<std::size_t>(f + 1)], lineno);
    rows.push_back(std::move(row));
    raw_labels.push_back(fields.back());
  }

  const std::size_t n = ds.node_ids.size();
  ds.attributes.values = Matrix::Zero(static_cast<Index>(n), std::max<long>(feature_count, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < rows[i].size(); ++f)
      ds.attributes.values(static_cast<Index>(i), static_cast<Index>(f)) = rows[i][f];

  std::map<std::string, int> class_of;
  for (const auto& l : raw_labels) class_of.emplace(l, 0);
  for (auto& [name, id] : class_of) {
    id = static_cast<int>(ds.class_names.size());
    ds.class_names.push_back(name);
  }
  ds.labels.num_classes = static_cast<int>(ds.class_names.size());
  ds.labels.labels.reserve(n);
  for (const auto& l : raw_labels) ds.labels.labels.push_back(class_of.at(l));

  std::vector<Edge> edges;
  lineno = 0;
  while (std::getline(cites, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) throw ParseError("cites line needs exactly two ids", lineno);
    auto a = index_of.find(fields[0]);
    auto b = index_of.find(fields[1]);
    if (a == index_of.end() || b == index_of.end()) {
      ++ds.dangling_citations;
      continue;
    }
    edges.push_back(canonical(a->second, b->second));
  }
  ds.graph = graph_from_edges(n, edges);
  return ds;
}

/// Reads `<dir>/<name>.content` and `<dir>/<name>.cites`.
inline Dataset load_dataset(const std::filesystem::path& dir, const std::string& name) {
  auto content_path = dir / (name + ".content");
  auto cites_path = dir / (name + ".cites");
  std::ifstream content(content_path);
  if (!content) throw IoError("cannot open " + content_path.string());
  std::ifstream cites(cites_path);
  if (!cites) throw IoError("cannot open " + cites_path.string());
  Dataset ds = load_content_cites(content, cites);
  ds.name = name;
  return ds;
}

/// `node_id <tab> v1 <tab> ... vk`, one line per node, full double precision.
inline void write_embeddings_tsv(std::ostream& out, const Matrix& z,
                                 const std::vector<std::string>& node_ids) {
  out.precision(17);
  for (Index i = 0; i < z.rows(); ++i) {
    out << node_ids[static_cast<std::size_t>(i)];
    for (Index c = 0; c < z.cols(); ++c) out << '\t' << z(i, c);
    out << '\n';
  }
}

}  // namespace anae
