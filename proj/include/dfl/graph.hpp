#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfl/tensor.hpp"

namespace dfl {

/// Undirected edge stored with first < second.
using Edge = std::pair<int, int>;

/// Immutable simple undirected graph on nodes 0..n-1.
class Graph {
 public:
  Graph() = default;

  /// Self-loops and duplicate edges are dropped; the counts are kept.
  Graph(int num_nodes, std::vector<Edge> edges);

  int num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int v) const { return adj_[v]; }
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }
  std::vector<double> degrees() const;
  bool has_edge(int u, int v) const;

  std::size_t self_loops_dropped() const { return self_loops_dropped_; }
  std::size_t duplicates_dropped() const { return duplicates_dropped_; }

  /// Same node set, names, features and block labels; new edge set.
  Graph with_edges(std::vector<Edge> edges) const;

  Tensor dense_adjacency() const;

  const std::optional<Tensor>& features() const { return features_; }
  void set_features(Tensor features);
  const std::vector<std::string>& names() const { return names_; }
  void set_names(std::vector<std::string> names);
  /// Planted block per node for generated graphs; empty otherwise.
  const std::vector<int>& block_labels() const { return blocks_; }
  void set_block_labels(std::vector<int> blocks);

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adj_;
  std::size_t self_loops_dropped_ = 0;
  std::size_t duplicates_dropped_ = 0;
  std::optional<Tensor> features_;
  std::vector<std::string> names_;
  std::vector<int> blocks_;
};

/// Error raised for malformed dataset files; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& msg);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct EdgeListOptions {
  std::optional<std::filesystem::path> features;
  /// Forces the node count (ids must then lie in [0, num_nodes)).
  std::optional<int> num_nodes;
};

/// Whitespace-separated pairs, one per line, '#' starts a comment. Integer
/// labels are used as node ids directly; any non-integer label switches the
/// whole file to first-appearance remapping, with the labels kept as names.
Graph load_edge_list(const std::filesystem::path& path, const EdgeListOptions& opts = {});
void save_edge_list(const Graph& g, const std::filesystem::path& path);

/// One row of reals per node, whitespace separated.
Tensor load_features(const std::filesystem::path& path, std::optional<int> expected_rows = {});

struct EdgeSplit {
  std::vector<Edge> train_edges;
  std::vector<Edge> held_edges;
  double fraction_held = 0.0;
  std::uint64_t seed = 0;
};

/// Uniform random holdout of round(fraction_held * m) edges.
EdgeSplit split_edges(const Graph& g, double fraction_held, std::uint64_t seed);
void save_split_manifest(const EdgeSplit& split, const std::filesystem::path& path);
EdgeSplit load_split_manifest(const Graph& g, const std::filesystem::path& path);

/// B_uv = A_uv - d_u d_v / 2m. Requires m >= 1.
Tensor modularity_matrix(const Graph& g);

/// D~^{-1/2} (A + I) D~^{-1/2}.
Tensor normalized_adjacency(const Graph& g);

/// Hop distances; pairs in different components get `unreachable` (= n).
class DistanceTable {
 public:
  DistanceTable() = default;
  DistanceTable(int n, std::vector<std::int32_t> dist);

  int size() const { return n_; }
  std::int32_t at(int u, int v) const { return dist_[static_cast<std::size_t>(u) * n_ + v]; }
  std::int32_t unreachable() const { return n_; }
  bool reachable(int u, int v) const { return at(u, v) != unreachable(); }
  /// Largest finite distance.
  int diameter() const;
  const std::vector<std::int32_t>& raw() const { return dist_; }

 private:
  int n_ = 0;
  std::vector<std::int32_t> dist_;
};

DistanceTable all_pairs_bfs(const Graph& g);

/// Stochastic block model with block membership shuffled by `seed`; block
/// label of each node is stored on the graph.
Graph generate_sbm(const std::vector<int>& block_sizes, double p_in, double p_out,
                   std::uint64_t seed);

struct Subgraph {
  Graph graph;
  std::vector<int> original_ids;  // subgraph node -> original node
};

Subgraph largest_connected_component(const Graph& g);

/// Induced subgraph on `nodes` (given in the new id order).
Subgraph induced_subgraph(const Graph& g, const std::vector<int>& nodes);

/// One-hot degree buckets, bucket = min(buckets-1, floor(2 log2(d+1))).
Tensor degree_bucket_features(const Graph& g, int buckets = 16);

}  // namespace dfl
