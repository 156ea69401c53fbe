#include "dfl/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace dfl {
namespace {

std::optional<long long> parse_id(const std::string& token) {
  long long v = 0;
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc() || ptr != end || v < 0) return std::nullopt;
  return v;
}

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

Graph::Graph(int num_nodes, std::vector<Edge> edges) : n_(num_nodes), adj_(num_nodes) {
  if (num_nodes < 0) throw std::invalid_argument("Graph: negative node count");
  for (auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n_ || v >= n_) {
      throw std::out_of_range("Graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") outside [0," + std::to_string(n_) + ")");
    }
    if (u > v) std::swap(u, v);
  }
  const auto loops = std::remove_if(edges.begin(), edges.end(),
                                    [](const Edge& e) { return e.first == e.second; });
  self_loops_dropped_ = static_cast<std::size_t>(edges.end() - loops);
  edges.erase(loops, edges.end());
  std::sort(edges.begin(), edges.end());
  const auto dups = std::unique(edges.begin(), edges.end());
  duplicates_dropped_ = static_cast<std::size_t>(edges.end() - dups);
  edges.erase(dups, edges.end());
  edges_ = std::move(edges);
  for (const auto& [u, v] : edges_) {
    adj_[u].push_back(v);
    adj_[v].push_back(u);
  }
  for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
}

std::vector<double> Graph::degrees() const {
  std::vector<double> d(n_);
  for (int v = 0; v < n_; ++v) d[v] = static_cast<double>(adj_[v].size());
  return d;
}

bool Graph::has_edge(int u, int v) const {
  const auto& nb = adj_[u];
  return std::binary_search(nb.begin(), nb.end(), v);
}

Graph Graph::with_edges(std::vector<Edge> edges) const {
  Graph g(n_, std::move(edges));
  g.features_ = features_;
  g.names_ = names_;
  g.blocks_ = blocks_;
  return g;
}

Tensor Graph::dense_adjacency() const {
  Tensor a(n_, n_);
  for (const auto& [u, v] : edges_) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

void Graph::set_features(Tensor features) {
  if (static_cast<int>(features.rows()) != n_) {
    throw std::invalid_argument("Graph::set_features: " + std::to_string(features.rows()) +
                                " feature rows for " + std::to_string(n_) + " nodes");
  }
  features_ = std::move(features);
}

void Graph::set_names(std::vector<std::string> names) {
  if (static_cast<int>(names.size()) != n_)
    throw std::invalid_argument("Graph::set_names: name count does not match node count");
  names_ = std::move(names);
}

void Graph::set_block_labels(std::vector<int> blocks) {
  if (static_cast<int>(blocks.size()) != n_)
    throw std::invalid_argument("Graph::set_block_labels: label count does not match node count");
  blocks_ = std::move(blocks);
}

// ---------------------------------------------------------------------------
// I/O
// ---------------------------------------------------------------------------

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& msg)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg), line_(line) {}

Graph load_edge_list(const std::filesystem::path& path, const EdgeListOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path.string());

  struct RawEdge {
    std::string a, b;
    std::size_t line;
  };
  std::vector<RawEdge> raw;
  bool all_integer = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(strip_comment(line));
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() != 2) {
      throw ParseError(path.string(), lineno,
                       "expected 2 node labels, found " + std::to_string(tokens.size()));
    }
    all_integer = all_integer && parse_id(tokens[0]) && parse_id(tokens[1]);
    raw.push_back({tokens[0], tokens[1], lineno});
  }

  std::optional<Tensor> features;
  if (opts.features) features = load_features(*opts.features);
  std::optional<int> fixed_n = opts.num_nodes;
  if (!fixed_n && features) fixed_n = static_cast<int>(features->rows());

  std::vector<Edge> edges;
  edges.reserve(raw.size());
  std::vector<std::string> names;
  int n = 0;
  if (all_integer) {
    long long max_id = -1;
    for (const auto& e : raw) {
      const long long u = *parse_id(e.a), v = *parse_id(e.b);
      if (fixed_n && (u >= *fixed_n || v >= *fixed_n)) {
        throw ParseError(path.string(), e.line,
                         "node id out of range [0," + std::to_string(*fixed_n) + ")");
      }
      if (std::max(u, v) > std::numeric_limits<int>::max() - 1) {
        throw ParseError(path.string(), e.line, "node id too large");
      }
      max_id = std::max({max_id, u, v});
      edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    n = fixed_n ? *fixed_n : static_cast<int>(max_id + 1);
  } else {
    std::unordered_map<std::string, int> ids;
    auto id_of = [&](const std::string& label, std::size_t where) {
      auto [it, inserted] = ids.emplace(label, static_cast<int>(names.size()));
      if (inserted) {
        if (fixed_n && static_cast<int>(names.size()) >= *fixed_n) {
          throw ParseError(path.string(), where,
                           "more than " + std::to_string(*fixed_n) + " distinct node labels");
        }
        names.push_back(label);
      }
      return it->second;
    };
    for (const auto& e : raw) {
      const int u = id_of(e.a, e.line);
      const int v = id_of(e.b, e.line);
      edges.emplace_back(u, v);
    }
    n = fixed_n ? *fixed_n : static_cast<int>(names.size());
    names.resize(n);
  }

  Graph g(n, std::move(edges));
  if (g.self_loops_dropped() || g.duplicates_dropped()) {
    std::clog << "load_edge_list: " << path.string() << ": dropped " << g.self_loops_dropped()
              << " self-loops and " << g.duplicates_dropped() << " duplicate edges\n";
  }
  if (!names.empty()) g.set_names(std::move(names));
  if (features) g.set_features(std::move(*features));
  return g;
}

void save_edge_list(const Graph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# nodes " << g.num_nodes() << " edges " << g.num_edges() << '\n';
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

Tensor load_features(const std::filesystem::path& path, std::optional<int> expected_rows) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file " + path.string());
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(strip_comment(line));
    std::size_t count = 0;
    for (std::string tok; ss >> tok; ++count) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError(path.string(), lineno, "not a number: '" + tok + "'");
      }
      data.push_back(v);
    }
    if (count == 0) continue;
    if (rows == 0) cols = count;
    if (count != cols) {
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(cols) + " values, found " + std::to_string(count));
    }
    ++rows;
  }
  if (expected_rows && static_cast<int>(rows) != *expected_rows) {
    throw std::runtime_error(path.string() + ": " + std::to_string(rows) + " feature rows, expected " +
                             std::to_string(*expected_rows));
  }
  return Tensor(rows, cols, std::move(data));
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

EdgeSplit split_edges(const Graph& g, double fraction_held, std::uint64_t seed) {
  if (!(fraction_held > 0.0 && fraction_held < 1.0)) {
    throw std::invalid_argument("split_edges: fraction_held must lie in (0,1)");
  }
  std::vector<Edge> edges = g.edges();
  std::mt19937_64 rng(seed);
  std::shuffle(edges.begin(), edges.end(), rng);
  const auto held = static_cast<std::size_t>(std::llround(fraction_held * edges.size()));
  EdgeSplit split;
  split.fraction_held = fraction_held;
  split.seed = seed;
  split.held_edges.assign(edges.begin(), edges.begin() + held);
  split.train_edges.assign(edges.begin() + held, edges.end());
  std::sort(split.held_edges.begin(), split.held_edges.end());
  std::sort(split.train_edges.begin(), split.train_edges.end());
  return split;
}

void save_split_manifest(const EdgeSplit& split, const std::filesystem::path& path) {
  nlohmann::json j;
  j["seed"] = split.seed;
  j["fraction"] = split.fraction_held;
  j["held_edge_list"] = split.held_edges;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

EdgeSplit load_split_manifest(const Graph& g, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split manifest " + path.string());
  const auto j = nlohmann::json::parse(in);
  EdgeSplit split;
  split.seed = j.at("seed").get<std::uint64_t>();
  split.fraction_held = j.at("fraction").get<double>();
  for (auto [u, v] : j.at("held_edge_list").get<std::vector<Edge>>()) {
    if (u > v) std::swap(u, v);
    if (u < 0 || v >= g.num_nodes() || !g.has_edge(u, v)) {
      throw std::runtime_error(path.string() + ": held edge (" + std::to_string(u) + "," +
                               std::to_string(v) + ") is not an edge of the graph");
    }
    split.held_edges.emplace_back(u, v);
  }
  std::sort(split.held_edges.begin(), split.held_edges.end());
  std::set_difference(g.edges().begin(), g.edges().end(), split.held_edges.begin(),
                      split.held_edges.end(), std::back_inserter(split.train_edges));
  return split;
}

// ---------------------------------------------------------------------------
// Derived matrices
// ---------------------------------------------------------------------------

Tensor modularity_matrix(const Graph& g) {
  if (g.num_edges() == 0) throw std::invalid_argument("modularity_matrix: graph has no edges");
  const int n = g.num_nodes();
  const auto d = g.degrees();
  const double two_m = 2.0 * static_cast<double>(g.num_edges());
  Tensor b(n, n);
#pragma omp parallel for schedule(static) if (n > 256)
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) b(u, v) = -d[u] * d[v] / two_m;
  for (const auto& [u, v] : g.edges()) {
    b(u, v) += 1.0;
    b(v, u) += 1.0;
  }
  return b;
}

Tensor normalized_adjacency(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<double> inv_sqrt(n);
  for (int v = 0; v < n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(g.degree(v) + 1.0);
  Tensor a(n, n);
  for (int v = 0; v < n; ++v) a(v, v) = inv_sqrt[v] * inv_sqrt[v];
  for (const auto& [u, v] : g.edges()) {
    a(u, v) = inv_sqrt[u] * inv_sqrt[v];
    a(v, u) = a(u, v);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

DistanceTable::DistanceTable(int n, std::vector<std::int32_t> dist) : n_(n), dist_(std::move(dist)) {
  if (dist_.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("DistanceTable: size mismatch");
}

int DistanceTable::diameter() const {
  int best = 0;
  for (auto d : dist_)
    if (d != n_) best = std::max(best, static_cast<int>(d));
  return best;
}

DistanceTable all_pairs_bfs(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<std::int32_t> dist(static_cast<std::size_t>(n) * n, n);
#pragma omp parallel if (n > 64)
  {
    std::vector<int> queue(n);
#pragma omp for schedule(dynamic, 8)
    for (int s = 0; s < n; ++s) {
      std::int32_t* row = &dist[static_cast<std::size_t>(s) * n];
      row[s] = 0;
      std::size_t head = 0, tail = 0;
      queue[tail++] = s;
      while (head < tail) {
        const int u = queue[head++];
        for (int w : g.neighbors(u)) {
          if (row[w] == n) {
            row[w] = row[u] + 1;
            queue[tail++] = w;
          }
        }
      }
    }
  }
  return DistanceTable(n, std::move(dist));
}

// ---------------------------------------------------------------------------
// Generators and subgraphs
// ---------------------------------------------------------------------------

Graph generate_sbm(const std::vector<int>& block_sizes, double p_in, double p_out,
                   std::uint64_t seed) {
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) {
    throw std::invalid_argument("generate_sbm: need 0 <= p_out <= p_in <= 1");
  }
  std::vector<int> block;
  for (std::size_t b = 0; b < block_sizes.size(); ++b) {
    if (block_sizes[b] < 0) throw std::invalid_argument("generate_sbm: negative block size");
    block.insert(block.end(), block_sizes[b], static_cast<int>(b));
  }
  const int n = static_cast<int>(block.size());
  std::mt19937_64 rng(seed);
  // Node ids carry no block information, so samples cannot leak labels
  // through id-aligned features.
  std::shuffle(block.begin(), block.end(), rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      const double p = block[u] == block[v] ? p_in : p_out;
      if (unif(rng) < p) edges.emplace_back(u, v);
    }
  Graph g(n, std::move(edges));
  g.set_block_labels(std::move(block));
  return g;
}

Subgraph induced_subgraph(const Graph& g, const std::vector<int>& nodes) {
  std::vector<int> new_id(g.num_nodes(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) new_id[nodes[i]] = static_cast<int>(i);
  std::vector<Edge> edges;
  for (const auto& [u, v] : g.edges())
    if (new_id[u] >= 0 && new_id[v] >= 0) edges.emplace_back(new_id[u], new_id[v]);
  Subgraph sub{Graph(static_cast<int>(nodes.size()), std::move(edges)), nodes};
  if (g.features()) {
    const Tensor& f = *g.features();
    Tensor sf(nodes.size(), f.cols());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      std::copy(f.row(nodes[i]).begin(), f.row(nodes[i]).end(), sf.row(i).begin());
    sub.graph.set_features(std::move(sf));
  }
  if (!g.names().empty()) {
    std::vector<std::string> names;
    for (int v : nodes) names.push_back(g.names()[v]);
    sub.graph.set_names(std::move(names));
  }
  if (!g.block_labels().empty()) {
    std::vector<int> blocks;
    for (int v : nodes) blocks.push_back(g.block_labels()[v]);
    sub.graph.set_block_labels(std::move(blocks));
  }
  return sub;
}

Subgraph largest_connected_component(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<int> comp(n, -1);
  std::vector<int> sizes;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int c = static_cast<int>(sizes.size());
    sizes.push_back(0);
    std::queue<int> q;
    q.push(s);
    comp[s] = c;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      ++sizes[c];
      for (int w : g.neighbors(u))
        if (comp[w] < 0) {
          comp[w] = c;
          q.push(w);
        }
    }
  }
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<int> nodes;
  for (int v = 0; v < n; ++v)
    if (comp[v] == best) nodes.push_back(v);
  return induced_subgraph(g, nodes);
}

Tensor degree_bucket_features(const Graph& g, int buckets) {
  Tensor f(g.num_nodes(), buckets);
  for (int v = 0; v < g.num_nodes(); ++v) {
    const int b = static_cast<int>(std::floor(2.0 * std::log2(g.degree(v) + 1.0)));
    f(v, std::min(b, buckets - 1)) = 1.0;
  }
  return f;
}

}  // namespace dfl
