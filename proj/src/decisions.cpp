#include "dfl/decisions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace dfl {
namespace {

constexpr double kIntegralTol = 1e-9;

bool fractional(double v) { return v > kIntegralTol && v < 1.0 - kIntegralTol; }

}  // namespace

ad::Var modularity_loss(const ad::Var& r, const Tensor& b, double num_edges) {
  if (b.rows() != b.cols() || b.rows() != r.rows()) {
    throw std::invalid_argument("modularity_loss: modularity matrix " + shape_string(b) +
                                " does not match assignments " + shape_string(r.value()));
  }
  if (!(num_edges > 0.0)) throw std::invalid_argument("modularity_loss: no edges");
  Tensor off = b;
  double trace = 0.0;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    trace += b(i, i);
    off(i, i) = 0.0;
  }
  const ad::Var br = ad::matmul(ad::constant(std::move(off)), r);
  const ad::Var quad = ad::sum(ad::mul(r, br));
  return ad::scale(ad::add_scalar(quad, trace), 1.0 / (2.0 * num_edges));
}

double modularity_value(const std::vector<int>& labels, const Graph& g) {
  if (labels.size() != static_cast<std::size_t>(g.num_nodes()))
    throw std::invalid_argument("modularity_value: one label per node required");
  const double m = static_cast<double>(g.num_edges());
  if (m == 0.0) return 0.0;
  std::unordered_map<int, double> internal, degree;
  for (const auto& [u, v] : g.edges())
    if (labels[u] == labels[v]) internal[labels[u]] += 1.0;
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (labels[v] < 0) throw std::invalid_argument("modularity_value: negative label");
    degree[labels[v]] += g.degree(v);
  }
  double q = 0.0;
  for (const auto& [c, d] : degree) {
    const auto it = internal.find(c);
    const double e = it == internal.end() ? 0.0 : it->second;
    q += e / m - (d / (2.0 * m)) * (d / (2.0 * m));
  }
  return q;
}

std::vector<int> round_partition(const Tensor& r) {
  std::vector<int> labels(r.rows());
  for (std::size_t j = 0; j < r.rows(); ++j) {
    const auto row = r.row(j);
    labels[j] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return labels;
}

int count_communities(const std::vector<int>& labels) {
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  return static_cast<int>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

SoftSelection select_from_clusters(const ad::Var& embeddings, const ad::Var& mu,
                                   const SelectionConfig& cfg) {
  if (mu.rows() != static_cast<std::size_t>(cfg.k)) {
    throw std::invalid_argument("select_from_clusters: " + std::to_string(mu.rows()) +
                                " centers for budget " + std::to_string(cfg.k));
  }
  SoftSelection s;
  s.config = cfg;
  s.a = ad::softmax_rows(ad::cosine_similarity(mu, embeddings), cfg.eta);
  s.b = ad::colsum(s.a);
  const ad::Var squashed = ad::scale(ad::sigmoid(ad::scale(s.b, cfg.gamma)), 2.0);
  const ad::Var x = cfg.mapping == SquashMapping::shifted
                        ? ad::clamp(ad::add_scalar(squashed, -0.5), 0.0, 1.0)
                        : ad::add_scalar(squashed, -1.0);
  s.x = ad::budget_rescale(x, cfg.k);
  return s;
}

double default_empty_distance(const DistanceTable& dist) { return dist.diameter() + 1.0; }

kernels::SortedDistances sort_distances(const DistanceTable& dist, double empty_distance) {
  kernels::SortedDistances t;
  t.n = static_cast<std::size_t>(dist.size());
  t.empty_distance = empty_distance;
  t.order.resize(t.n * t.n);
  t.dist.resize(t.n * t.n);
  std::vector<std::int32_t> idx(t.n);
  for (std::size_t v = 0; v < t.n; ++v) {
    std::iota(idx.begin(), idx.end(), 0);
    const int vi = static_cast<int>(v);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::int32_t a, std::int32_t b) { return dist.at(vi, a) < dist.at(vi, b); });
    for (std::size_t i = 0; i < t.n; ++i) {
      t.order[v * t.n + i] = idx[i];
      t.dist[v * t.n + i] = dist.reachable(vi, idx[i])
                                ? static_cast<double>(dist.at(vi, idx[i]))
                                : empty_distance;
    }
  }
  return t;
}

ad::Var expected_facility_loss(const ad::Var& x, const kernels::SortedDistances& table,
                               double temperature) {
  const ad::Var e = ad::expected_min_distance(x, table);
  const ad::Var w = ad::softmax_rows(e, temperature);
  return ad::sum(ad::mul(w, e));
}

double facility_value(const std::vector<int>& selected, const DistanceTable& dist) {
  if (selected.empty()) throw std::invalid_argument("facility_value: empty selection");
  double worst = 0.0;
  for (int v = 0; v < dist.size(); ++v) {
    std::int32_t best = std::numeric_limits<std::int32_t>::max();
    for (int u : selected) best = std::min(best, dist.at(v, u));
    worst = std::max(worst, static_cast<double>(best));
  }
  return worst;
}

std::vector<double> pipage_round_once(std::vector<double> x, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double v : x)
    if (v < -kIntegralTol || v > 1.0 + kIntegralTol)
      throw std::invalid_argument("pipage_round: entries must lie in [0,1]");
  const std::size_t n = x.size();
  auto next = [&](std::size_t k) {
    while (k < n && !fractional(x[k])) ++k;
    return std::min(k, n);
  };
  std::size_t i = next(0);
  std::size_t j = next(i + 1);
  while (j < n) {
    const double e1 = std::min(1.0 - x[i], x[j]);
    const double e2 = std::min(x[i], 1.0 - x[j]);
    if (unit(rng) * (e1 + e2) < e2) {
      x[i] += e1;
      x[j] -= e1;
    } else {
      x[i] -= e2;
      x[j] += e2;
    }
    if (fractional(x[i])) {
      j = next(j + 1);
    } else if (fractional(x[j])) {
      i = j;
      j = next(j + 1);
    } else {
      i = next(j + 1);
      j = next(i + 1);
    }
  }
  for (double& v : x) v = v >= 0.5 ? 1.0 : 0.0;
  return x;
}

std::vector<int> selected_nodes(const std::vector<double>& indicator) {
  std::vector<int> out;
  for (std::size_t i = 0; i < indicator.size(); ++i)
    if (indicator[i] > 0.5) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> pipage_round(const std::vector<double>& x, int trials,
                              const SelectionEvaluator& evaluate, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("pipage_round: trials must be >= 1");
  std::vector<int> best;
  double best_value = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(t));
    std::vector<int> nodes = selected_nodes(pipage_round_once(x, rng));
    if (nodes.empty()) continue;
    const double value = evaluate(nodes);
    if (best.empty() || value < best_value) {
      best_value = value;
      best = std::move(nodes);
    }
  }
  return best;
}

nlohmann::json partition_to_json(const std::vector<int>& labels) {
  return {{"kind", "partition"}, {"labels", labels}};
}

nlohmann::json selection_to_json(const std::vector<int>& nodes) {
  return {{"kind", "selection"}, {"nodes", nodes}};
}

std::vector<int> solution_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "partition") return j.at("labels").get<std::vector<int>>();
  if (kind == "selection") return j.at("nodes").get<std::vector<int>>();
  throw std::invalid_argument("unknown solution kind '" + kind + "'");
}

}  // namespace dfl
