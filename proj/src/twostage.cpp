#include "dfl/twostage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "dfl/adam.hpp"
#include "dfl/autodiff.hpp"

namespace dfl {
namespace {

double sigmoid(double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }

}  // namespace

double LinkPredictor::score(int u, int v) const {
  double s = 0.0;
  for (std::size_t c = 0; c < embeddings.cols(); ++c) s += embeddings(u, c) * embeddings(v, c);
  return sigmoid(s);
}

std::vector<Edge> sample_negatives(const Graph& observed, std::size_t count, std::mt19937_64& rng) {
  const int n = observed.num_nodes();
  const double pairs = 0.5 * n * (n - 1.0);
  if (n < 2 || pairs <= static_cast<double>(observed.num_edges()))
    throw std::invalid_argument("sample_negatives: graph has no non-edges");
  std::uniform_int_distribution<int> node(0, n - 1);
  std::vector<Edge> out;
  out.reserve(count);
  while (out.size() < count) {
    int u = node(rng), v = node(rng);
    if (u == v || observed.has_edge(u, v)) continue;
    out.emplace_back(std::min(u, v), std::max(u, v));
  }
  return out;
}

LinkPredictor train_link_predictor(const Graph& observed, const Tensor& features,
                                   const LinkHyper& hyper, std::uint64_t seed) {
  if (observed.num_edges() == 0) throw std::invalid_argument("train_link_predictor: no observed edges");
  if (hyper.negative_ratio < 1) throw std::invalid_argument("train_link_predictor: negative_ratio < 1");
  if (hyper.edge_dropout < 0.0 || hyper.edge_dropout >= 1.0)
    throw std::invalid_argument("train_link_predictor: edge_dropout must be in [0,1)");

  LinkPredictor model;
  model.negative_ratio = hyper.negative_ratio;
  model.edge_dropout = hyper.edge_dropout;
  model.encoder = init_gcn_params(features.cols(), hyper.hidden, hyper.embed, seed);
  Adam opt(AdamConfig{.lr = hyper.lr});
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::bernoulli_distribution keep(1.0 - hyper.edge_dropout);

  const auto& positives = observed.edges();
  const std::size_t num_neg = positives.size() * static_cast<std::size_t>(hyper.negative_ratio);
  std::vector<double> labels(positives.size(), 1.0);
  labels.resize(positives.size() + num_neg, 0.0);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::vector<Edge> kept;
    for (const auto& e : positives)
      if (keep(rng)) kept.push_back(e);
    const Tensor adj = normalized_adjacency(observed.with_edges(std::move(kept)));

    std::vector<Edge> pairs = positives;
    const auto neg = sample_negatives(observed, num_neg, rng);
    pairs.insert(pairs.end(), neg.begin(), neg.end());

    const GcnOutput out = gcn_forward(adj, features, model.encoder, false);
    const ad::Var loss = ad::bce_with_logits(ad::pair_dot(out.embeddings, pairs), labels);
    model.loss_history.push_back(loss.value()[0]);
    ad::backward(loss);
    apply_gradients(opt, model.encoder, out);
  }
  model.embeddings =
      gcn_forward(normalized_adjacency(observed), features, model.encoder, false).embeddings.value();
  return model;
}

PredictedGraph predict_adjacency(const LinkPredictor& model, const Graph& observed,
                                 std::size_t extra_edges, PredictionMode mode) {
  const int n = observed.num_nodes();
  PredictedGraph pg;
  pg.mode = mode;
  pg.probs = Tensor(n, n);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      const double p = observed.has_edge(u, v) ? 1.0 : model.score(u, v);
      pg.probs(u, v) = p;
      pg.probs(v, u) = p;
    }
  if (mode == PredictionMode::expected) {
    pg.graph = observed.with_edges({});
    return pg;
  }
  struct Scored {
    double p;
    Edge e;
  };
  std::vector<Scored> candidates;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (!observed.has_edge(u, v)) candidates.push_back({pg.probs(u, v), {u, v}});
  const std::size_t take = std::min(extra_edges, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(),
                    [](const Scored& a, const Scored& b) {
                      return a.p != b.p ? a.p > b.p : a.e < b.e;
                    });
  std::vector<Edge> edges = observed.edges();
  for (std::size_t i = 0; i < take; ++i) edges.push_back(candidates[i].e);
  pg.graph = observed.with_edges(std::move(edges));
  return pg;
}

Tensor weighted_modularity_matrix(const Tensor& weights) {
  const std::size_t n = weights.rows();
  std::vector<double> strength(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (double w : weights.row(i)) strength[i] += w;
    total += strength[i];
  }
  if (!(total > 0.0)) throw std::invalid_argument("weighted_modularity_matrix: zero total weight");
  Tensor b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = weights(i, j) - strength[i] * strength[j] / total;
  return b;
}

double rank_auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw std::invalid_argument("rank_auc: empty sample");
  std::vector<double> neg(negative.begin(), negative.end());
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : positive) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), p);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(positive.size()) * static_cast<double>(neg.size()));
}

double link_auc(const LinkPredictor& model, const Graph& observed, const std::vector<Edge>& held,
                std::uint64_t seed) {
  if (held.empty()) throw std::invalid_argument("link_auc: no held edges");
  std::set<Edge> held_set(held.begin(), held.end());
  std::mt19937_64 rng(seed);
  std::vector<double> pos, neg;
  for (const auto& [u, v] : held) pos.push_back(model.score(u, v));
  while (neg.size() < held.size()) {
    const auto cand = sample_negatives(observed, 1, rng)[0];
    if (held_set.count(cand)) continue;
    neg.push_back(model.score(cand.first, cand.second));
  }
  return rank_auc(pos, neg);
}

void export_predicted(const PredictedGraph& pg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# mode " << to_string(pg.mode) << '\n';
  out.precision(17);
  if (pg.mode == PredictionMode::top_m) {
    for (const auto& [u, v] : pg.graph.edges()) out << u << ' ' << v << ' ' << pg.probs(u, v) << '\n';
    return;
  }
  for (std::size_t u = 0; u < pg.probs.rows(); ++u)
    for (std::size_t v = u + 1; v < pg.probs.cols(); ++v)
      if (pg.probs(u, v) > 0.0) out << u << ' ' << v << ' ' << pg.probs(u, v) << '\n';
}

const char* to_string(PredictionMode mode) {
  return mode == PredictionMode::expected ? "expected" : "top-m";
}

}  // namespace dfl
