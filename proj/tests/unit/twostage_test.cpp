#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "dfl/baselines.hpp"
#include "dfl/twostage.hpp"

namespace dfl {
namespace {

LinkHyper quick_hyper() {
  LinkHyper h;
  h.hidden = 16;
  h.embed = 16;
  h.epochs = 80;
  return h;
}

Graph two_k10() {
  std::vector<Edge> e;
  for (int b = 0; b < 2; ++b)
    for (int u = 0; u < 10; ++u)
      for (int v = u + 1; v < 10; ++v) e.emplace_back(10 * b + u, 10 * b + v);
  e.emplace_back(0, 10);
  return Graph(20, std::move(e));
}

TEST(NegativeSampler, OnlyNonEdges) {
  const Graph g = generate_sbm({10, 10}, 0.5, 0.1, 1);
  std::set<std::pair<int, int>> edges(g.edges().begin(), g.edges().end());
  std::mt19937_64 rng(2);
  const std::vector<Edge> neg = sample_negatives(g, 500, rng);
  EXPECT_EQ(neg.size(), 500u);
  for (const auto& [u, v] : neg) {
    EXPECT_LT(u, v);
    EXPECT_EQ(edges.count({u, v}), 0u);
  }
}

TEST(LinkPredictor, LossDecreases) {
  const Graph g = generate_sbm({15, 15}, 0.4, 0.03, 3);
  const LinkPredictor m = train_link_predictor(g, spectral_features(g, 8, 20, 0), quick_hyper(), 4);
  ASSERT_EQ(m.loss_history.size(), 80u);
  EXPECT_LT(m.loss_history.back(), m.loss_history.front());
}

TEST(LinkPredictor, WithinBlockScoresHigher) {
  const Graph g = two_k10();
  const LinkPredictor m = train_link_predictor(g, spectral_features(g, 8, 20, 0), quick_hyper(), 5);
  double within = 0.0, across = 0.0;
  int nw = 0, na = 0;
  for (int u = 1; u < 20; ++u)
    for (int v = u + 1; v < 20; ++v) {
      if ((u < 10) == (v < 10)) {
        within += m.score(u, v);
        ++nw;
      } else {
        across += m.score(u, v);
        ++na;
      }
    }
  EXPECT_GT(within / nw, across / na);
}

TEST(LinkPredictor, HeldEdgesBeatChance) {
  const Graph g = generate_sbm({25, 25, 25}, 0.3, 0.02, 6);
  const EdgeSplit split = split_edges(g, 0.4, 7);
  const Graph observed = g.with_edges(split.train_edges);
  LinkHyper h = quick_hyper();
  h.epochs = 150;
  const LinkPredictor m = train_link_predictor(observed, spectral_features(observed, 16, 30, 0), h, 8);
  EXPECT_GT(link_auc(m, observed, split.held_edges, 9), 0.6);
}

TEST(LinkPredictor, Deterministic) {
  const Graph g = generate_sbm({10, 10}, 0.4, 0.05, 3);
  const Tensor f = spectral_features(g, 4, 10, 0);
  const LinkPredictor a = train_link_predictor(g, f, quick_hyper(), 11);
  const LinkPredictor b = train_link_predictor(g, f, quick_hyper(), 11);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_TRUE(std::equal(a.embeddings.values().begin(), a.embeddings.values().end(), b.embeddings.values().begin()));
}

TEST(PredictAdjacency, ExpectedModeClampsObserved) {
  const Graph g = generate_sbm({10, 10}, 0.4, 0.05, 3);
  const LinkPredictor m = train_link_predictor(g, spectral_features(g, 4, 10, 0), quick_hyper(), 1);
  const PredictedGraph p = predict_adjacency(m, g, 0, PredictionMode::expected);
  const std::size_t n = g.num_nodes();
  for (std::size_t u = 0; u < n; ++u) {
    EXPECT_EQ(p.probs(u, u), 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      EXPECT_EQ(p.probs(u, v), p.probs(v, u));
      EXPECT_GE(p.probs(u, v), 0.0);
      EXPECT_LE(p.probs(u, v), 1.0);
    }
  }
  for (const auto& [u, v] : g.edges()) EXPECT_EQ(p.probs(u, v), 1.0);
  EXPECT_EQ(p.graph.num_edges(), 0u);
}

TEST(PredictAdjacency, TopMAddsRequestedEdges) {
  const Graph g = generate_sbm({10, 10}, 0.4, 0.05, 3);
  const LinkPredictor m = train_link_predictor(g, spectral_features(g, 4, 10, 0), quick_hyper(), 1);
  const PredictedGraph p = predict_adjacency(m, g, 7, PredictionMode::top_m);
  EXPECT_EQ(p.graph.num_edges(), g.num_edges() + 7);
  std::set<Edge> got(p.graph.edges().begin(), p.graph.edges().end());
  for (const Edge& e : g.edges()) EXPECT_EQ(got.count(e), 1u);
}

TEST(WeightedModularity, MatchesUnweightedOnBinary) {
  const Graph g = generate_sbm({8, 8}, 0.5, 0.1, 2);
  const std::size_t n = g.num_nodes();
  Tensor a(n, n);
  for (const auto& [u, v] : g.edges()) a(u, v) = a(v, u) = 1.0;
  const Tensor w = weighted_modularity_matrix(a);
  const Tensor b = modularity_matrix(g);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w.values()[i], b.values()[i], 1e-14);
}

TEST(RankAuc, Examples) {
  const std::vector<double> hi{0.9, 0.8}, lo{0.1, 0.2};
  EXPECT_EQ(rank_auc(hi, lo), 1.0);
  EXPECT_EQ(rank_auc(lo, hi), 0.0);
  const std::vector<double> same{0.5, 0.5};
  EXPECT_EQ(rank_auc(same, same), 0.5);
  const std::vector<double> mixed{0.3, 0.7}, neg{0.5};
  EXPECT_EQ(rank_auc(mixed, neg), 0.5);
}

TEST(ExportPredicted, WritesOneLinePerEdge) {
  const Graph g = generate_sbm({6, 6}, 0.6, 0.1, 1);
  const LinkPredictor m = train_link_predictor(g, spectral_features(g, 4, 10, 0), quick_hyper(), 1);
  const PredictedGraph p = predict_adjacency(m, g, 3, PredictionMode::top_m);
  const auto path = std::filesystem::temp_directory_path() / "dfl_predicted_test.txt";
  export_predicted(p, path);
  std::ifstream in(path);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) lines += !line.starts_with("#");
  EXPECT_EQ(lines, p.graph.num_edges());
  std::filesystem::remove(path);
  EXPECT_STREQ(to_string(PredictionMode::top_m), "top-m");
}

}  // namespace
}  // namespace dfl
