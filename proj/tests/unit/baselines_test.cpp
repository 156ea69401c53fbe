#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <random>

#include "dfl/baselines.hpp"
#include "dfl/decisions.hpp"

namespace dfl {
namespace {

Graph two_triangles() { return Graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}); }

Graph path(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph(n, std::move(e));
}

Graph complete(int n) {
  std::vector<Edge> e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) e.emplace_back(u, v);
  return Graph(n, std::move(e));
}

Graph two_k5() {
  std::vector<Edge> e;
  for (int b = 0; b < 2; ++b)
    for (int u = 0; u < 5; ++u)
      for (int v = u + 1; v < 5; ++v) e.emplace_back(5 * b + u, 5 * b + v);
  return Graph(10, std::move(e));
}

Graph karate() { return load_edge_list(std::string(DFL_TEST_DATA) + "/karate.edges"); }

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

// -- CNM -----------------------------------------------------------------------

TEST(Cnm, TwoTriangles) {
  const CnmResult r = cnm(two_triangles(), 2);
  EXPECT_TRUE(same_partition(r.labels, {0, 0, 0, 1, 1, 1}));
  EXPECT_NEAR(r.modularity, 0.5, 1e-12);
  EXPECT_EQ(r.communities, 2);
}

TEST(Cnm, CompleteGraphIsOneCommunity) {
  const CnmResult r = cnm(complete(6), 0);
  EXPECT_EQ(r.communities, 1);
  EXPECT_NEAR(r.modularity, 0.0, 1e-12);
}

TEST(Cnm, KarateMatchesReference) {
  const CnmResult r = cnm(karate(), 0);
  EXPECT_NEAR(r.modularity, 0.3806706114398422, 1e-12);
  EXPECT_EQ(r.communities, 3);
  EXPECT_NEAR(modularity_value(r.labels, karate()), r.modularity, 1e-12);
}

TEST(Cnm, MergeBookkeepingMatchesRecomputation) {
  const Graph g = generate_sbm({12, 12, 12}, 0.4, 0.05, 3);
  const CnmResult r = cnm(g, 0);
  ASSERT_EQ(static_cast<int>(r.merges.size()), g.num_nodes() - 1);
  std::vector<int> owner(g.num_nodes());
  std::iota(owner.begin(), owner.end(), 0);
  double q = modularity_value(owner, g);
  for (const CnmMerge& m : r.merges) {
    for (int& o : owner)
      if (o == m.absorbed) o = m.into;
    const double recomputed = modularity_value(owner, g);
    EXPECT_NEAR(recomputed - q, m.delta_q, 1e-10);
    EXPECT_NEAR(recomputed, m.q_after, 1e-10);
    q = recomputed;
  }
}

TEST(Cnm, RespectsCommunityCap) {
  const Graph g = generate_sbm({10, 10, 10, 10}, 0.5, 0.05, 9);
  for (int k = 1; k <= 6; ++k) EXPECT_LE(cnm(g, k).communities, k);
}

TEST(Cnm, IsolatedNodesDoNotCollapseCappedResult) {
  std::vector<Edge> e = two_triangles().edges();
  const Graph g(10, e);  // four isolated nodes
  const CnmResult r = cnm(g, 2);
  EXPECT_NEAR(r.modularity, 0.5, 1e-12);
}

// -- Newman and spectral -------------------------------------------------------

TEST(Newman, TwoTriangles) {
  const PartitionResult r = newman_leading_eigenvector(two_triangles(), 2);
  EXPECT_TRUE(same_partition(r.labels, {0, 0, 0, 1, 1, 1}));
  EXPECT_NEAR(r.modularity, 0.5, 1e-12);
}

TEST(Newman, SbmCloseToPlanted) {
  const Graph g = generate_sbm({30, 30, 30}, 0.3, 0.02, 4);
  const double planted = modularity_value(g.block_labels(), g);
  EXPECT_GT(newman_leading_eigenvector(g, 3).modularity, planted - 0.05);
}

TEST(Newman, SingleCommunity) {
  const PartitionResult r = newman_leading_eigenvector(two_triangles(), 1);
  EXPECT_EQ(r.communities, 1);
  EXPECT_NEAR(r.modularity, 0.0, 1e-12);
}

TEST(SpectralClustering, TwoCliques) {
  const PartitionResult r = spectral_clustering_modularity(two_k5(), 2, 1);
  EXPECT_TRUE(same_partition(r.labels, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));
  EXPECT_NEAR(r.modularity, 0.5, 1e-12);
}

TEST(SpectralClustering, Deterministic) {
  const Graph g = generate_sbm({15, 15, 15}, 0.3, 0.05, 2);
  EXPECT_EQ(spectral_clustering_modularity(g, 3, 5).labels, spectral_clustering_modularity(g, 3, 5).labels);
}

TEST(SpectralClustering, KEqualsN) {
  const std::vector<int> labels = spectral_clustering(modularity_matrix(two_triangles()), 6, 0);
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()) - sorted.begin(), 6);
}

TEST(TopEigenpairs, MatchesDenseSolver) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal;
  const int n = 40;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = normal(rng);
  Tensor t(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t(i, j) = a(i, j);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
  const std::vector<EigenPair> top = top_eigenpairs(t, 4, 1e-10);
  ASSERT_EQ(top.size(), 4u);
  for (int c = 0; c < 4; ++c) {
    EXPECT_NEAR(top[c].value, ref.eigenvalues()(n - 1 - c), 1e-7);
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(top[c].vector.data(), n);
    EXPECT_NEAR(std::abs(v.dot(ref.eigenvectors().col(n - 1 - c))), 1.0, 1e-7);
  }
}

TEST(SpectralFeatures, ShapeAndDeterminism) {
  const Graph g = generate_sbm({20, 20}, 0.3, 0.05, 1);
  const Tensor f = spectral_features(g, 8, 20, 3);
  EXPECT_EQ(f.rows(), 40u);
  EXPECT_EQ(f.cols(), 8u);
  const Tensor h = spectral_features(g, 8, 20, 3);
  EXPECT_TRUE(std::equal(f.values().begin(), f.values().end(), h.values().begin()));
}

// -- facility baselines --------------------------------------------------------

TEST(GreedyFacility, Examples) {
  std::vector<Edge> star;
  for (int v = 1; v < 7; ++v) star.emplace_back(0, v);
  EXPECT_EQ(greedy_facility(all_pairs_bfs(Graph(7, star)), 1), (std::vector<int>{0}));
  const DistanceTable p = all_pairs_bfs(path(9));
  EXPECT_LE(facility_value(greedy_facility(p, 3), p), 2.0);
  std::vector<int> all = greedy_facility(p, 20);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all.size(), 9u);
  EXPECT_EQ(facility_value(all, p), 0.0);
}

TEST(Gonzalez, PathAndTwoApproximation) {
  const DistanceTable p = all_pairs_bfs(path(9));
  EXPECT_EQ(gonzalez(p, 3, 0).size(), 3u);
  std::mt19937_64 rng(21);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 15; ++trial) {
    const int n = 6 + trial % 7;
    std::vector<Edge> e;
    for (int u = 0; u + 1 < n; ++u) e.emplace_back(u, u + 1);
    for (int u = 0; u < n; ++u)
      for (int v = u + 2; v < n; ++v)
        if (coin(rng)) e.emplace_back(u, v);
    const DistanceTable d = all_pairs_bfs(Graph(n, e));
    for (int k = 1; k <= 3; ++k) {
      const double opt = brute_force_facility(d, k);
      EXPECT_LE(facility_value(gonzalez(d, k, trial), d), 2.0 * opt) << "n=" << n << " k=" << k;
      EXPECT_LE(opt, facility_value(greedy_facility(d, k), d));
    }
  }
}

// -- end-to-end GCN ------------------------------------------------------------

TEST(GcnE2e, OutputShapes) {
  const Graph g = two_k5();
  const Tensor feat = spectral_features(g, 4, 10, 0);
  E2eHyper h;
  h.iters = 20;
  h.hidden = 8;
  const Tensor r = gcn_e2e(g, feat, 2, Task::community, 1, h);
  EXPECT_EQ(r.rows(), 10u);
  EXPECT_EQ(r.cols(), 2u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(r(i, 0) + r(i, 1), 1.0, 1e-12);
  const Tensor x = gcn_e2e(g, feat, 2, Task::facility, 1, h);
  EXPECT_EQ(x.rows(), 10u);
  EXPECT_EQ(x.cols(), 1u);
  double total = 0.0;
  for (double v : x.values()) total += v;
  EXPECT_LE(total, 2.0 + 1e-9);
}

TEST(GcnE2e, LearnsTwoCliques) {
  const Graph g = two_k5();
  E2eHyper h;
  h.iters = 200;
  h.hidden = 16;
  const Tensor r = gcn_e2e(g, spectral_features(g, 4, 10, 0), 2, Task::community, 2, h);
  EXPECT_GT(modularity_value(round_partition(r), g), 0.4);
}

TEST(Baselines, Names) {
  const std::vector<std::string> names = baseline_names();
  EXPECT_NE(std::find(names.begin(), names.end(), "cnm"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "gcn-e2e"), names.end());
}

}  // namespace
}  // namespace dfl
