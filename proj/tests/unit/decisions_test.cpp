#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "dfl/decisions.hpp"
#include "dfl/gradcheck.hpp"

namespace dfl {
namespace {

Graph two_triangles() { return Graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}); }
Graph path(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph(n, std::move(e));
}

Graph random_graph(int n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (coin(rng)) edges.emplace_back(u, v);
  if (edges.empty()) edges.emplace_back(0, 1);
  return Graph(n, std::move(edges));
}

Tensor one_hot(const std::vector<int>& labels, int k) {
  Tensor r(labels.size(), k);
  for (std::size_t j = 0; j < labels.size(); ++j) r(j, labels[j]) = 1.0;
  return r;
}

double loss_of(const Tensor& r, const Graph& g) {
  return modularity_loss(ad::constant(r), modularity_matrix(g), static_cast<double>(g.num_edges())).value()[0];
}

// -- partitioning --------------------------------------------------------------

TEST(Modularity, Examples) {
  const Graph g = two_triangles();
  EXPECT_NEAR(loss_of(one_hot({0, 0, 0, 0, 0, 0}, 2), g), 0.0, 1e-15);
  EXPECT_NEAR(loss_of(one_hot({0, 0, 0, 1, 1, 1}, 2), g), 0.5, 1e-15);
  EXPECT_NEAR(modularity_value({0, 0, 0, 0, 0, 0}, g), 0.0, 1e-15);
  EXPECT_NEAR(modularity_value({0, 0, 0, 1, 1, 1}, g), 0.5, 1e-15);
  EXPECT_NEAR(modularity_value({7, 7, 7, 3, 3, 3}, g), 0.5, 1e-15);
}

TEST(Modularity, LossEqualsEnumerationExpectation) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 24; ++trial) {
    const int n = 3 + trial % 6;
    const Graph g = random_graph(n, 0.5, rng);
    Tensor r(n, 2);
    for (int j = 0; j < n; ++j) {
      r(j, 0) = unit(rng);
      r(j, 1) = 1.0 - r(j, 0);
    }
    double expected = 0.0;
    std::vector<int> labels(n);
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      double p = 1.0;
      for (int j = 0; j < n; ++j) {
        labels[j] = (mask >> j) & 1u;
        p *= r(j, labels[j]);
      }
      expected += p * modularity_value(labels, g);
    }
    EXPECT_NEAR(loss_of(r, g), expected, 1e-10) << "n=" << n;
  }
}

TEST(Modularity, HardAssignmentsMatchValueProperty) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + trial * 2;
    const Graph g = random_graph(n, 0.2, rng);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng() % 4);
    EXPECT_NEAR(loss_of(one_hot(labels, 4), g), modularity_value(labels, g), 1e-12);
  }
}

TEST(Modularity, LossGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const Graph g = random_graph(9, 0.4, rng);
  const Tensor b = modularity_matrix(g);
  const double err = gradient_error(
      [&](const std::vector<ad::Var>& in) {
        return modularity_loss(ad::softmax_rows(in[0], 1.0), b, static_cast<double>(g.num_edges()));
      },
      {random_tensor(9, 3, 6)});
  EXPECT_LT(err, 1e-6);
}

TEST(Modularity, ValueRejectsBadLabels) {
  EXPECT_THROW(modularity_value({0, 1}, two_triangles()), std::invalid_argument);
  EXPECT_THROW(modularity_value({0, 0, 0, -1, 1, 1}, two_triangles()), std::invalid_argument);
}

TEST(RoundPartition, ArgmaxWithLowestTie) {
  EXPECT_EQ(round_partition(one_hot({2, 0, 1}, 3)), (std::vector<int>{2, 0, 1}));
  EXPECT_EQ(round_partition(Tensor::from_rows({{0.5, 0.5}})), (std::vector<int>{0}));
  const Tensor r = random_tensor(30, 4, 9, 0.0, 1.0);
  const std::vector<int> labels = round_partition(r);
  for (std::size_t j = 0; j < 30; ++j)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_GE(r(j, labels[j]), r(j, c));
  EXPECT_EQ(count_communities({0, 3, 3, 1}), 3);
}

// -- selection -----------------------------------------------------------------

TEST(Selection, EquidistantNodesShareMass) {
  const ad::Var x = ad::constant(Tensor::from_rows({{1, 1}, {1, -1}}));
  const ad::Var mu = ad::constant(Tensor::from_rows({{1, 0}}));
  SelectionConfig cfg;
  cfg.k = 1;
  cfg.eta = 10.0;
  const SoftSelection s = select_from_clusters(x, mu, cfg);
  EXPECT_NEAR(s.a.value()(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(s.a.value()(0, 1), 0.5, 1e-15);
}

TEST(Selection, ZeroGammaGivesHalfThenRescale) {
  const ad::Var x = ad::constant(random_tensor(8, 3, 1));
  const ad::Var mu = ad::constant(random_tensor(2, 3, 2));
  SelectionConfig cfg;
  cfg.k = 2;
  cfg.gamma = 0.0;
  // Pre-squash value 2 sigma(0) - 0.5 = 0.5 on 8 nodes sums to 4 = 2K, so every entry halves.
  const SoftSelection s = select_from_clusters(x, mu, cfg);
  for (double v : s.x.value().values()) EXPECT_NEAR(v, 0.25, 1e-15);
  cfg.k = 5;
  const SoftSelection loose = select_from_clusters(x, ad::constant(random_tensor(5, 3, 2)), cfg);
  for (double v : loose.x.value().values()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(Selection, InvariantsHoldProperty) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (SquashMapping m : {SquashMapping::shifted, SquashMapping::centered}) {
      SelectionConfig cfg;
      cfg.k = 1 + static_cast<int>(seed % 4);
      cfg.eta = 5.0 + static_cast<double>(seed);
      cfg.mapping = m;
      const SoftSelection s =
          select_from_clusters(ad::constant(random_tensor(15, 4, seed)), ad::constant(random_tensor(cfg.k, 4, seed + 99)), cfg);
      double total = 0.0;
      for (double v : s.x.value().values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        total += v;
      }
      EXPECT_LE(total, cfg.k + 1e-9);
      for (std::size_t i = 0; i < s.a.rows(); ++i) {
        double row = 0.0;
        for (double v : s.a.value().row(i)) row += v;
        EXPECT_NEAR(row, 1.0, 1e-12);
      }
    }
  }
}

TEST(Selection, CenteredMapping) {
  SelectionConfig cfg;
  cfg.k = 3;
  cfg.gamma = 2.0;
  cfg.mapping = SquashMapping::centered;
  const SoftSelection s =
      select_from_clusters(ad::constant(random_tensor(6, 2, 3)), ad::constant(random_tensor(3, 2, 4)), cfg);
  for (std::size_t j = 0; j < 6; ++j) {
    const double b = s.b.value()[j];
    EXPECT_NEAR(s.x.value()[j], 2.0 / (1.0 + std::exp(-2.0 * b)) - 1.0, 1e-15);
  }
}

// -- facility ------------------------------------------------------------------

double expected_loss(const std::vector<double>& x, const kernels::SortedDistances& t, double temp) {
  Tensor xt(1, x.size());
  std::copy(x.begin(), x.end(), xt.values().begin());
  return expected_facility_loss(ad::constant(xt), t, temp).value()[0];
}

TEST(Facility, SingleCertainNodeGivesItsDistances) {
  const Graph g = path(5);
  const DistanceTable d = all_pairs_bfs(g);
  const auto table = sort_distances(d, default_empty_distance(d));
  const std::vector<double> x{0, 1, 0, 0, 0};
  const std::vector<double> e = kernels::serial::expected_min_distance(x, table);
  for (int v = 0; v < 5; ++v) EXPECT_DOUBLE_EQ(e[v], std::abs(v - 1));
  // The smooth maximum tends to the eccentricity of node 1.
  EXPECT_NEAR(expected_loss(x, table, 1000.0), 3.0, 1e-9);
}

TEST(Facility, AllOnesAndAllZeros) {
  const Graph g = path(4);
  const DistanceTable d = all_pairs_bfs(g);
  const double empty = default_empty_distance(d);
  EXPECT_EQ(empty, 4.0);
  const auto table = sort_distances(d, empty);
  EXPECT_NEAR(expected_loss({1, 1, 1, 1}, table, 100.0), 0.0, 1e-15);
  EXPECT_NEAR(expected_loss({0, 0, 0, 0}, table, 100.0), empty, 1e-12);
}

TEST(Facility, MatchesMonteCarlo) {
  const Graph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {1, 4}});
  const DistanceTable d = all_pairs_bfs(g);
  const double empty = default_empty_distance(d);
  const auto table = sort_distances(d, empty);
  const std::vector<double> x{0.2, 0.35, 0.1, 0.6, 0.05, 0.4};
  const std::vector<double> closed = kernels::serial::expected_min_distance(x, table);
  constexpr int samples = 1'000'000;
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> sum(6), sq(6);
  for (int s = 0; s < samples; ++s) {
    bool in[6];
    for (int v = 0; v < 6; ++v) in[v] = unit(rng) < x[v];
    for (int v = 0; v < 6; ++v) {
      double best = empty;
      for (int u = 0; u < 6; ++u)
        if (in[u]) best = std::min(best, static_cast<double>(d.at(v, u)));
      sum[v] += best;
      sq[v] += best * best;
    }
  }
  for (int v = 0; v < 6; ++v) {
    const double m = sum[v] / samples;
    const double se = std::sqrt((sq[v] / samples - m * m) / samples);
    EXPECT_LE(std::abs(closed[v] - m), 3.0 * se) << "node " << v;
  }
}

TEST(Facility, ExpectedDistanceMonotoneInX) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(10, 0.3, rng);
    const DistanceTable d = all_pairs_bfs(g);
    const auto table = sort_distances(d, default_empty_distance(d));
    std::vector<double> x(10);
    for (double& v : x) v = unit(rng);
    const std::vector<double> base = kernels::serial::expected_min_distance(x, table);
    for (int u = 0; u < 10; ++u) {
      std::vector<double> raised = x;
      raised[u] = std::min(1.0, raised[u] + 0.2);
      const std::vector<double> e = kernels::serial::expected_min_distance(raised, table);
      for (int v = 0; v < 10; ++v) EXPECT_LE(e[v], base[v] + 1e-12);
    }
  }
}

TEST(Facility, ValueExamples) {
  const DistanceTable d = all_pairs_bfs(path(5));
  EXPECT_EQ(facility_value({0, 1, 2, 3, 4}, d), 0.0);
  EXPECT_EQ(facility_value({2}, d), 2.0);
  EXPECT_EQ(facility_value({1, 3}, d), 1.0);
  EXPECT_THROW(facility_value({}, d), std::invalid_argument);
}

// -- pipage --------------------------------------------------------------------

TEST(Pipage, IntegralInputUnchanged) {
  std::mt19937_64 rng(1);
  const std::vector<double> x{1, 0, 0, 1, 1};
  EXPECT_EQ(pipage_round_once(x, rng), x);
}

TEST(Pipage, HalfHalfSplitsEvenly) {
  std::mt19937_64 rng(2);
  int first = 0;
  constexpr int trials = 10'000;
  for (int t = 0; t < trials; ++t) {
    const std::vector<double> y = pipage_round_once({0.5, 0.5, 1.0}, rng);
    ASSERT_EQ(y[2], 1.0);
    ASSERT_EQ(y[0] + y[1], 1.0);
    first += y[0] == 1.0;
  }
  EXPECT_LE(std::abs(first / double(trials) - 0.5), 3.0 * std::sqrt(0.25 / trials));
}

TEST(Pipage, MarginalsMatchX) {
  std::mt19937_64 rng(3);
  const std::vector<double> x{0.35, 0.8, 0.15, 0.6, 0.1, 0.5, 0.5, 0.25, 0.75};  // sums to 4
  constexpr int trials = 10'000;
  std::vector<double> hits(x.size());
  for (int t = 0; t < trials; ++t) {
    const std::vector<double> y = pipage_round_once(x, rng);
    for (std::size_t i = 0; i < x.size(); ++i) hits[i] += y[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_LE(std::abs(hits[i] / trials - x[i]), 3.0 * std::sqrt(x[i] * (1 - x[i]) / trials)) << i;
}

TEST(Pipage, OutputFeasibleProperty) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(3 + trial % 12);
    for (double& v : x) v = unit(rng);
    const double total = std::accumulate(x.begin(), x.end(), 0.0);
    const std::vector<double> y = pipage_round_once(x, rng);
    int ones = 0;
    for (double v : y) {
      EXPECT_TRUE(v == 0.0 || v == 1.0);
      ones += v == 1.0;
    }
    EXPECT_EQ(ones, std::lround(total));
  }
}

TEST(Pipage, BestOfTrialsUsesEvaluator) {
  const DistanceTable d = all_pairs_bfs(path(9));
  const std::vector<double> x(9, 2.0 / 9.0);
  auto eval = [&](const std::vector<int>& s) { return facility_value(s, d); };
  const std::vector<int> best = pipage_round(x, 50, eval, 7);
  EXPECT_EQ(best.size(), 2u);
  EXPECT_EQ(pipage_round(x, 50, eval, 7), best);
  // Every single trial is no better than the best of many.
  for (std::uint64_t s = 7; s < 17; ++s) EXPECT_LE(eval(best), eval(pipage_round(x, 1, eval, s)));
  EXPECT_EQ(selected_nodes({0, 1, 0, 1}), (std::vector<int>{1, 3}));
}

// -- gradients and serialization ----------------------------------------------

class DecisionGradcheck : public ::testing::TestWithParam<CheckCase> {};

TEST_P(DecisionGradcheck, ThroughClusteringLayer) {
  const CheckResult r = run_case(GetParam());
  EXPECT_LE(r.tolerance, 1e-4);
  EXPECT_TRUE(r.passed) << r.name << " max rel error " << r.max_rel_error;
}

INSTANTIATE_TEST_SUITE_P(Losses, DecisionGradcheck, ::testing::ValuesIn(decisions_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(SolutionJson, RoundTrip) {
  const std::vector<int> labels{0, 2, 1, 1, 0};
  EXPECT_EQ(solution_from_json(partition_to_json(labels)), labels);
  const std::vector<int> nodes{3, 7, 11};
  EXPECT_EQ(solution_from_json(selection_to_json(nodes)), nodes);
}

}  // namespace
}  // namespace dfl
