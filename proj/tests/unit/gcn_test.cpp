#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "dfl/gcn.hpp"
#include "dfl/gradcheck.hpp"
#include "dfl/graph.hpp"

namespace dfl {
namespace {

TEST(Gcn, IdentityPropagation) {
  GcnParams p;
  p.w1 = Tensor::identity(4);
  p.w2 = Tensor::identity(4);
  const Tensor out = gcn_forward(Tensor::identity(4), Tensor::identity(4), p, false).embeddings.value();
  EXPECT_EQ(out, Tensor::identity(4));
}

TEST(Gcn, ConstantFeaturesOnTriangleGiveEqualRows) {
  const Graph g(3, {{0, 1}, {1, 2}, {0, 2}});
  const GcnParams p = init_gcn_params(5, 8, 4, 3);
  const Tensor out = gcn_forward(normalized_adjacency(g), Tensor(3, 5, 0.7), p, false).embeddings.value();
  for (std::size_t r = 1; r < 3; ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) EXPECT_NEAR(out(r, c), out(0, c), 1e-15);
}

TEST(Gcn, InitDeterministicAndGlorotBounded) {
  const GcnParams a = init_gcn_params(30, 50, 50, 9), b = init_gcn_params(30, 50, 50, 9);
  EXPECT_EQ(a.w1, b.w1);
  EXPECT_EQ(a.w2, b.w2);
  EXPECT_EQ(a.w1.rows(), 30u);
  EXPECT_EQ(a.w1.cols(), 50u);
  EXPECT_EQ(a.w2.cols(), 50u);
  EXPECT_LE(a.w1.max_abs(), std::sqrt(6.0 / 80.0));
  EXPECT_LE(a.w2.max_abs(), std::sqrt(6.0 / 100.0));
  EXPECT_NE(init_gcn_params(30, 50, 50, 10).w1, a.w1);
}

TEST(Gcn, WeightGradientsMatchFiniteDifferences) {
  const Graph g = generate_sbm({6, 6}, 0.6, 0.1, 4);
  const Tensor adj = normalized_adjacency(g);
  const Tensor x = random_tensor(12, 5, 5);
  const GcnParams p = init_gcn_params(5, 6, 3, 6);
  const Tensor weights = random_tensor(12, 3, 7);

  auto loss_value = [&](const GcnParams& q) {
    const Tensor e = gcn_forward(adj, x, q, false).embeddings.value();
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) s += weights[i] * e[i] * e[i];
    return s;
  };
  const GcnOutput out = gcn_forward(adj, x, p, false);
  ad::backward(ad::sum(ad::mul(ad::constant(weights), ad::mul(out.embeddings, out.embeddings))));

  const Tensor fd1 = numeric_gradient(
      [&](const Tensor& w1) {
        GcnParams q = p;
        q.w1 = w1;
        return loss_value(q);
      },
      p.w1, 1e-6);
  const Tensor fd2 = numeric_gradient(
      [&](const Tensor& w2) {
        GcnParams q = p;
        q.w2 = w2;
        return loss_value(q);
      },
      p.w2, 1e-6);
  EXPECT_LT(relative_error(out.w1.grad(), fd1), 1e-5);
  EXPECT_LT(relative_error(out.w2.grad(), fd2), 1e-5);
}

TEST(Gcn, PermutationEquivariance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = generate_sbm({8, 8}, 0.5, 0.1, seed);
    const int n = g.num_nodes();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    // Node perm[i] of the original becomes node i.
    std::vector<int> where(n);
    for (int i = 0; i < n; ++i) where[perm[i]] = i;
    std::vector<Edge> edges;
    for (const auto& [u, v] : g.edges()) edges.emplace_back(where[u], where[v]);
    const Graph pg(n, std::move(edges));

    const Tensor x = random_tensor(n, 4, seed + 1);
    Tensor px(n, 4);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 4; ++c) px(i, c) = x(perm[i], c);
    const GcnParams p = init_gcn_params(4, 7, 3, seed);
    const Tensor e = gcn_forward(normalized_adjacency(g), x, p, false).embeddings.value();
    const Tensor pe = gcn_forward(normalized_adjacency(pg), px, p, false).embeddings.value();
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(pe(i, c), e(perm[i], c), 1e-13);
  }
}

TEST(Gcn, DropoutOnlyInTrainMode) {
  const Graph g = generate_sbm({5, 5}, 0.6, 0.1, 1);
  const Tensor adj = normalized_adjacency(g);
  const Tensor x = random_tensor(10, 4, 2);
  const GcnParams p = init_gcn_params(4, 6, 3, 3, 0.5);
  const Tensor eval_a = gcn_forward(adj, x, p, false, 1).embeddings.value();
  const Tensor eval_b = gcn_forward(adj, x, p, false, 2).embeddings.value();
  EXPECT_EQ(eval_a, eval_b);
  const Tensor train_a = gcn_forward(adj, x, p, true, 1).embeddings.value();
  EXPECT_EQ(train_a, gcn_forward(adj, x, p, true, 1).embeddings.value());
  EXPECT_NE(train_a, gcn_forward(adj, x, p, true, 2).embeddings.value());
}

TEST(Gcn, ShapeMismatchThrows) {
  const GcnParams p = init_gcn_params(4, 6, 3, 3);
  EXPECT_THROW(gcn_forward(Tensor::identity(5), random_tensor(5, 3, 1), p, false), std::invalid_argument);
}

TEST(Gcn, CheckpointRoundTrip) {
  const GcnParams p = init_gcn_params(7, 5, 3, 12, 0.2);
  const auto path = std::filesystem::temp_directory_path() / "dfl_gcn_checkpoint.json";
  save_gcn_checkpoint(p, path);
  const GcnParams q = load_gcn_checkpoint(path);
  EXPECT_EQ(q.w1, p.w1);
  EXPECT_EQ(q.w2, p.w2);
  EXPECT_EQ(q.dropout_p, p.dropout_p);
}

}  // namespace
}  // namespace dfl
