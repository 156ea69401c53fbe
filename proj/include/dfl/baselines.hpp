#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dfl/graph.hpp"
#include "dfl/tensor.hpp"

namespace dfl {

struct PartitionResult {
  std::vector<int> labels;  // relabelled 0..communities-1 by first appearance
  int communities = 0;
  double modularity = 0.0;
};

struct CnmMerge {
  int absorbed;  // community ids are the initial node ids
  int into;
  double delta_q;
  double q_after;
};

struct CnmResult : PartitionResult {
  std::vector<CnmMerge> merges;  // full agglomeration down to one community
  int chosen_level = 0;          // number of merges applied to produce labels
};

/// Greedy agglomeration (Clauset-Newman-Moore). Each merge takes the pair with
/// the largest gain (ties to the lowest ids among connected pairs); an
/// unconnected pair is taken only when strictly better, which happens once
/// gains turn negative. Runs down to a single community; the returned
/// labelling is the highest-Q level with at most k communities. k <= 0 means
/// unconstrained.
CnmResult cnm(const Graph& g, int k);

/// Recursive bisection by the leading eigenvector of the generalised
/// modularity matrix. Splits the best community while its gain is positive and
/// fewer than k communities exist (k <= 0: no limit).
PartitionResult newman_leading_eigenvector(const Graph& g, int k);

/// Top-k eigenvectors of the given symmetric matrix followed by hard k-means
/// over their rows. Throws std::runtime_error if an eigenvector fails to converge.
std::vector<int> spectral_clustering(const Tensor& modularity, int k, std::uint64_t seed);
PartitionResult spectral_clustering_modularity(const Graph& g, int k, std::uint64_t seed);

struct EigenPair {
  double value;
  std::vector<double> vector;
};

/// Applies a symmetric n x n operator to an n x b block.
using BlockOperator = std::function<Tensor(const Tensor&)>;

/// Largest-algebraic eigenpairs by shifted block power iteration with
/// Rayleigh-Ritz, which keeps the found directions deflated from the rest.
/// `shift` must make the operator positive semidefinite. Converged when every
/// requested Ritz residual is below tol * max(1, shift).
std::vector<EigenPair> top_eigenpairs(const BlockOperator& op, std::size_t n, double shift, int count,
                                      double tol = 1e-8, int max_iters = 10000);
std::vector<EigenPair> top_eigenpairs(const Tensor& sym, int count, double tol = 1e-8,
                                      int max_iters = 10000);

/// Structural node features for graphs without a feature file: `steps`
/// rounds of orthonormalised subspace iteration of (I + A_hat) / 2 from a
/// seeded Gaussian block, scaled by sqrt(n). Approximates the leading
/// eigenvectors of the normalised adjacency without a convergence test.
Tensor spectral_features(const Graph& g, int dim = 32, int steps = 50, std::uint64_t seed = 0);

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by inertia.
std::vector<int> hard_kmeans(const Tensor& points, int k, int restarts, std::uint64_t seed);

/// k rounds, each adding the node that minimises the resulting objective.
std::vector<int> greedy_facility(const DistanceTable& dist, int k);

/// Seeded first node, then repeatedly the node farthest from the chosen set.
std::vector<int> gonzalez(const DistanceTable& dist, int k, std::uint64_t seed);

/// Exhaustive optimum over all subsets of size <= k (small n only).
double brute_force_facility(const DistanceTable& dist, int k);

enum class Task { community, facility };

struct E2eHyper {
  int hidden = 50;
  int iters = 1000;
  double lr = 0.01;
  double dropout = 0.0;
  double gamma = 100.0;    // unused for partitioning
  double facility_temperature = 100.0;
};

/// GCN that outputs the decision directly: row-softmax over k columns for
/// partitioning, sigmoid then budget rescale for selection. Trained on the
/// decision loss of `g_train`. Returns r (n x k) or x (n x 1).
Tensor gcn_e2e(const Graph& g_train, const Tensor& features, int k, Task task, std::uint64_t seed,
               const E2eHyper& hyper = {});

std::vector<std::string> baseline_names();

}  // namespace dfl
