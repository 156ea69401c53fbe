#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "dfl/autodiff.hpp"
#include "dfl/graph.hpp"
#include "dfl/kernels.hpp"
#include "dfl/tensor.hpp"
#include "json.hpp"

namespace dfl {

// -- partitioning ------------------------------------------------------------

/// Expected modularity of a partition drawn row-wise from r (n x K) under the
/// given modularity matrix, divided by 2m. Diagonal terms of B contribute
/// B_uu regardless of r, so on one-hot r this is exactly Q.
ad::Var modularity_loss(const ad::Var& r, const Tensor& b, double num_edges);

/// Exact Q of a labelling on g. Labels may be any non-negative integers.
double modularity_value(const std::vector<int>& labels, const Graph& g);

/// Row-wise argmax, ties to the lowest index.
std::vector<int> round_partition(const Tensor& r);

int count_communities(const std::vector<int>& labels);

// -- subset selection --------------------------------------------------------

enum class SquashMapping {
  shifted,   // clamp(2 sigmoid(gamma b) - 0.5, 0, 1)
  centered,  // 2 sigmoid(gamma b) - 1
};

struct SelectionConfig {
  int k = 5;
  double eta = 30.0;
  double gamma = 100.0;
  SquashMapping mapping = SquashMapping::shifted;
};

struct SoftSelection {
  ad::Var x;  // 1 x n inclusion probabilities
  ad::Var a;  // K x n, each center's unit of mass spread over nodes
  ad::Var b;  // 1 x n, mass received per node
  SelectionConfig config;
};

/// a_i = softmax over nodes of eta * cos(mu_i, x_j); b = column sums of a;
/// x = squash(b), rescaled to sum K when it exceeds K.
SoftSelection select_from_clusters(const ad::Var& embeddings, const ad::Var& mu,
                                   const SelectionConfig& cfg);

/// Per-node candidate order with unreachable pairs charged `empty_distance`.
kernels::SortedDistances sort_distances(const DistanceTable& dist, double empty_distance);

/// diameter + 1.
double default_empty_distance(const DistanceTable& dist);

/// Softmax-weighted mean over nodes of the expected distance to a random set
/// drawn from x. The table must outlive the returned graph.
ad::Var expected_facility_loss(const ad::Var& x, const kernels::SortedDistances& table,
                               double temperature = 100.0);

/// max_v min_{u in S} dist(v, u). Throws on an empty set.
double facility_value(const std::vector<int>& selected, const DistanceTable& dist);

/// One randomized pipage pass over x. Mass moves between the two lowest-index
/// fractional coordinates until one of them is integral; a last leftover
/// fractional coordinate is rounded to nearest.
std::vector<double> pipage_round_once(std::vector<double> x, std::mt19937_64& rng);

/// Lower is better.
using SelectionEvaluator = std::function<double(const std::vector<int>&)>;

/// Best of `trials` independent pipage passes under `evaluate`, returned as
/// sorted node ids. Trial t uses seed + t.
std::vector<int> pipage_round(const std::vector<double>& x, int trials,
                              const SelectionEvaluator& evaluate, std::uint64_t seed);

std::vector<int> selected_nodes(const std::vector<double>& indicator);

nlohmann::json partition_to_json(const std::vector<int>& labels);
nlohmann::json selection_to_json(const std::vector<int>& nodes);
std::vector<int> solution_from_json(const nlohmann::json& j);

}  // namespace dfl
