#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dfl/gcn.hpp"
#include "dfl/graph.hpp"
#include "dfl/tensor.hpp"

namespace dfl {

struct LinkHyper {
  int hidden = 50;
  int embed = 50;
  int epochs = 200;
  double lr = 0.01;
  int negative_ratio = 5;
  double edge_dropout = 0.2;
};

struct LinkPredictor {
  GcnParams encoder;
  int negative_ratio = 5;
  double edge_dropout = 0.2;
  Tensor embeddings;  // eval-mode output on the observed graph
  std::vector<double> loss_history;

  double score(int u, int v) const;  // sigmoid(z_u . z_v)
};

/// Uniform non-edge pairs (u < v) absent from `observed`, with replacement.
std::vector<Edge> sample_negatives(const Graph& observed, std::size_t count, std::mt19937_64& rng);

/// Trains the encoder with a dot-product decoder on the observed edges only.
LinkPredictor train_link_predictor(const Graph& observed, const Tensor& features,
                                   const LinkHyper& hyper, std::uint64_t seed);

enum class PredictionMode { expected, top_m };

struct PredictedGraph {
  PredictionMode mode = PredictionMode::expected;
  Tensor probs;   // symmetric, zero diagonal, observed edges clamped to 1
  Graph graph;    // top-m binarisation (empty edge set in expected mode)
};

/// extra_edges is the number of non-observed pairs added in top-m mode.
PredictedGraph predict_adjacency(const LinkPredictor& model, const Graph& observed,
                                 std::size_t extra_edges, PredictionMode mode);

/// Modularity matrix of a weighted symmetric adjacency.
Tensor weighted_modularity_matrix(const Tensor& weights);

/// Probability that a positive outranks a negative, ties counting one half.
double rank_auc(std::span<const double> positive, std::span<const double> negative);

/// AUC of the held edges against as many sampled pairs that are edges of
/// neither the observed nor the held set.
double link_auc(const LinkPredictor& model, const Graph& observed, const std::vector<Edge>& held,
                std::uint64_t seed);

/// "u v score" per predicted edge (top-m) or per positive-probability pair.
void export_predicted(const PredictedGraph& pg, const std::filesystem::path& path);

const char* to_string(PredictionMode mode);

}  // namespace dfl
