#pragma once

#include <cstdint>
#include <filesystem>

#include "dfl/adam.hpp"
#include "dfl/autodiff.hpp"
#include "dfl/tensor.hpp"

namespace dfl {

/// Weights of the two-layer encoder. Value type: copying snapshots them.
struct GcnParams {
  Tensor w1;  // d x h
  Tensor w2;  // h x p
  double dropout_p = 0.0;

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }
  std::size_t output_dim() const { return w2.cols(); }
};

/// Glorot-uniform weights, deterministic under seed.
GcnParams init_gcn_params(std::size_t d, std::size_t h, std::size_t p, std::uint64_t seed,
                          double dropout_p = 0.0);

/// Embeddings plus the leaves whose gradients the caller reads after backward.
struct GcnOutput {
  ad::Var embeddings;  // n x p
  ad::Var w1;
  ad::Var w2;
};

/// adj * (relu(adj * dropout(x) * w1) with dropout) * w2. Dropout is applied
/// to the input of each layer and only in train mode.
GcnOutput gcn_forward(const Tensor& adj, const Tensor& x, const GcnParams& params, bool train_mode,
                      std::uint64_t dropout_seed = 0);

/// One Adam step on w1, w2 from the gradients left on `out` by backward().
void apply_gradients(Adam& opt, GcnParams& params, const GcnOutput& out);

/// Versioned JSON checkpoint (shapes + row-major values).
void save_gcn_checkpoint(const GcnParams& params, const std::filesystem::path& path);
GcnParams load_gcn_checkpoint(const std::filesystem::path& path);

}  // namespace dfl
