#pragma once

// Differentiable soft k-means under cosine similarity.
//
// The forward pass iterates
//   r_jk = softmax_k(beta * cos(x_j, mu_k)),   mu_k = sum_j r_jk x_j / sum_j r_jk
// without recording gradients. Two backward paths are offered: the
// approximate one rebuilds a single update at the converged centers and
// differentiates through it (equivalent to taking df/dmu = I for the
// fixed-point map f(mu, x) = mu - g(mu, x)); the exact one solves the
// implicit-function system with the closed-form Jacobians of g.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfl/autodiff.hpp"
#include "dfl/tensor.hpp"
#include "json.hpp"

namespace dfl {

struct ClusterConfig {
  int k = 2;
  double beta = 50.0;
  int max_iters = 100;
  double tol = 1e-4;
  /// Norm floor for the cosine; when false a zero-norm row is an error.
  bool eps_guard = true;
  double eps = 1e-12;

  void validate() const;
};

struct ClusterState {
  Tensor mu;  // K x p
  Tensor r;   // n x K
  int iterations_used = 0;
  bool converged = false;
  /// Centers reinitialised because their mass vanished, in event order.
  std::vector<int> rescued;
};

enum class BackwardMode { approximate, exact };

/// Raised when I - dg/dmu cannot be inverted.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// D_jk = -cos(x_j, mu_k).
Tensor distance_matrix(const Tensor& x, const Tensor& mu, const ClusterConfig& cfg = {});
ad::Var distance_matrix(const ad::Var& x, const ad::Var& mu, const ClusterConfig& cfg = {});

/// k-means++ seeding with cosine distance 1 - cos.
Tensor kmeanspp_init(const Tensor& x, int k, std::uint64_t seed);

/// One assignment step: softmax_k(beta * cos(x_j, mu_k)).
Tensor soft_assign(const Tensor& x, const Tensor& mu, const ClusterConfig& cfg);

/// Fixed-point iteration from `init`. Stops when the largest center
/// coordinate change drops below tol or after max_iters updates. The
/// returned r is recomputed from the final centers.
ClusterState kmeans_forward(const Tensor& x, const Tensor& init, const ClusterConfig& cfg);

struct ClusterOutput {
  ad::Var mu;
  ad::Var r;
  ClusterState state;
};

/// One update of the iteration built as a differentiable graph, starting from
/// the constant centers `mu_fixed`: r1 from mu_fixed, mu from r1, r from mu.
ClusterOutput unroll_one_update(const ad::Var& x, const Tensor& mu_fixed, const ClusterConfig& cfg);

/// Runs the forward iteration on x.value() and attaches the chosen backward.
ClusterOutput cluster_layer(const ad::Var& x, const Tensor& init, const ClusterConfig& cfg,
                            BackwardMode mode = BackwardMode::approximate);

/// Gradient wrt x of <grad_mu, mu> + <grad_r, r> through the approximate path.
Tensor approx_backward(const Tensor& x, const ClusterState& state, const ClusterConfig& cfg,
                       const Tensor& grad_mu, const Tensor& grad_r);

/// Same quantity through the implicit function theorem at state.mu.
Tensor exact_backward(const Tensor& x, const ClusterState& state, const ClusterConfig& cfg,
                      const Tensor& grad_mu, const Tensor& grad_r);

/// dg/dmu at (mu, x) as a (Kp x Kp) matrix; block (i, k) is dg_i/dmu_k.
Tensor update_jacobian_mu(const Tensor& x, const Tensor& mu, const ClusterConfig& cfg);

/// dg/dx at (mu, x) as a (Kp x np) matrix; block (i, j) is dg_i/dx_j.
Tensor update_jacobian_x(const Tensor& x, const Tensor& mu, const ClusterConfig& cfg);

/// Max column absolute sum.
double matrix_norm_1(const Tensor& a);

struct SeparationDiagnostics {
  double delta = 0.0;  // min over points of the gap to the second-closest center
  double alpha = 0.0;  // min soft cluster mass / n
  double bound = 0.0;  // +inf when not applicable
  bool applicable = false;
  /// Whether every row satisfies ||x_j||_1 <= 1, the premise of the bound.
  bool l1_scaled = false;
  /// ||df/dmu - I||_1 at the state, if requested.
  double measured = -1.0;
  std::vector<double> point_gaps;  // delta_j per point
  std::vector<int> closest;        // c(j)
};

SeparationDiagnostics diagnostics(const Tensor& x, const ClusterState& state,
                                  const ClusterConfig& cfg, bool measure = false);

/// Upper bound on ||df/dmu - I||_1; +inf when beta*delta <= log(2 beta K^2 / alpha).
double separation_bound(double delta, double alpha, double beta, int k);

nlohmann::json to_json(const ClusterState& state);

}  // namespace dfl
