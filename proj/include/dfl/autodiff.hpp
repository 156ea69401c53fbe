#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Var is a handle to a node of a dynamically built computation graph. Ops
// record their parents and a local backward rule only when some parent
// requires a gradient, so graphs built purely from constants cost nothing
// beyond the forward values. A graph is confined to one thread.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "dfl/kernels.hpp"
#include "dfl/tensor.hpp"

namespace dfl::ad {

struct Node {
  Tensor value;
  Tensor grad;  // empty until backward reaches the node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // reads grad, accumulates into parents
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  /// Gradient after backward(); a zero tensor of the value's shape if none
  /// reached this node.
  Tensor grad() const;
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  const char* op() const { return node_->op; }
  bool valid() const { return static_cast<bool>(node_); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

/// Adds `g` into the gradient slot of `node` (no-op when the node does not
/// require a gradient). Exposed for custom ops built outside this file.
void accumulate(Node& node, const Tensor& g);

/// Builds a result node from a forward value, parents and a local backward
/// rule. The rule is dropped when no parent requires a gradient.
Var make_op(const char* op, Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward);

/// Reverse topological sweep from a scalar (1x1) loss. Gradients accumulate
/// (+=) across fan-out. Throws std::invalid_argument on a non-scalar loss.
void backward(const Var& loss);

// -- primitives --------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);  // row (1 x cols) broadcast down a
Var mul(const Var& a, const Var& b);        // elementwise
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var div_rows(const Var& a, const Var& divisor);  // divisor (rows x 1)
Var rowsum(const Var& a);                        // rows x 1
Var colsum(const Var& a);                        // 1 x cols
Var sum(const Var& a);                           // 1 x 1
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var relu(const Var& a);
Var clamp(const Var& a, double lo, double hi);

/// Row-wise softmax of temperature * a, computed with the row max subtracted.
Var softmax_rows(const Var& a, double temperature);
/// Row-wise softmin: softmax of -beta * a. beta = 0 gives uniform rows.
Var softmin_rows(const Var& a, double beta);

Var l2_normalize_rows(const Var& a, double eps = 1e-12);
/// Pairwise cosine similarity between rows of a (n x p) and rows of b (k x p).
Var cosine_similarity(const Var& a, const Var& b, double eps = 1e-12);

/// Inverted dropout: zeroes entries with probability p and scales the rest by
/// 1/(1-p). Identity when p == 0.
Var dropout(const Var& a, double p, std::uint64_t seed);

Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const Var& a, const Var& b);
Var detach(const Var& a);

/// If the entries of x sum to more than budget, rescale to budget * x / sum.
Var budget_rescale(const Var& x, double budget);

/// Scores z_u . z_v for each listed pair; result is (pairs x 1).
Var pair_dot(const Var& z, std::span<const std::pair<int, int>> pairs);

/// Mean binary cross-entropy of sigmoid(logits) against 0/1 labels.
Var bce_with_logits(const Var& logits, std::span<const double> labels);

/// Expected distance from every node to a random set drawn from independent
/// inclusion probabilities x (1 x n). Output is (1 x n).
Var expected_min_distance(const Var& x, const kernels::SortedDistances& table);

}  // namespace dfl::ad
