#include "dfl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace dfl::ad {
namespace {

void require_shape(const Tensor& a, const Tensor& b, const char* what) {
  require_same_shape(a, b, what);
}

Tensor map(const Tensor& a, double (*f)(double)) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->op = "parameter";
  return Var(std::move(n));
}

void accumulate(Node& node, const Tensor& g) {
  if (!node.requires_grad) return;
  if (node.grad.empty()) {
    require_shape(node.value, g, "gradient accumulation");
    node.grad = g;
  } else {
    node.grad += g;
  }
}

Var make_op(const char* op, Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  n->requires_grad = std::any_of(parents.begin(), parents.end(),
                                 [](const Var& p) { return p.requires_grad(); });
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

void backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_string(loss.value()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  accumulate(*loss.node(), Tensor(1, 1, 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

// -- primitives --------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tensor out = kernels::gemm(a.value(), b.value());
  return make_op("matmul", std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) accumulate(pa, kernels::gemm_nt(self.grad, pb.value));
    if (pb.requires_grad) accumulate(pb, kernels::gemm_tn(pa.value, self.grad));
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  Tensor out = kernels::gemm_nt(a.value(), b.value());
  return make_op("matmul_nt", std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) accumulate(pa, kernels::gemm(self.grad, pb.value));
    if (pb.requires_grad) accumulate(pb, kernels::gemm_tn(self.grad, pa.value));
  });
}

Var transpose(const Var& a) {
  return make_op("transpose", a.value().transposed(), {a}, [](Node& self) {
    accumulate(*self.parents[0], self.grad.transposed());
  });
}

Var add(const Var& a, const Var& b) {
  require_shape(a.value(), b.value(), "add");
  return make_op("add", a.value() + b.value(), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_shape(a.value(), b.value(), "sub");
  return make_op("sub", a.value() - b.value(), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], self.grad * -1.0);
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("add_row: shape mismatch " + shape_string(a.value()) + " vs " +
                                shape_string(row.value()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += row.value()[j];
  return make_op("add_row", std::move(out), {a, row}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], kernels::column_sums(self.grad));
  });
}

Var mul(const Var& a, const Var& b) {
  require_shape(a.value(), b.value(), "mul");
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_op("mul", std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor g(self.grad.rows(), self.grad.cols());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * pb.value[i];
      accumulate(pa, g);
    }
    if (pb.requires_grad) {
      Tensor g(self.grad.rows(), self.grad.cols());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * pa.value[i];
      accumulate(pb, g);
    }
  });
}

Var scale(const Var& a, double s) {
  return make_op("scale", a.value() * s, {a},
                 [s](Node& self) { accumulate(*self.parents[0], self.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v += s;
  return make_op("add_scalar", std::move(out), {a},
                 [](Node& self) { accumulate(*self.parents[0], self.grad); });
}

Var div_rows(const Var& a, const Var& divisor) {
  if (divisor.cols() != 1 || divisor.rows() != a.rows()) {
    throw std::invalid_argument("div_rows: shape mismatch " + shape_string(a.value()) + " vs " +
                                shape_string(divisor.value()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v /= divisor.value()[i];
  return make_op("div_rows", std::move(out), {a, divisor}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pd = *self.parents[1];
    if (pa.requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (double& v : g.row(i)) v /= pd.value[i];
      accumulate(pa, g);
    }
    if (pd.requires_grad) {
      Tensor g(pd.value.rows(), 1);
      for (std::size_t i = 0; i < pa.value.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < pa.value.cols(); ++j) s += self.grad(i, j) * pa.value(i, j);
        g[i] = -s / (pd.value[i] * pd.value[i]);
      }
      accumulate(pd, g);
    }
  });
}

Var rowsum(const Var& a) {
  Tensor out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double v : a.value().row(i)) out[i] += v;
  return make_op("rowsum", std::move(out), {a}, [](Node& self) {
    const Tensor& pv = self.parents[0]->value;
    Tensor g(pv.rows(), pv.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (double& v : g.row(i)) v = self.grad[i];
    accumulate(*self.parents[0], g);
  });
}

Var colsum(const Var& a) {
  return make_op("colsum", kernels::column_sums(a.value()), {a}, [](Node& self) {
    const Tensor& pv = self.parents[0]->value;
    Tensor g(pv.rows(), pv.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) = self.grad[j];
    accumulate(*self.parents[0], g);
  });
}

Var sum(const Var& a) {
  return make_op("sum", Tensor(1, 1, a.value().sum()), {a}, [](Node& self) {
    const Tensor& pv = self.parents[0]->value;
    accumulate(*self.parents[0], Tensor(pv.rows(), pv.cols(), self.grad[0]));
  });
}

Var sigmoid(const Var& a) {
  Tensor out = map(a.value(), sigmoid_scalar);
  return make_op("sigmoid", std::move(out), {a}, [](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= self.value[i] * (1.0 - self.value[i]);
    accumulate(*self.parents[0], g);
  });
}

Var exp(const Var& a) {
  Tensor out = map(a.value(), [](double v) { return std::exp(v); });
  return make_op("exp", std::move(out), {a}, [](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= self.value[i];
    accumulate(*self.parents[0], g);
  });
}

Var log(const Var& a) {
  Tensor out = map(a.value(), [](double v) { return std::log(v); });
  return make_op("log", std::move(out), {a}, [](Node& self) {
    Tensor g = self.grad;
    const Tensor& pv = self.parents[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] /= pv[i];
    accumulate(*self.parents[0], g);
  });
}

Var relu(const Var& a) {
  Tensor out = map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; });
  return make_op("relu", std::move(out), {a}, [](Node& self) {
    Tensor g = self.grad;
    const Tensor& pv = self.parents[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(pv[i] > 0.0)) g[i] = 0.0;
    accumulate(*self.parents[0], g);
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::clamp(v, lo, hi);
  return make_op("clamp", std::move(out), {a}, [lo, hi](Node& self) {
    Tensor g = self.grad;
    const Tensor& pv = self.parents[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (pv[i] <= lo || pv[i] >= hi) g[i] = 0.0;
    accumulate(*self.parents[0], g);
  });
}

Var softmax_rows(const Var& a, double temperature) {
  Tensor out = kernels::row_softmax(a.value(), temperature);
  return make_op("softmax_rows", std::move(out), {a}, [temperature](Node& self) {
    const Tensor& y = self.value;
    Tensor g(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += self.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j)
        g(i, j) = temperature * y(i, j) * (self.grad(i, j) - dot);
    }
    accumulate(*self.parents[0], g);
  });
}

Var softmin_rows(const Var& a, double beta) { return softmax_rows(a, -beta); }

Var l2_normalize_rows(const Var& a, double eps) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  std::vector<double> norms(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
    const double denom = std::max(norms[i], eps);
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) / denom;
  }
  return make_op("l2_normalize_rows", std::move(out), {a}, [norms, eps](Node& self) {
    const Tensor& y = self.value;
    Tensor g(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i) {
      if (norms[i] <= eps) {
        for (std::size_t j = 0; j < y.cols(); ++j) g(i, j) = self.grad(i, j) / eps;
        continue;
      }
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += self.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j)
        g(i, j) = (self.grad(i, j) - y(i, j) * dot) / norms[i];
    }
    accumulate(*self.parents[0], g);
  });
}

Var cosine_similarity(const Var& a, const Var& b, double eps) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("cosine_similarity: shape mismatch " + shape_string(a.value()) +
                                " vs " + shape_string(b.value()));
  }
  return matmul_nt(l2_normalize_rows(a, eps), l2_normalize_rows(b, eps));
}

Var dropout(const Var& a, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
  if (p == 0.0) return a;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - p);
  Tensor mask(a.rows(), a.cols());
  const double inv = 1.0 / (1.0 - p);
  for (double& m : mask.values()) m = keep(rng) ? inv : 0.0;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op("dropout", std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
    accumulate(*self.parents[0], g);
  });
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("concat_cols: shape mismatch " + shape_string(a.value()) +
                                " vs " + shape_string(b.value()));
  }
  const std::size_t ca = a.cols(), cb = b.cols();
  Tensor out(a.rows(), ca + cb);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.value().row(i).begin(), a.value().row(i).end(), out.row(i).begin());
    std::copy(b.value().row(i).begin(), b.value().row(i).end(), out.row(i).begin() + ca);
  }
  return make_op("concat_cols", std::move(out), {a, b}, [ca, cb](Node& self) {
    Tensor ga(self.grad.rows(), ca), gb(self.grad.rows(), cb);
    for (std::size_t i = 0; i < self.grad.rows(); ++i) {
      for (std::size_t j = 0; j < ca; ++j) ga(i, j) = self.grad(i, j);
      for (std::size_t j = 0; j < cb; ++j) gb(i, j) = self.grad(i, ca + j);
    }
    accumulate(*self.parents[0], ga);
    accumulate(*self.parents[1], gb);
  });
}

Var concat_rows(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("concat_rows: shape mismatch " + shape_string(a.value()) +
                                " vs " + shape_string(b.value()));
  }
  std::vector<double> data(a.value().values().begin(), a.value().values().end());
  data.insert(data.end(), b.value().values().begin(), b.value().values().end());
  const std::size_t ra = a.rows(), rb = b.rows(), c = a.cols();
  return make_op("concat_rows", Tensor(ra + rb, c, std::move(data)), {a, b},
                 [ra, rb, c](Node& self) {
                   const double* g = self.grad.data();
                   accumulate(*self.parents[0], Tensor(ra, c, std::vector<double>(g, g + ra * c)));
                   accumulate(*self.parents[1],
                              Tensor(rb, c, std::vector<double>(g + ra * c, g + (ra + rb) * c)));
                 });
}

Var detach(const Var& a) { return constant(a.value()); }

Var budget_rescale(const Var& x, double budget) {
  const double total = x.value().sum();
  if (total <= budget) return x;
  Tensor out = x.value() * (budget / total);
  return make_op("budget_rescale", std::move(out), {x}, [budget, total](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    double gx = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) gx += self.grad[i] * xv[i];
    Tensor g(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = budget / total * self.grad[i] - budget / (total * total) * gx;
    accumulate(*self.parents[0], g);
  });
}

Var pair_dot(const Var& z, std::span<const std::pair<int, int>> pairs) {
  const Tensor& zv = z.value();
  Tensor out(pairs.size(), 1);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [u, v] = pairs[e];
    double s = 0.0;
    for (std::size_t k = 0; k < zv.cols(); ++k) s += zv(u, k) * zv(v, k);
    out[e] = s;
  }
  std::vector<std::pair<int, int>> kept(pairs.begin(), pairs.end());
  return make_op("pair_dot", std::move(out), {z}, [kept = std::move(kept)](Node& self) {
    const Tensor& zv = self.parents[0]->value;
    Tensor g(zv.rows(), zv.cols());
    for (std::size_t e = 0; e < kept.size(); ++e) {
      const auto [u, v] = kept[e];
      const double ge = self.grad[e];
      for (std::size_t k = 0; k < zv.cols(); ++k) {
        g(u, k) += ge * zv(v, k);
        g(v, k) += ge * zv(u, k);
      }
    }
    accumulate(*self.parents[0], g);
  });
}

Var bce_with_logits(const Var& logits, std::span<const double> labels) {
  const Tensor& s = logits.value();
  if (s.size() != labels.size()) {
    throw std::invalid_argument("bce_with_logits: " + std::to_string(labels.size()) +
                                " labels for logits " + shape_string(s));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    // log(1 + exp(-|s|)) + max(s, 0) - s*y
    total += std::log1p(std::exp(-std::abs(s[i]))) + std::max(s[i], 0.0) - s[i] * labels[i];
  }
  const double count = static_cast<double>(s.size());
  std::vector<double> y(labels.begin(), labels.end());
  return make_op("bce_with_logits", Tensor(1, 1, total / count), {logits},
                 [y = std::move(y), count](Node& self) {
                   const Tensor& sv = self.parents[0]->value;
                   Tensor g(sv.rows(), sv.cols());
                   for (std::size_t i = 0; i < g.size(); ++i)
                     g[i] = self.grad[0] * (sigmoid_scalar(sv[i]) - y[i]) / count;
                   accumulate(*self.parents[0], g);
                 });
}

Var expected_min_distance(const Var& x, const kernels::SortedDistances& table) {
  if (x.value().size() != table.n) {
    throw std::invalid_argument("expected_min_distance: " + shape_string(x.value()) +
                                " probabilities for a table over " + std::to_string(table.n) +
                                " nodes");
  }
  auto e = kernels::expected_min_distance(x.value().values(), table);
  const auto* tp = &table;  // the table must outlive the graph
  return make_op("expected_min_distance", Tensor(1, table.n, std::move(e)), {x},
                 [tp](Node& self) {
                   const Tensor& xv = self.parents[0]->value;
                   auto g = kernels::expected_min_distance_grad(xv.values(), *tp,
                                                                self.grad.values());
                   accumulate(*self.parents[0], Tensor(xv.rows(), xv.cols(), std::move(g)));
                 });
}

}  // namespace dfl::ad
