#include "dfl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <stdexcept>

#include "dfl/decisions.hpp"
#include "dfl/soft_kmeans.hpp"

namespace dfl {
namespace {

using ad::Var;

// Weighted sum so every output entry carries a distinct upstream gradient.
Var project(const Var& y, std::uint64_t seed) {
  return ad::sum(ad::mul(y, ad::constant(random_tensor(y.rows(), y.cols(), seed ^ 0xabcdefULL))));
}

CheckCase unary(const std::string& name, std::size_t rows, std::size_t cols, double lo, double hi,
                std::function<Var(const Var&, std::uint64_t)> op) {
  CheckCase c{"tensor_ad", name, 20, 1e-5, {}};
  c.run = [=](std::uint64_t seed) {
    return gradient_error([&](const std::vector<Var>& in) { return project(op(in[0], seed), seed); },
                          {random_tensor(rows, cols, seed, lo, hi)});
  };
  return c;
}

CheckCase binary(const std::string& name, std::size_t r1, std::size_t c1, std::size_t r2,
                 std::size_t c2, std::function<Var(const Var&, const Var&)> op) {
  CheckCase c{"tensor_ad", name, 20, 1e-5, {}};
  c.run = [=](std::uint64_t seed) {
    return gradient_error(
        [&](const std::vector<Var>& in) { return project(op(in[0], in[1]), seed); },
        {random_tensor(r1, c1, seed), random_tensor(r2, c2, seed + 1000)});
  };
  return c;
}

// Values bounded away from the kinks of relu/clamp so differences are smooth.
Tensor away_from(Tensor t, std::vector<double> kinks, double margin) {
  for (double& v : t.values())
    for (double k : kinks)
      if (std::abs(v - k) < margin) v = k + (v >= k ? margin : -margin);
  return t;
}

ClusterConfig tight(int k, double beta) {
  ClusterConfig cfg;
  cfg.k = k;
  cfg.beta = beta;
  cfg.max_iters = 20000;
  cfg.tol = 1e-14;
  return cfg;
}

double fixed_point_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int k = 2 + static_cast<int>(rng() % 2);
  const std::size_t p = 2 + rng() % 3;
  const std::size_t n = 8 + rng() % 13;
  const Tensor x = clustered_points(n, p, k, 0.25, seed);
  ClusterConfig cfg = tight(k, 8.0);
  const ClusterState state = kmeans_forward(x, kmeanspp_init(x, k, seed), cfg);
  const Tensor gmu = random_tensor(k, p, seed + 1);
  const Tensor gr = random_tensor(n, k, seed + 2);

  const Tensor analytic = exact_backward(x, state, cfg, gmu, gr);
  auto objective = [&](const Tensor& xs) {
    const ClusterState s = kmeans_forward(xs, state.mu, cfg);
    double total = 0.0;
    for (std::size_t i = 0; i < gmu.size(); ++i) total += gmu[i] * s.mu[i];
    for (std::size_t i = 0; i < gr.size(); ++i) total += gr[i] * s.r[i];
    return total;
  };
  return relative_error(analytic, numeric_gradient(objective, x, 1e-5));
}

}  // namespace

Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor clustered_points(std::size_t n, std::size_t p, int k, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor dirs(k, p);
  for (int c = 0; c < k; ++c) {
    double norm = 0.0;
    for (std::size_t a = 0; a < p; ++a) {
      dirs(c, a) = gauss(rng);
      norm += dirs(c, a) * dirs(c, a);
    }
    for (std::size_t a = 0; a < p; ++a) dirs(c, a) /= std::sqrt(norm);
  }
  Tensor x(n, p);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t a = 0; a < p; ++a) x(j, a) = dirs(j % k, a) + noise * gauss(rng);
  return x;
}

Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor g(x.rows(), x.cols());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Tensor& a, const Tensor& b, double floor) {
  require_same_shape(a, b, "relative_error");
  const double denom = std::max({a.frobenius_norm(), b.frobenius_norm(), floor});
  return (a - b).frobenius_norm() / denom;
}

double gradient_error(const ScalarGraph& f, const std::vector<Tensor>& inputs, double h) {
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(ad::parameter(t));
  const Var loss = f(leaves);
  ad::backward(loss);

  double worst = 0.0;
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    auto scalar = [&](const Tensor& probe) {
      std::vector<Var> consts;
      for (std::size_t i = 0; i < inputs.size(); ++i)
        consts.push_back(ad::constant(i == which ? probe : inputs[i]));
      return f(consts).value()[0];
    };
    worst = std::max(worst,
                     relative_error(leaves[which].grad(), numeric_gradient(scalar, inputs[which], h)));
  }
  return worst;
}

std::vector<CheckCase> tensor_ad_cases() {
  std::vector<CheckCase> cs;
  cs.push_back(binary("matmul", 5, 4, 4, 3, ad::matmul));
  cs.push_back(binary("matmul_nt", 5, 4, 3, 4, ad::matmul_nt));
  cs.push_back(unary("transpose", 3, 4, -1, 1, [](const Var& a, auto) { return ad::transpose(a); }));
  cs.push_back(binary("add", 3, 4, 3, 4, ad::add));
  cs.push_back(binary("sub", 3, 4, 3, 4, ad::sub));
  cs.push_back(binary("add_row", 3, 4, 1, 4, ad::add_row));
  cs.push_back(binary("mul", 3, 4, 3, 4, ad::mul));
  cs.push_back(unary("scale", 3, 4, -1, 1, [](const Var& a, auto) { return ad::scale(a, -2.5); }));
  cs.push_back(unary("add_scalar", 3, 4, -1, 1, [](const Var& a, auto) { return ad::add_scalar(a, 0.7); }));
  cs.push_back(binary("div_rows", 3, 4, 3, 1, [](const Var& a, const Var& b) {
    return ad::div_rows(a, ad::add_scalar(ad::mul(b, b), 0.5));
  }));
  cs.push_back(unary("rowsum", 3, 4, -1, 1, [](const Var& a, auto) { return ad::rowsum(a); }));
  cs.push_back(unary("colsum", 3, 4, -1, 1, [](const Var& a, auto) { return ad::colsum(a); }));
  cs.push_back(unary("sum", 3, 4, -1, 1, [](const Var& a, auto) { return ad::sum(a); }));
  cs.push_back(unary("sigmoid", 3, 4, -3, 3, [](const Var& a, auto) { return ad::sigmoid(a); }));
  cs.push_back(unary("exp", 3, 4, -1, 1, [](const Var& a, auto) { return ad::exp(a); }));
  cs.push_back(unary("log", 3, 4, 0.5, 2, [](const Var& a, auto) { return ad::log(a); }));
  cs.push_back({"tensor_ad", "relu", 20, 1e-5, [](std::uint64_t seed) {
                  return gradient_error(
                      [&](const std::vector<Var>& in) { return project(ad::relu(in[0]), seed); },
                      {away_from(random_tensor(3, 4, seed), {0.0}, 1e-3)});
                }});
  cs.push_back({"tensor_ad", "clamp", 20, 1e-5, [](std::uint64_t seed) {
                  return gradient_error(
                      [&](const std::vector<Var>& in) { return project(ad::clamp(in[0], -0.5, 0.5), seed); },
                      {away_from(random_tensor(3, 4, seed), {-0.5, 0.5}, 1e-3)});
                }});
  cs.push_back(unary("softmax_rows", 4, 3, -1, 1, [](const Var& a, auto) { return ad::softmax_rows(a, 3.0); }));
  cs.push_back(unary("softmin_rows", 4, 3, -1, 1, [](const Var& a, auto) { return ad::softmin_rows(a, 3.0); }));
  cs.push_back(unary("l2_normalize_rows", 4, 3, -1, 1, [](const Var& a, auto) { return ad::l2_normalize_rows(a); }));
  cs.push_back(binary("cosine_similarity", 5, 3, 2, 3, [](const Var& a, const Var& b) {
    return ad::cosine_similarity(a, b);
  }));
  cs.push_back(unary("dropout", 4, 3, -1, 1, [](const Var& a, std::uint64_t s) { return ad::dropout(a, 0.3, s); }));
  cs.push_back(binary("concat_cols", 3, 2, 3, 4, ad::concat_cols));
  cs.push_back(binary("concat_rows", 2, 3, 4, 3, ad::concat_rows));
  cs.push_back({"tensor_ad", "detach", 20, 1e-5, [](std::uint64_t seed) {
                  // The reference holds the detached copy fixed at x0.
                  const Tensor x0 = random_tensor(3, 4, seed);
                  const Var x = ad::parameter(x0);
                  ad::backward(project(ad::add(ad::mul(x, x), ad::detach(x)), seed));
                  auto f = [&](const Tensor& probe) {
                    const Var p = ad::constant(probe);
                    return project(ad::add(ad::mul(p, p), ad::constant(x0)), seed).value()[0];
                  };
                  return relative_error(x.grad(), numeric_gradient(f, x0));
                }});
  cs.push_back(unary("budget_rescale", 1, 6, 0.2, 1, [](const Var& a, auto) { return ad::budget_rescale(a, 2.0); }));
  cs.push_back(unary("pair_dot", 5, 3, -1, 1, [](const Var& a, auto) {
    static const std::vector<std::pair<int, int>> pairs{{0, 1}, {1, 2}, {3, 4}, {0, 4}, {2, 2}};
    return ad::pair_dot(a, pairs);
  }));
  cs.push_back(unary("bce_with_logits", 6, 1, -2, 2, [](const Var& a, auto) {
    static const std::vector<double> labels{1, 0, 1, 1, 0, 0};
    return ad::bce_with_logits(a, labels);
  }));
  cs.push_back(unary("expected_min_distance", 1, 6, 0.05, 0.95, [](const Var& a, auto) {
    static const kernels::SortedDistances table = [] {
      // Path 0-1-2-3-4-5.
      kernels::SortedDistances t;
      t.n = 6;
      t.empty_distance = 6.0;
      for (int v = 0; v < 6; ++v) {
        std::vector<int> idx{0, 1, 2, 3, 4, 5};
        std::stable_sort(idx.begin(), idx.end(),
                         [v](int a2, int b2) { return std::abs(a2 - v) < std::abs(b2 - v); });
        for (int u : idx) {
          t.order.push_back(u);
          t.dist.push_back(std::abs(u - v));
        }
      }
      return t;
    }();
    return ad::expected_min_distance(a, table);
  }));
  return cs;
}

std::vector<CheckCase> softkmeans_cases() {
  std::vector<CheckCase> cs;
  cs.push_back({"softkmeans", "exact_backward_fixed_point", 20, 1e-4, fixed_point_error});
  cs.push_back({"softkmeans", "unroll_one_update", 20, 1e-5, [](std::uint64_t seed) {
                  const Tensor x = clustered_points(12, 3, 3, 0.3, seed);
                  const Tensor mu = kmeanspp_init(x, 3, seed);
                  ClusterConfig cfg;
                  cfg.k = 3;
                  cfg.beta = 10.0;
                  return gradient_error(
                      [&](const std::vector<Var>& in) {
                        const auto out = unroll_one_update(in[0], mu, cfg);
                        return ad::add(project(out.mu, seed), project(out.r, seed + 7));
                      },
                      {x});
                }});
  cs.push_back({"softkmeans", "exact_matches_closed_form_jacobian", 20, 1e-8, [](std::uint64_t seed) {
                  // Dual route: the implicit solve against an explicit dense
                  // (I - dg/dmu)^{-1} dg/dx product.
                  const Tensor x = clustered_points(10, 3, 2, 0.3, seed);
                  ClusterConfig cfg = tight(2, 6.0);
                  const ClusterState s = kmeans_forward(x, kmeanspp_init(x, 2, seed), cfg);
                  const Tensor gmu = random_tensor(2, 3, seed + 3);
                  const Tensor zero_r(x.rows(), 2);
                  const Tensor via_op = exact_backward(x, s, cfg, gmu, zero_r);
                  const Tensor jmu = update_jacobian_mu(x, s.mu, cfg);
                  const Tensor jx = update_jacobian_x(x, s.mu, cfg);
                  const std::size_t kp = jmu.rows();
                  // Solve (I - Jmu)^T w = gmu by Gauss-Jordan on a copy.
                  Tensor aug(kp, kp + 1);
                  for (std::size_t i = 0; i < kp; ++i) {
                    for (std::size_t j = 0; j < kp; ++j) aug(i, j) = (i == j ? 1.0 : 0.0) - jmu(j, i);
                    aug(i, kp) = gmu[i];
                  }
                  for (std::size_t c = 0; c < kp; ++c) {
                    std::size_t piv = c;
                    for (std::size_t r = c + 1; r < kp; ++r)
                      if (std::abs(aug(r, c)) > std::abs(aug(piv, c))) piv = r;
                    for (std::size_t j = 0; j <= kp; ++j) std::swap(aug(c, j), aug(piv, j));
                    for (std::size_t r = 0; r < kp; ++r) {
                      if (r == c) continue;
                      const double f = aug(r, c) / aug(c, c);
                      for (std::size_t j = c; j <= kp; ++j) aug(r, j) -= f * aug(c, j);
                    }
                  }
                  Tensor via_dense(x.rows(), x.cols());
                  for (std::size_t col = 0; col < jx.cols(); ++col) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < kp; ++i) acc += jx(i, col) * aug(i, kp) / aug(i, i);
                    via_dense[col] = acc;
                  }
                  return relative_error(via_op, via_dense);
                }});
  return cs;
}

std::vector<CheckCase> decisions_cases() {
  std::vector<CheckCase> cs;
  cs.push_back({"decisions", "modularity_loss_through_clusters", 20, 1e-4, [](std::uint64_t seed) {
                  const Graph g = generate_sbm({5, 5}, 0.8, 0.1, seed);
                  if (g.num_edges() == 0) return 0.0;
                  const Tensor b = modularity_matrix(g);
                  const Tensor x = clustered_points(10, 3, 2, 0.4, seed);
                  const Tensor mu = kmeanspp_init(x, 2, seed);
                  ClusterConfig cfg;
                  cfg.k = 2;
                  cfg.beta = 5.0;
                  return gradient_error(
                      [&](const std::vector<Var>& in) {
                        const auto out = unroll_one_update(in[0], mu, cfg);
                        return modularity_loss(out.r, b, static_cast<double>(g.num_edges()));
                      },
                      {x}, 1e-6);
                }});
  cs.push_back({"decisions", "facility_loss_through_selection", 20, 1e-4, [](std::uint64_t seed) {
                  Graph g = generate_sbm({5, 5}, 0.7, 0.2, seed);
                  const Subgraph lcc = largest_connected_component(g);
                  const DistanceTable dist = all_pairs_bfs(lcc.graph);
                  const auto table = sort_distances(dist, default_empty_distance(dist));
                  const std::size_t n = static_cast<std::size_t>(lcc.graph.num_nodes());
                  const Tensor x = clustered_points(n, 3, 2, 0.4, seed);
                  const Tensor mu = kmeanspp_init(x, 2, seed);
                  ClusterConfig cfg;
                  cfg.k = 2;
                  cfg.beta = 5.0;
                  SelectionConfig sel;
                  sel.k = 2;
                  sel.eta = 5.0;
                  sel.gamma = 2.0;
                  sel.mapping = SquashMapping::centered;
                  return gradient_error(
                      [&](const std::vector<Var>& in) {
                        const auto out = unroll_one_update(in[0], mu, cfg);
                        const auto s = select_from_clusters(in[0], out.mu, sel);
                        return expected_facility_loss(s.x, table, 2.0);
                      },
                      {x}, 1e-6);
                }});
  return cs;
}

std::vector<CheckCase> gradcheck_cases(const std::string& suite) {
  std::vector<CheckCase> all;
  auto append = [&](std::vector<CheckCase> more) {
    all.insert(all.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  };
  if (suite == "tensor_ad" || suite == "all") append(tensor_ad_cases());
  if (suite == "softkmeans" || suite == "all") append(softkmeans_cases());
  if (suite == "decisions" || suite == "all") append(decisions_cases());
  if (all.empty())
    throw std::invalid_argument("unknown gradcheck suite '" + suite +
                                "' (expected tensor_ad, softkmeans, decisions or all)");
  return all;
}

CheckResult run_case(const CheckCase& c) {
  CheckResult r{c.suite, c.name, c.trials, 0.0, c.tolerance, false};
  for (int t = 0; t < c.trials; ++t) {
    const double e = c.run(static_cast<std::uint64_t>(t) + 1);
    r.max_rel_error = std::isfinite(e) ? std::max(r.max_rel_error, e) : e;
    if (!std::isfinite(e)) break;
  }
  r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error <= c.tolerance;
  return r;
}

void print_report(const std::vector<CheckResult>& results, std::ostream& os) {
  os << std::left << std::setw(12) << "suite" << std::setw(36) << "check" << std::setw(8) << "trials"
     << std::setw(14) << "max_rel_err" << std::setw(10) << "tol" << "result\n";
  for (const auto& r : results) {
    os << std::left << std::setw(12) << r.suite << std::setw(36) << r.name << std::setw(8) << r.trials
       << std::setw(14) << std::scientific << std::setprecision(3) << r.max_rel_error << std::setw(10)
       << std::setprecision(0) << r.tolerance << std::defaultfloat << (r.passed ? "PASS" : "FAIL")
       << '\n';
  }
}

}  // namespace dfl
