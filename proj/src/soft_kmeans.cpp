#include "dfl/soft_kmeans.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dfl {
namespace {

// Quantities shared by the Jacobians, evaluated at (mu, x).
struct UpdateTerms {
  std::size_t n, k, p;
  Tensor xhat, muhat;             // unit rows
  std::vector<double> xnorm, munorm;
  Tensor cos;                     // n x K
  Tensor r;                       // n x K
  std::vector<double> mass;       // R_i
  Tensor g;                       // K x p, one update from mu
};

std::vector<double> floored_norms(const Tensor& a, const ClusterConfig& cfg, const char* what) {
  std::vector<double> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += v * v;
    out[i] = std::sqrt(s);
    if (out[i] <= cfg.eps) {
      if (!cfg.eps_guard)
        throw std::domain_error(std::string(what) + ": zero-norm row " + std::to_string(i));
      out[i] = cfg.eps;
    }
  }
  return out;
}

Tensor unit_rows(const Tensor& a, const std::vector<double>& norms) {
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double& v : out.row(i)) v /= norms[i];
  return out;
}

Tensor weighted_means(const Tensor& x, const Tensor& r, std::vector<double>& mass) {
  mass.assign(r.cols(), 0.0);
  Tensor c = kernels::gemm_tn(r, x);
  const Tensor col = kernels::column_sums(r);
  for (std::size_t i = 0; i < r.cols(); ++i) {
    mass[i] = col[i];
    if (mass[i] > 0.0)
      for (double& v : c.row(i)) v /= mass[i];
  }
  return c;
}

UpdateTerms update_terms(const Tensor& x, const Tensor& mu, const ClusterConfig& cfg) {
  UpdateTerms t;
  t.n = x.rows();
  t.k = mu.rows();
  t.p = x.cols();
  t.xnorm = floored_norms(x, cfg, "distance_matrix");
  t.munorm = floored_norms(mu, cfg, "distance_matrix");
  t.xhat = unit_rows(x, t.xnorm);
  t.muhat = unit_rows(mu, t.munorm);
  t.cos = kernels::gemm_nt(t.xhat, t.muhat);
  t.r = kernels::row_softmax(t.cos, cfg.beta);
  t.g = weighted_means(x, t.r, t.mass);
  return t;
}

// d r_ji / d x_j for every i, as a K x p block.
Tensor assignment_grad_x(const UpdateTerms& t, std::size_t j, double beta) {
  // dcos_jk/dx_j = (muhat_k - cos_jk xhat_j) / |x_j|
  std::vector<double> avg(t.p, 0.0);
  Tensor dcos(t.k, t.p);
  for (std::size_t k = 0; k < t.k; ++k)
    for (std::size_t a = 0; a < t.p; ++a) {
      dcos(k, a) = (t.muhat(k, a) - t.cos(j, k) * t.xhat(j, a)) / t.xnorm[j];
      avg[a] += t.r(j, k) * dcos(k, a);
    }
  Tensor out(t.k, t.p);
  for (std::size_t i = 0; i < t.k; ++i)
    for (std::size_t a = 0; a < t.p; ++a) out(i, a) = beta * t.r(j, i) * (dcos(i, a) - avg[a]);
  return out;
}

ad::Var implicit_centers(const ad::Var& x, const ClusterState& state, const ClusterConfig& cfg) {
  return ad::make_op("implicit_centers", state.mu, {x}, [mu = state.mu, cfg](ad::Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const UpdateTerms t = update_terms(xv, mu, cfg);
    const std::size_t kp = t.k * t.p;

    const Tensor gmu = update_jacobian_mu(xv, mu, cfg);
    Eigen::MatrixXd a(kp, kp);
    for (std::size_t i = 0; i < kp; ++i)
      for (std::size_t j = 0; j < kp; ++j) a(i, j) = (i == j ? 1.0 : 0.0) - gmu(i, j);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a.transpose());
    if (!lu.isInvertible()) {
      throw SingularSystemError(
          "exact backward: I - dg/dmu is singular at this state; use the approximate backward");
    }
    const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(self.grad.data(), kp);
    const Eigen::VectorXd w = lu.solve(rhs);

    Tensor gx(t.n, t.p);
    for (std::size_t j = 0; j < t.n; ++j) {
      const Tensor dr = assignment_grad_x(t, j, cfg.beta);
      for (std::size_t i = 0; i < t.k; ++i) {
        if (t.mass[i] <= 0.0) continue;
        double proj = 0.0;
        for (std::size_t a2 = 0; a2 < t.p; ++a2) proj += (xv(j, a2) - t.g(i, a2)) * w(i * t.p + a2);
        for (std::size_t a2 = 0; a2 < t.p; ++a2)
          gx(j, a2) += (t.r(j, i) * w(i * t.p + a2) + dr(i, a2) * proj) / t.mass[i];
      }
    }
    ad::accumulate(*self.parents[0], gx);
  });
}

double grad_objective_x(const ClusterOutput& out, const ad::Var& x, const Tensor& grad_mu,
                        const Tensor& grad_r, Tensor& result) {
  require_same_shape(out.mu.value(), grad_mu, "cluster backward (mu)");
  require_same_shape(out.r.value(), grad_r, "cluster backward (r)");
  const ad::Var loss = ad::add(ad::sum(ad::mul(out.mu, ad::constant(grad_mu))),
                               ad::sum(ad::mul(out.r, ad::constant(grad_r))));
  ad::backward(loss);
  result = x.grad();
  return loss.value()[0];
}

}  // namespace

void ClusterConfig::validate() const {
  if (k < 1) throw std::invalid_argument("ClusterConfig: K must be >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("ClusterConfig: beta must be > 0");
  if (max_iters < 0) throw std::invalid_argument("ClusterConfig: max_iters must be >= 0");
  if (!(tol >= 0.0)) throw std::invalid_argument("ClusterConfig: tol must be >= 0");
}

Tensor distance_matrix(const Tensor& x, const Tensor& mu, const ClusterConfig& cfg) {
  if (x.cols() != mu.cols()) {
    throw std::invalid_argument("distance_matrix: shape mismatch " + shape_string(x) + " vs " +
                                shape_string(mu));
  }
  const auto xn = floored_norms(x, cfg, "distance_matrix");
  const auto mn = floored_norms(mu, cfg, "distance_matrix");
  Tensor d = kernels::gemm_nt(x, mu);
  for (std::size_t j = 0; j < d.rows(); ++j)
    for (std::size_t k = 0; k < d.cols(); ++k) d(j, k) = -d(j, k) / (xn[j] * mn[k]);
  return d;
}

ad::Var distance_matrix(const ad::Var& x, const ad::Var& mu, const ClusterConfig& cfg) {
  if (!cfg.eps_guard) {
    floored_norms(x.value(), cfg, "distance_matrix");
    floored_norms(mu.value(), cfg, "distance_matrix");
  }
  return ad::scale(ad::cosine_similarity(x, mu, cfg.eps), -1.0);
}

Tensor kmeanspp_init(const Tensor& x, int k, std::uint64_t seed) {
  const std::size_t n = x.rows();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("kmeanspp_init: need 1 <= K <= n");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Tensor xhat = unit_rows(x, floored_norms(x, ClusterConfig{}, "kmeanspp_init"));

  std::vector<std::size_t> chosen{static_cast<std::size_t>(unit(rng) * n) % n};
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (chosen.size() < static_cast<std::size_t>(k)) {
    const std::size_t last = chosen.back();
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double c = 0.0;
      for (std::size_t a = 0; a < x.cols(); ++a) c += xhat(j, a) * xhat(last, a);
      const double d = std::max(0.0, 1.0 - c);
      d2[j] = std::min(d2[j], d * d);
      total += d2[j];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      // Every point coincides with a chosen center; take the next unused index.
      while (std::find(chosen.begin(), chosen.end(), pick) != chosen.end()) ++pick;
    } else {
      double target = unit(rng) * total;
      pick = n - 1;
      for (std::size_t j = 0; j < n; ++j) {
        target -= d2[j];
        if (target < 0.0 && d2[j] > 0.0) {
          pick = j;
          break;
        }
      }
    }
    chosen.push_back(pick);
  }
  Tensor mu(chosen.size(), x.cols());
  for (std::size_t i = 0; i < chosen.size(); ++i)
    std::copy(x.row(chosen[i]).begin(), x.row(chosen[i]).end(), mu.row(i).begin());
  return mu;
}

Tensor soft_assign(const Tensor& x, const Tensor& mu, const ClusterConfig& cfg) {
  Tensor d = distance_matrix(x, mu, cfg);
  return kernels::row_softmax(d, -cfg.beta);
}

ClusterState kmeans_forward(const Tensor& x, const Tensor& init, const ClusterConfig& cfg) {
  cfg.validate();
  if (init.rows() != static_cast<std::size_t>(cfg.k) || init.cols() != x.cols()) {
    throw std::invalid_argument("kmeans_forward: init " + shape_string(init) + " for K=" +
                                std::to_string(cfg.k) + " and data " + shape_string(x));
  }
  if (static_cast<std::size_t>(cfg.k) > x.rows())
    throw std::invalid_argument("kmeans_forward: K exceeds the number of points");

  ClusterState s;
  s.mu = init;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Tensor r = soft_assign(x, s.mu, cfg);
    std::vector<double> mass;
    Tensor next = weighted_means(x, r, mass);

    std::vector<std::size_t> taken;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      if (mass[i] >= 1e-12) continue;
      std::size_t worst = 0;
      double worst_max = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < x.rows(); ++j) {
        if (std::find(taken.begin(), taken.end(), j) != taken.end()) continue;
        const auto row = r.row(j);
        const double m = *std::max_element(row.begin(), row.end());
        if (m < worst_max) {
          worst_max = m;
          worst = j;
        }
      }
      taken.push_back(worst);
      std::copy(x.row(worst).begin(), x.row(worst).end(), next.row(i).begin());
      s.rescued.push_back(static_cast<int>(i));
    }

    double change = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i)
      change = std::max(change, std::abs(next[i] - s.mu[i]));
    s.mu = std::move(next);
    s.iterations_used = it + 1;
    if (change < cfg.tol) {
      s.converged = true;
      break;
    }
  }
  s.r = soft_assign(x, s.mu, cfg);
  return s;
}

ClusterOutput unroll_one_update(const ad::Var& x, const Tensor& mu_fixed, const ClusterConfig& cfg) {
  const ad::Var mu0 = ad::constant(mu_fixed);
  const ad::Var r1 = ad::softmax_rows(ad::cosine_similarity(x, mu0, cfg.eps), cfg.beta);
  const ad::Var mass = ad::transpose(ad::colsum(r1));
  ClusterOutput out;
  out.mu = ad::div_rows(ad::matmul(ad::transpose(r1), x), mass);
  out.r = ad::softmax_rows(ad::cosine_similarity(x, out.mu, cfg.eps), cfg.beta);
  return out;
}

ClusterOutput cluster_layer(const ad::Var& x, const Tensor& init, const ClusterConfig& cfg,
                            BackwardMode mode) {
  ClusterState state = kmeans_forward(x.value(), init, cfg);
  ClusterOutput out;
  if (mode == BackwardMode::approximate) {
    out = unroll_one_update(x, state.mu, cfg);
  } else {
    out.mu = implicit_centers(x, state, cfg);
    out.r = ad::softmax_rows(ad::cosine_similarity(x, out.mu, cfg.eps), cfg.beta);
  }
  out.state = std::move(state);
  return out;
}

Tensor approx_backward(const Tensor& x, const ClusterState& state, const ClusterConfig& cfg,
                       const Tensor& grad_mu, const Tensor& grad_r) {
  const ad::Var xv = ad::parameter(x);
  const ClusterOutput out = unroll_one_update(xv, state.mu, cfg);
  Tensor g;
  grad_objective_x(out, xv, grad_mu, grad_r, g);
  return g;
}

Tensor exact_backward(const Tensor& x, const ClusterState& state, const ClusterConfig& cfg,
                      const Tensor& grad_mu, const Tensor& grad_r) {
  const ad::Var xv = ad::parameter(x);
  ClusterOutput out;
  out.mu = implicit_centers(xv, state, cfg);
  out.r = ad::softmax_rows(ad::cosine_similarity(xv, out.mu, cfg.eps), cfg.beta);
  Tensor g;
  grad_objective_x(out, xv, grad_mu, grad_r, g);
  return g;
}

Tensor update_jacobian_mu(const Tensor& x, const Tensor& mu, const ClusterConfig& cfg) {
  const UpdateTerms t = update_terms(x, mu, cfg);
  const std::size_t kp = t.k * t.p;
  Tensor jac(kp, kp);
  std::vector<double> dcos(t.p), diff(t.p);
  for (std::size_t j = 0; j < t.n; ++j) {
    for (std::size_t k = 0; k < t.k; ++k) {
      // dcos_jk/dmu_k = (xhat_j - cos_jk muhat_k) / |mu_k|
      for (std::size_t b = 0; b < t.p; ++b)
        dcos[b] = (t.xhat(j, b) - t.cos(j, k) * t.muhat(k, b)) / t.munorm[k];
      for (std::size_t i = 0; i < t.k; ++i) {
        if (t.mass[i] <= 0.0) continue;
        const double dr = cfg.beta * t.r(j, i) * ((i == k ? 1.0 : 0.0) - t.r(j, k)) / t.mass[i];
        if (dr == 0.0) continue;
        for (std::size_t a = 0; a < t.p; ++a) diff[a] = (x(j, a) - t.g(i, a)) * dr;
        for (std::size_t a = 0; a < t.p; ++a)
          for (std::size_t b = 0; b < t.p; ++b) jac(i * t.p + a, k * t.p + b) += diff[a] * dcos[b];
      }
    }
  }
  return jac;
}

Tensor update_jacobian_x(const Tensor& x, const Tensor& mu, const ClusterConfig& cfg) {
  const UpdateTerms t = update_terms(x, mu, cfg);
  Tensor jac(t.k * t.p, t.n * t.p);
  for (std::size_t j = 0; j < t.n; ++j) {
    const Tensor dr = assignment_grad_x(t, j, cfg.beta);
    for (std::size_t i = 0; i < t.k; ++i) {
      if (t.mass[i] <= 0.0) continue;
      for (std::size_t a = 0; a < t.p; ++a) {
        jac(i * t.p + a, j * t.p + a) += t.r(j, i) / t.mass[i];
        for (std::size_t b = 0; b < t.p; ++b)
          jac(i * t.p + a, j * t.p + b) += (x(j, a) - t.g(i, a)) * dr(i, b) / t.mass[i];
      }
    }
  }
  return jac;
}

double matrix_norm_1(const Tensor& a) {
  double best = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) s += std::abs(a(r, c));
    best = std::max(best, s);
  }
  return best;
}

double separation_bound(double delta, double alpha, double beta, int k) {
  const double kk = static_cast<double>(k) * k;
  if (!(alpha > 0.0) || !(beta * delta > std::log(2.0 * beta * kk / alpha)))
    return std::numeric_limits<double>::infinity();
  const double tail = std::exp(-delta * beta);
  return tail * kk * beta / (alpha / 2.0 - kk * beta * tail);
}

SeparationDiagnostics diagnostics(const Tensor& x, const ClusterState& state,
                                  const ClusterConfig& cfg, bool measure) {
  SeparationDiagnostics d;
  const Tensor dist = distance_matrix(x, state.mu, cfg);
  const std::size_t n = dist.rows(), k = dist.cols();
  d.delta = std::numeric_limits<double>::infinity();
  d.point_gaps.resize(n);
  d.closest.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (dist(j, c) < dist(j, best)) best = c;
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != best) second = std::min(second, dist(j, c));
    d.closest[j] = static_cast<int>(best);
    d.point_gaps[j] = second - dist(j, best);
    d.delta = std::min(d.delta, d.point_gaps[j]);
  }
  const Tensor r = state.r.empty() ? soft_assign(x, state.mu, cfg) : state.r;
  const Tensor mass = kernels::column_sums(r);
  double min_mass = std::numeric_limits<double>::infinity();
  for (double m : mass.values()) min_mass = std::min(min_mass, m);
  d.alpha = n > 0 ? min_mass / static_cast<double>(n) : 0.0;

  d.l1_scaled = true;
  for (std::size_t j = 0; j < x.rows(); ++j) {
    double s = 0.0;
    for (double v : x.row(j)) s += std::abs(v);
    if (s > 1.0 + 1e-12) d.l1_scaled = false;
  }
  if (k == 1) {
    d.bound = 0.0;
    d.applicable = true;
  } else {
    d.bound = separation_bound(d.delta, d.alpha, cfg.beta, cfg.k);
    d.applicable = std::isfinite(d.bound);
  }
  if (measure) d.measured = matrix_norm_1(update_jacobian_mu(x, state.mu, cfg));
  return d;
}

nlohmann::json to_json(const ClusterState& state) {
  auto rows = [](const Tensor& t) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < t.rows(); ++i)
      out.push_back(std::vector<double>(t.row(i).begin(), t.row(i).end()));
    return out;
  };
  return {{"mu", rows(state.mu)},
          {"r", rows(state.r)},
          {"iterations_used", state.iterations_used},
          {"converged", state.converged},
          {"rescued", state.rescued}};
}

}  // namespace dfl
