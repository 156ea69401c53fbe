#include "dfl/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "dfl/adam.hpp"
#include "dfl/autodiff.hpp"
#include "dfl/decisions.hpp"
#include "dfl/gcn.hpp"
#include "dfl/kernels.hpp"

namespace dfl {
namespace {

std::vector<int> relabel(const std::vector<int>& raw) {
  std::map<int, int> ids;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = ids.try_emplace(raw[i], static_cast<int>(ids.size())).first->second;
  return out;
}

PartitionResult finish(const Graph& g, const std::vector<int>& raw) {
  PartitionResult res;
  res.labels = relabel(raw);
  res.communities = count_communities(res.labels);
  res.modularity = modularity_value(res.labels, g);
  return res;
}

int find_root(std::vector<int>& parent, int v) {
  while (parent[v] != v) v = parent[v] = parent[parent[v]];
  return v;
}

// -- leading eigenvector helpers ---------------------------------------------

struct Split {
  double gain = 0.0;
  std::vector<int> first, second;
};

std::optional<Split> leading_split(const Graph& g, const std::vector<int>& members,
                                   std::vector<int>& local) {
  const std::size_t s = members.size();
  if (s < 2) return std::nullopt;
  const double two_m = 2.0 * static_cast<double>(g.num_edges());
  for (std::size_t i = 0; i < s; ++i) local[members[i]] = static_cast<int>(i);

  std::vector<double> deg(s), inner(s), rowsum(s);
  double group_degree = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    deg[i] = g.degree(members[i]);
    group_degree += deg[i];
  }
  double shift = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    for (int nb : g.neighbors(members[i]))
      if (local[nb] >= 0) inner[i] += 1.0;
    rowsum[i] = inner[i] - deg[i] * group_degree / two_m;
    shift = std::max(shift, inner[i] + deg[i] * group_degree / two_m + std::abs(rowsum[i]));
  }

  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    double dv = 0.0;
    for (std::size_t i = 0; i < s; ++i) dv += deg[i] * v[i];
    for (std::size_t i = 0; i < s; ++i) {
      double acc = 0.0;
      for (int nb : g.neighbors(members[i]))
        if (local[nb] >= 0) acc += v[local[nb]];
      out[i] = acc - deg[i] * dv / two_m - rowsum[i] * v[i];
    }
  };

  std::mt19937_64 rng(s);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> v(s), w(s);
  for (double& x : v) x = unit(rng);
  bool converged = false;
  for (int it = 0; it < 10000 && !converged; ++it) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    apply(v, w);
    double wn = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
      w[i] += shift * v[i];
      wn += w[i] * w[i];
    }
    wn = std::sqrt(wn);
    double diff = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
      w[i] /= wn;
      diff = std::max(diff, std::abs(w[i] - v[i]));
    }
    std::swap(v, w);
    converged = diff < 1e-8;
  }

  std::optional<Split> result;
  if (converged) {
    apply(v, w);
    double lambda = 0.0;
    for (std::size_t i = 0; i < s; ++i) lambda += v[i] * w[i];
    if (lambda > 1e-12) {
      std::vector<double> sign(s);
      for (std::size_t i = 0; i < s; ++i) sign[i] = v[i] >= 0.0 ? 1.0 : -1.0;
      apply(sign, w);
      double quad = 0.0;
      for (std::size_t i = 0; i < s; ++i) quad += sign[i] * w[i];
      Split split;
      split.gain = quad / (2.0 * two_m);
      for (std::size_t i = 0; i < s; ++i)
        (sign[i] > 0 ? split.first : split.second).push_back(members[i]);
      if (split.gain > 1e-12 && !split.first.empty() && !split.second.empty())
        result = std::move(split);
    }
  }
  for (int node : members) local[node] = -1;
  return result;
}

// Modified Gram-Schmidt on the columns; a collapsed column is refilled from
// a seeded generator and orthogonalised again.
void orthonormalize_columns(Tensor& v) {
  const std::size_t n = v.rows(), b = v.cols();
  std::mt19937_64 refill(b);
  std::normal_distribution<double> normal;
  for (std::size_t c = 0; c < b; ++c) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t p = 0; p < c; ++p) {
        double d = 0.0;
        for (std::size_t r = 0; r < n; ++r) d += v(r, p) * v(r, c);
        for (std::size_t r = 0; r < n; ++r) v(r, c) -= d * v(r, p);
      }
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) norm += v(r, c) * v(r, c);
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      for (std::size_t r = 0; r < n; ++r) v(r, c) = normal(refill);
      --c;
      continue;
    }
    for (std::size_t r = 0; r < n; ++r) v(r, c) /= norm;
  }
}

double squared_distance(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return s;
}

}  // namespace

// -- CNM ----------------------------------------------------------------------

CnmResult cnm(const Graph& g, int k) {
  const int n = g.num_nodes();
  if (g.num_edges() == 0) throw std::invalid_argument("cnm: graph has no edges");
  const double two_m = 2.0 * static_cast<double>(g.num_edges());

  std::vector<std::map<int, double>> e(n);
  std::vector<double> a(n);
  std::vector<bool> alive(n, true);
  double q = 0.0;
  for (int v = 0; v < n; ++v) {
    a[v] = g.degree(v) / two_m;
    q -= a[v] * a[v];
    for (int u : g.neighbors(v)) e[v][u] = 1.0 / two_m;
  }

  CnmResult res;
  std::vector<double> level_q{q};
  for (int step = 0; step + 1 < n; ++step) {
    int bi = -1, bj = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (const auto& [j, eij] : e[i]) {
        if (j <= i) continue;
        const double dq = 2.0 * (eij - a[i] * a[j]);
        if (dq > best) {
          best = dq;
          bi = i;
          bj = j;
        }
      }
    }
    // Any pair's gain is at most -2 a_i a_j when they share no edge, so the
    // best unconnected merge joins the two lightest communities. It wins
    // only when strictly better, e.g. isolated nodes once gains turn negative.
    int li = -1, lj = -1;
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      if (li < 0 || a[i] < a[li]) {
        lj = li;
        li = i;
      } else if (lj < 0 || a[i] < a[lj]) {
        lj = i;
      }
    }
    if (li > lj) std::swap(li, lj);
    const auto link = e[li].find(lj);
    const double light = 2.0 * ((link == e[li].end() ? 0.0 : link->second) - a[li] * a[lj]);
    if (light > best) {
      best = light;
      bi = li;
      bj = lj;
    }

    for (const auto& [c, w] : e[bj]) {
      if (c == bi) continue;
      e[bi][c] += w;
      e[c][bi] += w;
      e[c].erase(bj);
    }
    e[bi].erase(bj);
    e[bj].clear();
    a[bi] += a[bj];
    alive[bj] = false;
    q += best;
    res.merges.push_back({bj, bi, best, q});
    level_q.push_back(q);
  }

  int chosen = -1;
  for (int level = 0; level < n; ++level) {
    const int communities = n - level;
    if (k > 0 && communities > k) continue;
    if (chosen < 0 || level_q[level] > level_q[chosen] + 1e-15) chosen = level;
  }
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int s = 0; s < chosen; ++s) parent[res.merges[s].absorbed] = res.merges[s].into;
  std::vector<int> raw(n);
  for (int v = 0; v < n; ++v) raw[v] = find_root(parent, v);

  PartitionResult base = finish(g, raw);
  res.labels = std::move(base.labels);
  res.communities = base.communities;
  res.modularity = base.modularity;
  res.chosen_level = chosen;
  return res;
}

// -- leading eigenvector -------------------------------------------------------

PartitionResult newman_leading_eigenvector(const Graph& g, int k) {
  if (g.num_edges() == 0) throw std::invalid_argument("newman: graph has no edges");
  const int n = g.num_nodes();
  std::vector<std::vector<int>> groups(1);
  groups[0].resize(n);
  std::iota(groups[0].begin(), groups[0].end(), 0);
  std::vector<std::optional<Split>> splits(1);
  std::vector<bool> evaluated(1, false);
  std::vector<int> local(n, -1);

  while (k <= 0 || static_cast<int>(groups.size()) < k) {
    int best = -1;
    for (std::size_t c = 0; c < groups.size(); ++c) {
      if (!evaluated[c]) {
        splits[c] = leading_split(g, groups[c], local);
        evaluated[c] = true;
      }
      if (splits[c] && (best < 0 || splits[c]->gain > splits[best]->gain)) best = static_cast<int>(c);
    }
    if (best < 0) break;
    Split split = std::move(*splits[best]);
    groups[best] = std::move(split.first);
    groups.push_back(std::move(split.second));
    splits[best].reset();
    splits.emplace_back();
    evaluated[best] = false;
    evaluated.push_back(false);
  }

  std::vector<int> raw(n);
  for (std::size_t c = 0; c < groups.size(); ++c)
    for (int v : groups[c]) raw[v] = static_cast<int>(c);
  return finish(g, raw);
}

// -- spectral ----------------------------------------------------------------

std::vector<EigenPair> top_eigenpairs(const BlockOperator& op, std::size_t n, double shift, int count,
                                      double tol, int max_iters) {
  if (count < 1 || static_cast<std::size_t>(count) > n)
    throw std::invalid_argument("top_eigenpairs: need 1 <= count <= n");
  const std::size_t b = std::min(n, static_cast<std::size_t>(count) + 4);
  const double scale = std::max(1.0, shift);

  Tensor v(n, b);
  std::mt19937_64 rng(n * 7919 + static_cast<std::size_t>(count));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (double& x : v.values()) x = unit(rng);
  orthonormalize_columns(v);

  std::vector<double> theta(b);
  for (int it = 1; it <= max_iters; ++it) {
    Tensor w = op(v);
    const bool check = it % 10 == 0 || it == max_iters;
    if (check) {
      // Rayleigh-Ritz on the current block.
      const Tensor h = kernels::gemm_tn(v, w);
      Eigen::MatrixXd hm(b, b);
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) hm(i, j) = 0.5 * (h(i, j) + h(j, i));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hm);
      Tensor q(b, b);
      for (std::size_t c = 0; c < b; ++c) {
        theta[c] = es.eigenvalues()(b - 1 - c);
        for (std::size_t r = 0; r < b; ++r) q(r, c) = es.eigenvectors()(r, b - 1 - c);
      }
      v = kernels::gemm(v, q);
      w = kernels::gemm(w, q);
      double worst = 0.0;
      for (int c = 0; c < count; ++c) {
        double res = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double d = w(r, c) - theta[c] * v(r, c);
          res += d * d;
        }
        worst = std::max(worst, std::sqrt(res));
      }
      if (worst <= tol * scale) {
        std::vector<EigenPair> out;
        for (int c = 0; c < count; ++c) {
          std::vector<double> vec(n);
          for (std::size_t r = 0; r < n; ++r) vec[r] = v(r, c);
          out.push_back({theta[c], std::move(vec)});
        }
        return out;
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += shift * v[i];
    orthonormalize_columns(w);
    v = std::move(w);
  }
  throw std::runtime_error("top_eigenpairs: no convergence for " + std::to_string(count) +
                           " eigenvectors in " + std::to_string(max_iters) + " iterations");
}

std::vector<EigenPair> top_eigenpairs(const Tensor& sym, int count, double tol, int max_iters) {
  const std::size_t n = sym.rows();
  if (sym.cols() != n) throw std::invalid_argument("top_eigenpairs: matrix is not square");
  double shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : sym.row(i)) s += std::abs(v);
    shift = std::max(shift, s);
  }
  return top_eigenpairs([&](const Tensor& v) { return kernels::gemm(sym, v); }, n, shift, count, tol,
                        max_iters);
}

Tensor spectral_features(const Graph& g, int dim, int steps, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(g.num_nodes());
  const std::size_t b = std::min(n, static_cast<std::size_t>(dim));
  std::vector<double> inv_sqrt(n);
  for (std::size_t v = 0; v < n; ++v)
    inv_sqrt[v] = 1.0 / std::sqrt(1.0 + static_cast<double>(g.neighbors(static_cast<int>(v)).size()));

  Tensor v(n, b);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (double& x : v.values()) x = normal(rng);
  orthonormalize_columns(v);
  for (int s = 0; s < steps; ++s) {
    Tensor w(n, b);
    for (std::size_t u = 0; u < n; ++u) {
      const auto src = v.row(u);
      auto dst = w.row(u);
      const double self = inv_sqrt[u] * inv_sqrt[u];
      for (std::size_t c = 0; c < b; ++c) dst[c] = 0.5 * src[c] + 0.5 * self * src[c];
      for (int nb : g.neighbors(static_cast<int>(u))) {
        const double a = 0.5 * inv_sqrt[u] * inv_sqrt[nb];
        const auto other = v.row(static_cast<std::size_t>(nb));
        for (std::size_t c = 0; c < b; ++c) dst[c] += a * other[c];
      }
    }
    orthonormalize_columns(w);
    v = std::move(w);
  }
  const double scale = std::sqrt(static_cast<double>(n));
  for (double& x : v.values()) x *= scale;
  return v;
}

std::vector<int> hard_kmeans(const Tensor& points, int k, int restarts, std::uint64_t seed) {
  const std::size_t n = points.rows();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("hard_kmeans: need 1 <= K <= n");
  std::mt19937_64 master(seed);
  std::vector<int> best_labels;
  double best_inertia = std::numeric_limits<double>::infinity();

  for (int rs = 0; rs < std::max(1, restarts); ++rs) {
    std::mt19937_64 rng(master());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor centers(k, points.cols());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t pick = static_cast<std::size_t>(unit(rng) * n) % n;
    for (int c = 0; c < k; ++c) {
      std::copy(points.row(pick).begin(), points.row(pick).end(), centers.row(c).begin());
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        d2[j] = std::min(d2[j], squared_distance(points, j, centers, c));
        total += d2[j];
      }
      if (total <= 0.0) {
        pick = static_cast<std::size_t>(c + 1) % n;
        continue;
      }
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

    std::vector<int> labels(n, -1);
    double inertia = 0.0;
    for (int it = 0; it < 300; ++it) {
      bool changed = false;
      inertia = 0.0;
      std::vector<double> dist_to_own(n);
      for (std::size_t j = 0; j < n; ++j) {
        int bc = 0;
        double bd = squared_distance(points, j, centers, 0);
        for (int c = 1; c < k; ++c) {
          const double d = squared_distance(points, j, centers, c);
          if (d < bd) {
            bd = d;
            bc = c;
          }
        }
        if (labels[j] != bc) changed = true;
        labels[j] = bc;
        dist_to_own[j] = bd;
        inertia += bd;
      }
      if (!changed && it > 0) break;
      Tensor sums(k, points.cols());
      std::vector<int> sizes(k, 0);
      for (std::size_t j = 0; j < n; ++j) {
        ++sizes[labels[j]];
        for (std::size_t c = 0; c < points.cols(); ++c) sums(labels[j], c) += points(j, c);
      }
      for (int c = 0; c < k; ++c) {
        if (sizes[c] == 0) {
          const auto far = std::max_element(dist_to_own.begin(), dist_to_own.end()) - dist_to_own.begin();
          std::copy(points.row(far).begin(), points.row(far).end(), centers.row(c).begin());
          dist_to_own[far] = 0.0;
          continue;
        }
        for (std::size_t col = 0; col < points.cols(); ++col) centers(c, col) = sums(c, col) / sizes[c];
      }
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_labels = labels;
    }
  }
  return best_labels;
}

std::vector<int> spectral_clustering(const Tensor& modularity, int k, std::uint64_t seed) {
  const auto pairs = top_eigenpairs(modularity, k);
  Tensor emb(modularity.rows(), static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c)
    for (std::size_t i = 0; i < emb.rows(); ++i) emb(i, c) = pairs[c].vector[i];
  return hard_kmeans(emb, k, 20, seed);
}

PartitionResult spectral_clustering_modularity(const Graph& g, int k, std::uint64_t seed) {
  return finish(g, spectral_clustering(modularity_matrix(g), k, seed));
}

// -- facility location ---------------------------------------------------------

std::vector<int> greedy_facility(const DistanceTable& dist, int k) {
  const int n = dist.size();
  if (k < 1) throw std::invalid_argument("greedy_facility: K must be >= 1");
  std::vector<int> chosen;
  std::vector<bool> in(n, false);
  std::vector<std::int32_t> md(n, std::numeric_limits<std::int32_t>::max());
  for (int round = 0; round < std::min(k, n); ++round) {
    int best = -1;
    std::int32_t best_obj = std::numeric_limits<std::int32_t>::max();
    for (int u = 0; u < n; ++u) {
      if (in[u]) continue;
      std::int32_t obj = 0;
      for (int v = 0; v < n && obj < best_obj; ++v) obj = std::max(obj, std::min(md[v], dist.at(v, u)));
      if (obj < best_obj) {
        best_obj = obj;
        best = u;
      }
    }
    if (best < 0) {
      for (int u = 0; u < n; ++u)
        if (!in[u]) {
          best = u;
          break;
        }
    }
    in[best] = true;
    chosen.push_back(best);
    for (int v = 0; v < n; ++v) md[v] = std::min(md[v], dist.at(v, best));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<int> gonzalez(const DistanceTable& dist, int k, std::uint64_t seed) {
  const int n = dist.size();
  if (k < 1) throw std::invalid_argument("gonzalez: K must be >= 1");
  if (n == 0) return {};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> first(0, n - 1);
  std::vector<int> chosen{first(rng)};
  std::vector<bool> in(n, false);
  in[chosen[0]] = true;
  std::vector<std::int32_t> md(n);
  for (int v = 0; v < n; ++v) md[v] = dist.at(v, chosen[0]);
  while (static_cast<int>(chosen.size()) < std::min(k, n)) {
    int far = -1;
    for (int v = 0; v < n; ++v)
      if (!in[v] && (far < 0 || md[v] > md[far])) far = v;
    in[far] = true;
    chosen.push_back(far);
    for (int v = 0; v < n; ++v) md[v] = std::min(md[v], dist.at(v, far));
  }
  return chosen;
}

double brute_force_facility(const DistanceTable& dist, int k) {
  const int n = dist.size();
  const int size = std::min(k, n);
  if (size < 1) throw std::invalid_argument("brute_force_facility: K must be >= 1");
  std::vector<int> pick(size);
  std::iota(pick.begin(), pick.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    best = std::min(best, facility_value(pick, dist));
    int i = size - 1;
    while (i >= 0 && pick[i] == n - size + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < size; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

// -- GCN-e2e -----------------------------------------------------------------

Tensor gcn_e2e(const Graph& g_train, const Tensor& features, int k, Task task, std::uint64_t seed,
               const E2eHyper& hyper) {
  const Tensor adj = normalized_adjacency(g_train);
  const std::size_t out_dim = task == Task::community ? static_cast<std::size_t>(k) : 1;
  GcnParams params = init_gcn_params(features.cols(), hyper.hidden, out_dim, seed, hyper.dropout);
  Adam opt(AdamConfig{.lr = hyper.lr});

  Tensor b;
  kernels::SortedDistances table;
  if (task == Task::community) {
    b = modularity_matrix(g_train);
  } else {
    const DistanceTable dist = all_pairs_bfs(g_train);
    table = sort_distances(dist, default_empty_distance(dist));
  }
  const double m = static_cast<double>(g_train.num_edges());

  auto decide = [&](const ad::Var& out) {
    if (task == Task::community) return ad::softmax_rows(out, 1.0);
    return ad::budget_rescale(ad::transpose(ad::sigmoid(out)), k);
  };
  for (int it = 0; it < hyper.iters; ++it) {
    const GcnOutput out = gcn_forward(adj, features, params, true, seed + 1 + it);
    const ad::Var decision = decide(out.embeddings);
    const ad::Var loss = task == Task::community
                             ? ad::scale(modularity_loss(decision, b, m), -1.0)
                             : expected_facility_loss(decision, table, hyper.facility_temperature);
    if (!std::isfinite(loss.value()[0])) throw std::domain_error("gcn_e2e: loss is not finite");
    ad::backward(loss);
    apply_gradients(opt, params, out);
  }
  const GcnOutput final_out = gcn_forward(adj, features, params, false);
  Tensor decision = decide(final_out.embeddings).value();
  if (task == Task::facility) decision = decision.transposed();
  return decision;
}

std::vector<std::string> baseline_names() {
  return {"cnm", "newman", "sc", "greedy", "gonzalez", "gcn-e2e"};
}

}  // namespace dfl
