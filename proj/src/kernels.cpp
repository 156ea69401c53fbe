#include "dfl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <omp.h>

namespace dfl::kernels {
namespace {

void require_inner(std::size_t lhs, std::size_t rhs, const Tensor& a, const Tensor& b,
                   const char* what) {
  if (lhs != rhs) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a) +
                                " vs " + shape_string(b));
  }
}

std::vector<double> row_norms(const Tensor& a, double eps) {
  std::vector<double> norms(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += v * v;
    norms[i] = std::max(std::sqrt(s), eps);
  }
  return norms;
}

// Tail value Q_i for one node: expected distance contributed by positions
// after i, given nothing up to and including i was selected.
template <typename XAt>
void tail_values(const XAt& x_at, const double* d, std::size_t n, double empty_distance,
                 double* q) {
  q[n - 1] = empty_distance;
  for (std::size_t i = n - 1; i-- > 0;) {
    const double xi = x_at(i + 1);
    q[i] = d[i + 1] * xi + (1.0 - xi) * q[i + 1];
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------
namespace serial {

Tensor gemm(const Tensor& a, const Tensor& b) {
  require_inner(a.cols(), b.rows(), a, b, "gemm");
  Tensor c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Tensor gemm_tn(const Tensor& a, const Tensor& b) {
  require_inner(a.rows(), b.rows(), a, b, "gemm_tn");
  Tensor c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) s += a(k, i) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Tensor gemm_nt(const Tensor& a, const Tensor& b) {
  require_inner(a.cols(), b.cols(), a, b, "gemm_nt");
  Tensor c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  return c;
}

Tensor row_softmax(const Tensor& a, double scale) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.cols(); ++j) mx = std::max(mx, scale * a(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out(i, j) = std::exp(scale * a(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) /= z;
  }
  return out;
}

Tensor pairwise_cosine(const Tensor& a, const Tensor& b, double eps) {
  require_inner(a.cols(), b.cols(), a, b, "pairwise_cosine");
  Tensor out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        dot += a(i, k) * b(j, k);
        na += a(i, k) * a(i, k);
        nb += b(j, k) * b(j, k);
      }
      out(i, j) = dot / (std::max(std::sqrt(na), eps) * std::max(std::sqrt(nb), eps));
    }
  return out;
}

Tensor column_sums(const Tensor& a) {
  Tensor out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  return out;
}

std::vector<double> expected_min_distance(std::span<const double> x, const SortedDistances& t) {
  std::vector<double> e(t.n, 0.0);
  for (std::size_t v = 0; v < t.n; ++v) {
    double none_yet = 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < t.n; ++i) {
      const double xi = x[t.order[v * t.n + i]];
      acc += t.dist[v * t.n + i] * xi * none_yet;
      none_yet *= 1.0 - xi;
    }
    e[v] = acc + t.empty_distance * none_yet;
  }
  return e;
}

std::vector<double> expected_min_distance_grad(std::span<const double> x,
                                               const SortedDistances& t,
                                               std::span<const double> upstream) {
  std::vector<double> grad(t.n, 0.0);
  std::vector<double> q(t.n);
  for (std::size_t v = 0; v < t.n; ++v) {
    const std::int32_t* ord = &t.order[v * t.n];
    const double* d = &t.dist[v * t.n];
    tail_values([&](std::size_t i) { return x[ord[i]]; }, d, t.n, t.empty_distance, q.data());
    double none_yet = 1.0;
    for (std::size_t i = 0; i < t.n; ++i) {
      grad[ord[i]] += upstream[v] * none_yet * (d[i] - q[i]);
      none_yet *= 1.0 - x[ord[i]];
    }
  }
  return grad;
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP versions
// ---------------------------------------------------------------------------
namespace parallel {

// i-k-j order; zero entries of `a` are skipped, which makes products with the
// (mostly empty) propagation matrix cost O(n^2 + nnz*cols) instead of O(n^2*cols).
Tensor gemm(const Tensor& a, const Tensor& b) {
  require_inner(a.cols(), b.rows(), a, b, "gemm");
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  Tensor c(n, m);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static) if (n * inner * m > 32768)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    double* crow = pc + i * m;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = pa[i * inner + k];
      if (aik == 0.0) continue;
      const double* brow = pb + k * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// Each thread owns a band of output rows (columns of a), so no reduction is
// needed.
Tensor gemm_tn(const Tensor& a, const Tensor& b) {
  require_inner(a.rows(), b.rows(), a, b, "gemm_tn");
  const std::size_t outer = a.rows(), n = a.cols(), m = b.cols();
  Tensor c(n, m);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel if (outer * n * m > 32768)
  {
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      double* crow = pc + i * m;
      for (std::size_t k = 0; k < outer; ++k) {
        const double aki = pa[k * n + i];
        if (aki == 0.0) continue;
        const double* brow = pb + k * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] += aki * brow[j];
      }
    }
  }
  return c;
}

Tensor gemm_nt(const Tensor& a, const Tensor& b) {
  require_inner(a.cols(), b.cols(), a, b, "gemm_nt");
  const std::size_t n = a.rows(), inner = a.cols(), m = b.rows();
  Tensor c(n, m);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static) if (n * inner * m > 32768)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const double* arow = pa + i * inner;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = pb + j * inner;
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
      pc[i * m + j] = s;
    }
  }
  return c;
}

Tensor row_softmax(const Tensor& a, double scale) {
  const std::size_t n = a.rows(), m = a.cols();
  Tensor out(n, m);
#pragma omp parallel for schedule(static) if (n * m > 16384)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto in = a.row(i);
    auto o = out.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, scale * in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      o[j] = std::exp(scale * in[j] - mx);
      z += o[j];
    }
    const double inv = 1.0 / z;
    for (std::size_t j = 0; j < m; ++j) o[j] *= inv;
  }
  return out;
}

Tensor pairwise_cosine(const Tensor& a, const Tensor& b, double eps) {
  Tensor out = gemm_nt(a, b);
  const auto na = row_norms(a, eps);
  const auto nb = row_norms(b, eps);
  const std::size_t n = out.rows(), m = out.cols();
#pragma omp parallel for schedule(static) if (n * m > 16384)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) /= na[i] * nb[j];
  return out;
}

Tensor column_sums(const Tensor& a) {
  const std::size_t n = a.rows(), m = a.cols();
  const bool par = n * m > 65536;
  const int threads = par ? omp_get_max_threads() : 1;
  std::vector<std::vector<double>> partial(threads, std::vector<double>(m, 0.0));
#pragma omp parallel num_threads(threads) if (par)
  {
    auto& local = partial[omp_get_thread_num()];
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const auto r = a.row(i);
      for (std::size_t j = 0; j < m; ++j) local[j] += r[j];
    }
  }
  Tensor out(1, m);
  for (const auto& local : partial)
    for (std::size_t j = 0; j < m; ++j) out[j] += local[j];
  return out;
}

std::vector<double> expected_min_distance(std::span<const double> x, const SortedDistances& t) {
  const std::size_t n = t.n;
  std::vector<double> e(n, 0.0);
#pragma omp parallel for schedule(static) if (n > 128)
  for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(n); ++v) {
    const std::int32_t* ord = &t.order[v * n];
    const double* d = &t.dist[v * n];
    double none_yet = 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n && none_yet != 0.0; ++i) {
      const double xi = x[ord[i]];
      acc += d[i] * xi * none_yet;
      none_yet *= 1.0 - xi;
    }
    e[v] = acc + t.empty_distance * none_yet;
  }
  return e;
}

std::vector<double> expected_min_distance_grad(std::span<const double> x,
                                               const SortedDistances& t,
                                               std::span<const double> upstream) {
  const std::size_t n = t.n;
  const bool par = n > 128;
  const int threads = par ? omp_get_max_threads() : 1;
  std::vector<std::vector<double>> partial(threads, std::vector<double>(n, 0.0));
#pragma omp parallel num_threads(threads) if (par)
  {
    auto& local = partial[omp_get_thread_num()];
    std::vector<double> q(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(n); ++v) {
      if (upstream[v] == 0.0) continue;
      const std::int32_t* ord = &t.order[v * n];
      const double* d = &t.dist[v * n];
      tail_values([&](std::size_t i) { return x[ord[i]]; }, d, n, t.empty_distance, q.data());
      double none_yet = upstream[v];
      for (std::size_t i = 0; i < n && none_yet != 0.0; ++i) {
        local[ord[i]] += none_yet * (d[i] - q[i]);
        none_yet *= 1.0 - x[ord[i]];
      }
    }
  }
  std::vector<double> grad(n, 0.0);
  for (const auto& local : partial)
    for (std::size_t i = 0; i < n; ++i) grad[i] += local[i];
  return grad;
}

}  // namespace parallel
}  // namespace dfl::kernels
