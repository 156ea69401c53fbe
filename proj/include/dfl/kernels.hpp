#pragma once

// Data-parallel inner loops used by the autodiff ops and the losses.
//
// Every kernel exists twice: `serial::` is the plain textbook loop kept as a
// reference for tests and the benchmark, `parallel::` is the OpenMP version
// used by the library. Both must agree to rounding (tests/unit/kernels_test).

#include <cstdint>
#include <span>
#include <vector>

#include "dfl/tensor.hpp"

namespace dfl::kernels {

/// Per-node candidate order for the expected-distance kernel: for node v,
/// `order[v*n + i]` is the i-th closest node to v and `dist[v*n + i]` its hop
/// distance. Built once per distance table; sort order is a constant.
struct SortedDistances {
  std::size_t n = 0;
  std::vector<std::int32_t> order;
  std::vector<double> dist;
  double empty_distance = 0.0;  // distance charged when nothing is selected
};

namespace serial {

Tensor gemm(const Tensor& a, const Tensor& b);
Tensor gemm_tn(const Tensor& a, const Tensor& b);
Tensor gemm_nt(const Tensor& a, const Tensor& b);
Tensor row_softmax(const Tensor& a, double scale);
Tensor pairwise_cosine(const Tensor& a, const Tensor& b, double eps);
Tensor column_sums(const Tensor& a);
std::vector<double> expected_min_distance(std::span<const double> x, const SortedDistances& t);
std::vector<double> expected_min_distance_grad(std::span<const double> x,
                                               const SortedDistances& t,
                                               std::span<const double> upstream);

}  // namespace serial

namespace parallel {

Tensor gemm(const Tensor& a, const Tensor& b);
Tensor gemm_tn(const Tensor& a, const Tensor& b);
Tensor gemm_nt(const Tensor& a, const Tensor& b);
Tensor row_softmax(const Tensor& a, double scale);
Tensor pairwise_cosine(const Tensor& a, const Tensor& b, double eps);
Tensor column_sums(const Tensor& a);
std::vector<double> expected_min_distance(std::span<const double> x, const SortedDistances& t);
std::vector<double> expected_min_distance_grad(std::span<const double> x,
                                               const SortedDistances& t,
                                               std::span<const double> upstream);

}  // namespace parallel

// The library calls these.
using parallel::column_sums;
using parallel::expected_min_distance;
using parallel::expected_min_distance_grad;
using parallel::gemm;
using parallel::gemm_nt;
using parallel::gemm_tn;
using parallel::pairwise_cosine;
using parallel::row_softmax;

}  // namespace dfl::kernels
