#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "dfl/autodiff.hpp"
#include "dfl/tensor.hpp"

namespace dfl {

/// Builds a scalar loss from parameter leaves, one per input tensor.
using ScalarGraph = std::function<ad::Var(const std::vector<ad::Var>&)>;

/// Central differences of f at x, one coordinate at a time.
Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-6);

/// ||a - b|| / max(||a||, ||b||, floor), Frobenius norms.
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

/// Largest relative error between backward() and central differences over
/// all inputs of the graph.
double gradient_error(const ScalarGraph& f, const std::vector<Tensor>& inputs, double h = 1e-6);

struct CheckCase {
  std::string suite;
  std::string name;
  int trials = 20;
  double tolerance = 1e-5;
  /// Relative error for one seeded instance.
  std::function<double(std::uint64_t seed)> run;
};

struct CheckResult {
  std::string suite;
  std::string name;
  int trials = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

std::vector<CheckCase> tensor_ad_cases();
std::vector<CheckCase> softkmeans_cases();
std::vector<CheckCase> decisions_cases();

/// suite is "tensor_ad", "softkmeans", "decisions" or "all".
std::vector<CheckCase> gradcheck_cases(const std::string& suite);

CheckResult run_case(const CheckCase& c);

/// Fixed-width pass/fail table with the max relative error per op.
void print_report(const std::vector<CheckResult>& results, std::ostream& os);

/// Random tensor with entries in [lo, hi).
Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0);

/// Points scattered around k random unit directions, n x p.
Tensor clustered_points(std::size_t n, std::size_t p, int k, double noise, std::uint64_t seed);

}  // namespace dfl
