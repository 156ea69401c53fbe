#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dfl/tensor.hpp"

namespace dfl {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. One state slot per parameter, matched by
/// position in the span passed to step().
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace dfl
