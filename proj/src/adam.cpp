#include "dfl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dfl {

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("Adam::step: " + std::to_string(params.size()) +
                                " parameters but " + std::to_string(grads.size()) + " gradients");
  }
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  } else if (m_.size() != params.size()) {
    throw std::invalid_argument("Adam::step: parameter count changed between steps");
  }

  ++steps_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    require_same_shape(p, g, "Adam::step");
    require_same_shape(p, m_[k], "Adam::step");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g[i];
      v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m_[k][i] / c1;
      const double vhat = v_[k][i] / c2;
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace dfl
