#include "ltood/ndcore/adam.hpp"

#include <cmath>

#include "ltood/error.hpp"

namespace ltood::nd {

Adam::Adam(std::span<const Shape> shapes, AdamOptions options)
    : options_(options) {
  for (const auto& s : shapes) {
    m_.push_back(Tensor::zeros(s));
    v_.push_back(Tensor::zeros(s));
  }
}

void Adam::step(std::span<Tensor* const> params,
                std::span<const Tensor* const> grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("Adam::step: expected " + std::to_string(m_.size()) +
                     " parameter tensors");
  }
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const Tensor& g = *grads[t];
    if (p.shape() != m_[t].shape() || g.shape() != p.shape()) {
      throw ShapeError("Adam::step: shape mismatch for tensor " +
                       std::to_string(t));
    }
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m_[t][i] = b1 * m_[t][i] + (1.0 - b1) * g[i];
      v_[t][i] = b2 * v_[t][i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m_[t][i] / c1;
      const double vhat = v_[t][i] / c2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

}  // namespace ltood::nd
