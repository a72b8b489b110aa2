#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltood/ndcore/tensor.hpp"

namespace ltood::nd {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Holds first/second moments for a fixed list of
// parameter tensors.
class Adam {
 public:
  Adam() = default;
  Adam(std::span<const Shape> shapes, AdamOptions options = {});

  // params[i] -= lr * mhat / (sqrt(vhat) + eps), after updating the moments
  // with grads[i].
  void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
            double lr);

  std::int64_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_steps(std::int64_t steps) { steps_ = steps; }

 private:
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t steps_ = 0;
};

}  // namespace ltood::nd
