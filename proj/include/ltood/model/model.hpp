#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "ltood/ndcore/ops.hpp"

namespace ltood::model {

struct ModelConfig {
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 64;
  std::size_t feature_dim = 64;
  std::size_t proj_hidden_dim = 64;
  std::size_t proj_dim = 32;
  int num_classes = 10;  // ID classes; the classifier has num_classes + 1 rows
};

// Parameter tensors in their fixed serialization order.
enum class Param : std::size_t {
  enc_w1, enc_b1, enc_w2, enc_b2,
  cls_w, cls_b,
  proj_w1, proj_b1, proj_w2, proj_b2,
  proto_w1, proto_b1, proto_w2, proto_b2,
};
inline constexpr std::size_t kNumParams = 14;

std::string_view param_name(std::size_t i);

struct ModelParams {
  ModelConfig config;
  std::array<nd::Tensor, kNumParams> tensors;

  nd::Tensor& operator[](Param p) { return tensors[static_cast<std::size_t>(p)]; }
  const nd::Tensor& operator[](Param p) const {
    return tensors[static_cast<std::size_t>(p)];
  }
  std::size_t parameter_count() const;
  bool all_finite() const;
};

// Weights and biases uniform in +-1/sqrt(fan_in).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
// All-zero parameters of the configured shapes.
ModelParams zero_params(const ModelConfig& config);

// Parameters registered as leaves on one tape.
struct BoundParams {
  const ModelConfig* config = nullptr;
  std::array<nd::Var, kNumParams> vars;

  nd::Var operator[](Param p) const { return vars[static_cast<std::size_t>(p)]; }
};

BoundParams bind(nd::Tape& tape, const ModelParams& params,
                 bool requires_grad = true);

// Two ReLU layers: D_in -> hidden -> D_feat.
nd::Var encode(const BoundParams& p, nd::Var x);
// (C+1)-way logits; column C is the outlier class.
nd::Var classify(const BoundParams& p, nd::Var features);
// Projection head (two-layer MLP), rows l2-normalized when `normalize`.
nd::Var project(const BoundParams& p, nd::Var features, bool normalize = true);
// Classifier rows [head_count, C) through the prototype MLP, l2-normalized.
// Throws std::invalid_argument when there are no tail classes.
nd::Var tail_prototypes(const BoundParams& p, int head_count);
// Classifier row C through the prototype MLP, l2-normalized. [1 x D_proj]
nd::Var outlier_prototype(const BoundParams& p);

// Forward pass without gradient recording; returns [B x (C+1)] logits.
nd::Tensor predict_logits(const ModelParams& params, const nd::Tensor& x);

}  // namespace ltood::model
