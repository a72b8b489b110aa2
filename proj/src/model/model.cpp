#include "ltood/model/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ltood/error.hpp"

namespace ltood::model {

namespace {

constexpr std::array<std::string_view, kNumParams> kNames = {
    "enc.w1",   "enc.b1",   "enc.w2",   "enc.b2",   "cls.w",
    "cls.b",    "proj.w1",  "proj.b1",  "proj.w2",  "proj.b2",
    "proto.w1", "proto.b1", "proto.w2", "proto.b2",
};

struct Layout {
  nd::Shape shape;
  std::size_t fan_in;
};

std::array<Layout, kNumParams> layouts(const ModelConfig& c) {
  const std::size_t k = static_cast<std::size_t>(c.num_classes) + 1;
  return {{
      {{c.hidden_dim, c.input_dim}, c.input_dim},
      {{1, c.hidden_dim}, c.input_dim},
      {{c.feature_dim, c.hidden_dim}, c.hidden_dim},
      {{1, c.feature_dim}, c.hidden_dim},
      {{k, c.feature_dim}, c.feature_dim},
      {{1, k}, c.feature_dim},
      {{c.proj_hidden_dim, c.feature_dim}, c.feature_dim},
      {{1, c.proj_hidden_dim}, c.feature_dim},
      {{c.proj_dim, c.proj_hidden_dim}, c.proj_hidden_dim},
      {{1, c.proj_dim}, c.proj_hidden_dim},
      {{c.proj_hidden_dim, c.feature_dim}, c.feature_dim},
      {{1, c.proj_hidden_dim}, c.feature_dim},
      {{c.proj_dim, c.proj_hidden_dim}, c.proj_hidden_dim},
      {{1, c.proj_dim}, c.proj_hidden_dim},
  }};
}

void validate(const ModelConfig& c) {
  if (c.num_classes < 1 || c.input_dim == 0 || c.hidden_dim == 0 ||
      c.feature_dim == 0 || c.proj_hidden_dim == 0 || c.proj_dim == 0) {
    throw std::invalid_argument("model config: all dimensions must be positive");
  }
}

// Hidden layer followed by a linear output layer.
nd::Var mlp(const BoundParams& p, nd::Var x, Param w1, Param b1, Param w2,
            Param b2) {
  nd::Var h = nd::relu(nd::linear(x, p[w1], p[b1]));
  return nd::linear(h, p[w2], p[b2]);
}

}  // namespace

std::string_view param_name(std::size_t i) { return kNames.at(i); }

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.numel();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors) {
    if (!t.all_finite()) return false;
  }
  return true;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  ModelParams p;
  p.config = config;
  std::mt19937_64 rng(seed);
  const auto ls = layouts(config);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(ls[i].fan_in));
    p.tensors[i] = nd::Tensor::zeros(ls[i].shape);
    for (double& v : p.tensors[i].values()) {
      std::uniform_real_distribution<double> u(-bound, bound);
      v = u(rng);
    }
  }
  return p;
}

ModelParams zero_params(const ModelConfig& config) {
  validate(config);
  ModelParams p;
  p.config = config;
  const auto ls = layouts(config);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    p.tensors[i] = nd::Tensor::zeros(ls[i].shape);
  }
  return p;
}

BoundParams bind(nd::Tape& tape, const ModelParams& params, bool requires_grad) {
  BoundParams b;
  b.config = &params.config;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    b.vars[i] = tape.leaf(params.tensors[i], requires_grad);
  }
  return b;
}

nd::Var encode(const BoundParams& p, nd::Var x) {
  if (x.cols() != p.config->input_dim) {
    throw ShapeError("encode: expected " + std::to_string(p.config->input_dim) +
                     " input columns, got " + nd::shape_str(x.shape()));
  }
  nd::Var h = nd::relu(nd::linear(x, p[Param::enc_w1], p[Param::enc_b1]));
  return nd::relu(nd::linear(h, p[Param::enc_w2], p[Param::enc_b2]));
}

nd::Var classify(const BoundParams& p, nd::Var features) {
  return nd::linear(features, p[Param::cls_w], p[Param::cls_b]);
}

nd::Var project(const BoundParams& p, nd::Var features, bool normalize) {
  nd::Var z = mlp(p, features, Param::proj_w1, Param::proj_b1, Param::proj_w2,
                  Param::proj_b2);
  return normalize ? nd::l2_normalize(z) : z;
}

nd::Var tail_prototypes(const BoundParams& p, int head_count) {
  const int classes = p.config->num_classes;
  if (head_count < 0 || head_count >= classes) {
    throw std::invalid_argument("tail_prototypes: no tail classes (head count " +
                                std::to_string(head_count) + " of " +
                                std::to_string(classes) + ")");
  }
  std::vector<std::size_t> rows;
  for (int c = head_count; c < classes; ++c) rows.push_back(static_cast<std::size_t>(c));
  nd::Var w = nd::gather_rows(p[Param::cls_w], rows);
  return nd::l2_normalize(mlp(p, w, Param::proto_w1, Param::proto_b1,
                              Param::proto_w2, Param::proto_b2));
}

nd::Var outlier_prototype(const BoundParams& p) {
  const auto row = static_cast<std::size_t>(p.config->num_classes);
  nd::Var w = nd::gather_rows(p[Param::cls_w], {row});
  return nd::l2_normalize(mlp(p, w, Param::proto_w1, Param::proto_b1,
                              Param::proto_w2, Param::proto_b2));
}

nd::Tensor predict_logits(const ModelParams& params, const nd::Tensor& x) {
  nd::Tape tape(nd::Mode::inference);
  BoundParams b = bind(tape, params, false);
  return classify(b, encode(b, tape.constant(x))).value();
}

}  // namespace ltood::model
