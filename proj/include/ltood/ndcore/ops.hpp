#pragma once

#include <optional>
#include <vector>

#include "ltood/ndcore/tape.hpp"

// Differentiable primitives. Every op records itself on the tape of its
// operands; binary elementwise ops accept equal shapes or a scalar on either
// side and nothing else.
namespace ltood::nd {

Var matmul(Var a, Var b);     // [m x k] * [k x n]
Var matmul_nt(Var a, Var b);  // [m x k] * [n x k]^T
// x [B x in] * w[out x in]^T + bias[1 x out] (bias added to every row).
Var linear(Var x, Var w, Var bias);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// Elementwise product with a constant tensor of the same shape.
Var mul_const(Var a, const Tensor& c);

Var exp(Var a);
Var log(Var a);
Var relu(Var a);

Var log_softmax(Var logits);
// Per-row log-sum-exp over the entries where `mask` is nonzero. Rows with no
// active entry produce 0 and pass no gradient. Output is [rows x 1].
Var logsumexp_rows(Var a, const std::optional<Tensor>& mask = std::nullopt);
// Divides every row by its Euclidean norm.
Var l2_normalize(Var a);

Var concat_rows(Var top, Var bottom);
Var concat_cols(Var left, Var right);
Var gather_rows(Var a, const std::vector<std::size_t>& rows);

Var sum(Var a);
Var mean(Var a);
// Scalar sum_ij w_ij * a_ij for a constant weight tensor.
Var weighted_sum(Var a, const Tensor& weights);

// Plain-tensor forms for callers that do not need a tape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor log_softmax(const Tensor& logits);
Tensor l2_normalize(const Tensor& a);

}  // namespace ltood::nd
