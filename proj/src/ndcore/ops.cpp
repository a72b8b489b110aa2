#include "ltood/ndcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ltood/error.hpp"
#include "ltood/ndcore/kernels.hpp"

namespace ltood::nd {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape != b.tape) {
    throw std::invalid_argument(std::string(op) +
                                ": operands from different tapes");
  }
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("invalid variable");
  return *a.tape;
}

// Shape of an elementwise binary result, or throw.
Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1 && b.rank() == 0) return a.shape();
  if (a.numel() == 1 && a.rank() == 0) return b.shape();
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                   " and " + shape_str(b.shape()) +
                   " are not broadcast-compatible (only scalar broadcast)");
}

// Reduces an adjoint of the broadcast result back onto an operand's shape.
Tensor reduce_to(const Tensor& g, const Tensor& operand) {
  if (operand.shape() == g.shape()) return g;
  double s = 0.0;
  for (double v : g.values()) s += v;
  return Tensor(operand.shape(), {s});
}

double at(const Tensor& t, std::size_t i) {
  return t.numel() == 1 ? t[0] : t[i];
}

void require_matrix(const Tensor& t, const char* op, const char* name) {
  if (t.rank() == 0) {
    throw ShapeError(std::string(op) + ": operand " + name +
                     " must be a matrix, got scalar");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul", "a");
  require_matrix(bv, "matmul", "b");
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ: " +
                     shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  const kernels::GemmDims d{av.rows(), av.cols(), bv.cols()};
  Tensor out = Tensor::zeros({d.m, d.n});
  kernels::gemm_nn(av.values(), bv.values(), out.values(), d);
  return tape.record(
      std::move(out), {a.id, b.id},
      [a, b, d](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) {
          Tensor ga = Tensor::zeros(a.value().shape());
          kernels::gemm_nt(g.values(), b.value().values(), ga.values(),
                           {d.m, d.n, d.k});
          t.accumulate(a.id, ga);
        }
        if (t.requires_grad(b)) {
          Tensor gb = Tensor::zeros(b.value().shape());
          kernels::gemm_tn(a.value().values(), g.values(), gb.values(),
                           {d.k, d.m, d.n});
          t.accumulate(b.id, gb);
        }
      },
      "matmul");
}

Var matmul_nt(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul_nt");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul_nt", "a");
  require_matrix(bv, "matmul_nt", "b");
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_nt: inner dimensions differ: " +
                     shape_str(av.shape()) + " x " + shape_str(bv.shape()) +
                     "^T");
  }
  const kernels::GemmDims d{av.rows(), av.cols(), bv.rows()};
  Tensor out = Tensor::zeros({d.m, d.n});
  kernels::gemm_nt(av.values(), bv.values(), out.values(), d);
  return tape.record(
      std::move(out), {a.id, b.id},
      [a, b, d](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) {
          Tensor ga = Tensor::zeros(a.value().shape());
          kernels::gemm_nn(g.values(), b.value().values(), ga.values(),
                           {d.m, d.n, d.k});
          t.accumulate(a.id, ga);
        }
        if (t.requires_grad(b)) {
          Tensor gb = Tensor::zeros(b.value().shape());
          kernels::gemm_tn(g.values(), a.value().values(), gb.values(),
                           {d.n, d.m, d.k});
          t.accumulate(b.id, gb);
        }
      },
      "matmul_nt");
}

Var linear(Var x, Var w, Var bias) {
  Tape& tape = same_tape(x, w, "linear");
  same_tape(x, bias, "linear");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = bias.value();
  require_matrix(xv, "linear", "x");
  require_matrix(wv, "linear", "w");
  if (xv.cols() != wv.cols()) {
    throw ShapeError("linear: input " + shape_str(xv.shape()) +
                     " does not match weight " + shape_str(wv.shape()));
  }
  if (bv.numel() != wv.rows()) {
    throw ShapeError("linear: bias " + shape_str(bv.shape()) +
                     " does not match weight " + shape_str(wv.shape()));
  }
  const kernels::GemmDims d{xv.rows(), xv.cols(), wv.rows()};
  Tensor out = Tensor::zeros({d.m, d.n});
  kernels::gemm_nt(xv.values(), wv.values(), out.values(), d);
  for (std::size_t i = 0; i < d.m; ++i) {
    for (std::size_t j = 0; j < d.n; ++j) out(i, j) += bv[j];
  }
  return tape.record(
      std::move(out), {x.id, w.id, bias.id},
      [x, w, bias, d](Tape& t, const Tensor& g) {
        if (t.requires_grad(x)) {
          Tensor gx = Tensor::zeros(x.value().shape());
          kernels::gemm_nn(g.values(), w.value().values(), gx.values(),
                           {d.m, d.n, d.k});
          t.accumulate(x.id, gx);
        }
        if (t.requires_grad(w)) {
          Tensor gw = Tensor::zeros(w.value().shape());
          kernels::gemm_tn(g.values(), x.value().values(), gw.values(),
                           {d.n, d.m, d.k});
          t.accumulate(w.id, gw);
        }
        if (t.requires_grad(bias)) {
          Tensor gb = Tensor::zeros(bias.value().shape());
          for (std::size_t i = 0; i < d.m; ++i) {
            for (std::size_t j = 0; j < d.n; ++j) gb[j] += g(i, j);
          }
          t.accumulate(bias.id, gb);
        }
      },
      "linear");
}

namespace {

enum class BinOp { add, sub, mul };

Var binary(Var a, Var b, BinOp op, const char* name) {
  Tape& tape = same_tape(a, b, name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape shape = broadcast_shape(av, bv, name);
  Tensor out = Tensor::zeros(shape);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double x = at(av, i);
    const double y = at(bv, i);
    switch (op) {
      case BinOp::add: out[i] = x + y; break;
      case BinOp::sub: out[i] = x - y; break;
      case BinOp::mul: out[i] = x * y; break;
    }
  }
  return tape.record(
      std::move(out), {a.id, b.id},
      [a, b, op](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        if (t.requires_grad(a)) {
          Tensor ga = g;
          if (op == BinOp::mul) {
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] *= at(bv, i);
          }
          t.accumulate(a.id, reduce_to(ga, av));
        }
        if (t.requires_grad(b)) {
          Tensor gb = g;
          for (std::size_t i = 0; i < gb.numel(); ++i) {
            if (op == BinOp::sub) gb[i] = -gb[i];
            if (op == BinOp::mul) gb[i] *= at(av, i);
          }
          t.accumulate(b.id, reduce_to(gb, bv));
        }
      },
      name);
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, BinOp::add, "add"); }
Var sub(Var a, Var b) { return binary(a, b, BinOp::sub, "sub"); }
Var mul(Var a, Var b) { return binary(a, b, BinOp::mul, "mul"); }

Var scale(Var a, double factor) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return tape.record(
      std::move(out), {a.id},
      [a, factor](Tape& t, const Tensor& g) {
        Tensor ga = g;
        for (double& v : ga.values()) v *= factor;
        t.accumulate(a.id, ga);
      },
      "scale");
}

Var mul_const(Var a, const Tensor& c) {
  Tape& tape = tape_of(a);
  if (a.value().shape() != c.shape()) {
    throw ShapeError("mul_const: shapes " + shape_str(a.value().shape()) +
                     " and " + shape_str(c.shape()) + " differ");
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c[i];
  return tape.record(
      std::move(out), {a.id},
      [a, c](Tape& t, const Tensor& g) {
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] *= c[i];
        t.accumulate(a.id, ga);
      },
      "mul_const");
}

Var exp(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.values()) v = std::exp(v);
  const int self = static_cast<int>(tape.size());
  return tape.record(
      std::move(out), {a.id},
      [a, self](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(Var{&t, self});
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] *= y[i];
        t.accumulate(a.id, ga);
      },
      "exp");
}

Var log(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (tape.checked() && !(out[i] > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(out[i]) +
                        " at flat index " + std::to_string(i));
    }
    out[i] = std::log(out[i]);
  }
  return tape.record(
      std::move(out), {a.id},
      [a](Tape& t, const Tensor& g) {
        const Tensor& x = a.value();
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] /= x[i];
        t.accumulate(a.id, ga);
      },
      "log");
}

Var relu(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return tape.record(
      std::move(out), {a.id},
      [a](Tape& t, const Tensor& g) {
        const Tensor& x = a.value();
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.numel(); ++i) {
          if (!(x[i] > 0.0)) ga[i] = 0.0;
        }
        t.accumulate(a.id, ga);
      },
      "relu");
}

Tensor log_softmax(const Tensor& logits) {
  require_matrix(logits, "log_softmax", "logits");
  if (logits.cols() == 0) throw ShapeError("log_softmax: zero columns");
  Tensor out = Tensor::zeros(logits.shape());
  kernels::log_softmax_rows(logits.values(), out.values(), logits.rows(),
                            logits.cols());
  return out;
}

Var log_softmax(Var logits) {
  Tape& tape = tape_of(logits);
  Tensor out = log_softmax(logits.value());
  const int self = static_cast<int>(tape.size());
  return tape.record(
      std::move(out), {logits.id},
      [logits, self](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(Var{&t, self});
        Tensor ga = Tensor::zeros(y.shape());
        const std::size_t rows = y.rows();
        const std::size_t cols = y.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          double gs = 0.0;
          for (std::size_t j = 0; j < cols; ++j) gs += g(r, j);
          for (std::size_t j = 0; j < cols; ++j) {
            ga(r, j) = g(r, j) - std::exp(y(r, j)) * gs;
          }
        }
        t.accumulate(logits.id, ga);
      },
      "log_softmax");
}

Var logsumexp_rows(Var a, const std::optional<Tensor>& mask) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "logsumexp_rows", "a");
  if (mask && mask->shape() != x.shape()) {
    throw ShapeError("logsumexp_rows: mask " + shape_str(mask->shape()) +
                     " does not match " + shape_str(x.shape()));
  }
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  Tensor m = mask ? *mask : Tensor::filled(x.shape(), 1.0);
  Tensor out = Tensor::zeros({rows, 1});
  // Softmax weights over the active entries, reused by the backward rule.
  Tensor weights = Tensor::zeros(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      if (m(r, j) != 0.0) mx = std::max(mx, x(r, j));
    }
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (m(r, j) != 0.0) {
        weights(r, j) = std::exp(x(r, j) - mx);
        s += weights(r, j);
      }
    }
    for (std::size_t j = 0; j < cols; ++j) weights(r, j) /= s;
    out(r, 0) = mx + std::log(s);
  }
  return tape.record(
      std::move(out), {a.id},
      [a, weights](Tape& t, const Tensor& g) {
        Tensor ga = weights;
        const std::size_t cols = ga.cols();
        for (std::size_t r = 0; r < ga.rows(); ++r) {
          for (std::size_t j = 0; j < cols; ++j) ga(r, j) *= g(r, 0);
        }
        t.accumulate(a.id, ga);
      },
      "logsumexp_rows");
}

Tensor l2_normalize(const Tensor& a) {
  require_matrix(a, "l2_normalize", "a");
  Tensor out = a;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double ss = 0.0;
    for (double v : a.row(r)) ss += v * v;
    const double norm = std::sqrt(ss);
    if (!(norm > 0.0)) {
      throw DomainError("l2_normalize: row " + std::to_string(r) +
                        " has zero norm");
    }
    for (double& v : out.row(r)) v /= norm;
  }
  return out;
}

Var l2_normalize(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = l2_normalize(a.value());
  const int self = static_cast<int>(tape.size());
  return tape.record(
      std::move(out), {a.id},
      [a, self](Tape& t, const Tensor& g) {
        const Tensor& x = a.value();
        const Tensor& y = t.value(Var{&t, self});
        Tensor ga = Tensor::zeros(x.shape());
        for (std::size_t r = 0; r < x.rows(); ++r) {
          double ss = 0.0;
          double dot = 0.0;
          for (std::size_t j = 0; j < x.cols(); ++j) {
            ss += x(r, j) * x(r, j);
            dot += y(r, j) * g(r, j);
          }
          const double norm = std::sqrt(ss);
          for (std::size_t j = 0; j < x.cols(); ++j) {
            ga(r, j) = (g(r, j) - y(r, j) * dot) / norm;
          }
        }
        t.accumulate(a.id, ga);
      },
      "l2_normalize");
}

Var concat_rows(Var top, Var bottom) {
  Tape& tape = same_tape(top, bottom, "concat_rows");
  const Tensor& a = top.value();
  const Tensor& b = bottom.value();
  require_matrix(a, "concat_rows", "top");
  require_matrix(b, "concat_rows", "bottom");
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows: column counts differ: " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t ra = a.rows();
  const std::size_t cols = a.cols();
  std::vector<double> v(a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  Tensor out({ra + b.rows(), cols}, std::move(v));
  return tape.record(
      std::move(out), {top.id, bottom.id},
      [top, bottom, ra, cols](Tape& t, const Tensor& g) {
        auto gv = g.values();
        if (t.requires_grad(top)) {
          Tensor gt(top.value().shape(),
                    std::vector<double>(gv.begin(), gv.begin() + ra * cols));
          t.accumulate(top.id, gt);
        }
        if (t.requires_grad(bottom)) {
          Tensor gb(bottom.value().shape(),
                    std::vector<double>(gv.begin() + ra * cols, gv.end()));
          t.accumulate(bottom.id, gb);
        }
      },
      "concat_rows");
}

Var concat_cols(Var left, Var right) {
  Tape& tape = same_tape(left, right, "concat_cols");
  const Tensor& a = left.value();
  const Tensor& b = right.value();
  require_matrix(a, "concat_cols", "left");
  require_matrix(b, "concat_cols", "right");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts differ: " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t rows = a.rows();
  const std::size_t ca = a.cols();
  const std::size_t cb = b.cols();
  Tensor out = Tensor::zeros({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ca; ++j) out(r, j) = a(r, j);
    for (std::size_t j = 0; j < cb; ++j) out(r, ca + j) = b(r, j);
  }
  return tape.record(
      std::move(out), {left.id, right.id},
      [left, right, rows, ca, cb](Tape& t, const Tensor& g) {
        if (t.requires_grad(left)) {
          Tensor gl = Tensor::zeros(left.value().shape());
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < ca; ++j) gl[r * ca + j] = g(r, j);
          }
          t.accumulate(left.id, gl);
        }
        if (t.requires_grad(right)) {
          Tensor gr = Tensor::zeros(right.value().shape());
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < cb; ++j) gr[r * cb + j] = g(r, ca + j);
          }
          t.accumulate(right.id, gr);
        }
      },
      "concat_cols");
}

Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "gather_rows", "a");
  const std::size_t cols = x.cols();
  Tensor out = Tensor::zeros({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) +
                       " out of range for " + shape_str(x.shape()));
    }
    std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(),
              out.row(i).begin());
  }
  return tape.record(
      std::move(out), {a.id},
      [a, rows, cols](Tape& t, const Tensor& g) {
        Tensor ga = Tensor::zeros(a.value().shape());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            ga[rows[i] * cols + j] += g[i * cols + j];
          }
        }
        t.accumulate(a.id, ga);
      },
      "gather_rows");
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return tape.record(
      Tensor::scalar(s), {a.id},
      [a](Tape& t, const Tensor& g) {
        t.accumulate(a.id, Tensor::filled(a.value().shape(), g[0]));
      },
      "sum");
}

Var mean(Var a) {
  const std::size_t n = a.value().numel();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var weighted_sum(Var a, const Tensor& weights) {
  Tape& tape = tape_of(a);
  if (a.value().shape() != weights.shape()) {
    throw ShapeError("weighted_sum: weights " + shape_str(weights.shape()) +
                     " do not match " + shape_str(a.value().shape()));
  }
  double s = 0.0;
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (weights[i] != 0.0) s += weights[i] * x[i];
  }
  return tape.record(
      Tensor::scalar(s), {a.id},
      [a, weights](Tape& t, const Tensor& g) {
        Tensor ga = weights;
        for (double& v : ga.values()) v *= g[0];
        t.accumulate(a.id, ga);
      },
      "weighted_sum");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul", "a");
  require_matrix(b, "matmul", "b");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ: " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const kernels::GemmDims d{a.rows(), a.cols(), b.cols()};
  Tensor out = Tensor::zeros({d.m, d.n});
  kernels::gemm_nn(a.values(), b.values(), out.values(), d);
  return out;
}

}  // namespace ltood::nd
