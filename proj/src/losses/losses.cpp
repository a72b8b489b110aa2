#include "ltood/losses/losses.hpp"

#include <stdexcept>
#include <string>

#include "ltood/error.hpp"

namespace ltood::losses {

namespace {

void check_temperature(double t, const char* what) {
  if (!(t > 0.0)) {
    throw DomainError(std::string(what) + " must be positive, got " +
                      std::to_string(t));
  }
}

double class_temperature(const std::vector<double>& taus, int cls) {
  if (cls < 0 || static_cast<std::size_t>(cls) >= taus.size()) {
    throw std::out_of_range("no temperature for class " + std::to_string(cls));
  }
  check_temperature(taus[static_cast<std::size_t>(cls)], "class temperature");
  return taus[static_cast<std::size_t>(cls)];
}

}  // namespace

nd::Var ocl_loss(nd::Var id_logits, const std::vector<int>& labels,
                 nd::Var outlier_logits, double alpha) {
  const std::size_t k = id_logits.cols();
  if (k < 2) throw ShapeError("ocl_loss: logits need at least 2 columns");
  const int outlier_class = static_cast<int>(k) - 1;
  const std::size_t b = id_logits.rows();
  if (labels.size() != b) {
    throw ShapeError("ocl_loss: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(b) + " rows");
  }
  if (alpha < 0.0) throw std::invalid_argument("ocl_loss: alpha < 0");
  if (b == 0) throw ShapeError("ocl_loss: empty ID batch");

  nd::Tensor w_id = nd::Tensor::zeros(id_logits.shape());
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || labels[i] >= outlier_class) {
      throw std::out_of_range("ocl_loss: label " + std::to_string(labels[i]) +
                              " outside [0, " + std::to_string(outlier_class) +
                              ")");
    }
    w_id(i, static_cast<std::size_t>(labels[i])) = -1.0 / static_cast<double>(b);
  }
  nd::Var loss = nd::weighted_sum(nd::log_softmax(id_logits), w_id);

  const std::size_t bo = outlier_logits.rows();
  if (bo > 0) {
    if (outlier_logits.cols() != k) {
      throw ShapeError("ocl_loss: outlier logits " +
                       nd::shape_str(outlier_logits.shape()) +
                       " do not match ID logits " +
                       nd::shape_str(id_logits.shape()));
    }
    nd::Tensor w_out = nd::Tensor::zeros(outlier_logits.shape());
    for (std::size_t j = 0; j < bo; ++j) {
      w_out(j, static_cast<std::size_t>(outlier_class)) =
          -alpha / static_cast<double>(bo);
    }
    loss = nd::add(loss, nd::weighted_sum(nd::log_softmax(outlier_logits), w_out));
  }
  return loss;
}

nd::Var atscl_loss(const TailInputs& in) {
  check_temperature(in.tau, "tau");
  const auto& labels = *in.labels;
  const auto& taus = *in.class_tau;
  std::vector<std::size_t> tail_rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= in.head_count) tail_rows.push_back(i);
  }
  const std::size_t nt = tail_rows.size();
  const std::size_t np = in.prototypes ? in.prototypes->rows() : 0;
  if (in.prototypes && in.prototype_labels.size() != np) {
    throw ShapeError("atscl_loss: prototype label count mismatch");
  }
  const std::size_t na = nt + np;
  if (na == 0) {
    throw std::invalid_argument("atscl_loss: no anchors (no tail samples, no prototypes)");
  }

  nd::Var tail = nd::gather_rows(in.embeddings, tail_rows);
  nd::Var anchors = tail;
  if (in.prototypes) {
    anchors = nt ? nd::concat_rows(tail, *in.prototypes) : *in.prototypes;
  }
  std::vector<int> anchor_label;
  for (auto r : tail_rows) anchor_label.push_back(labels[r]);
  for (int c : in.prototype_labels) anchor_label.push_back(c);

  const std::size_t no = in.outliers.rows();
  nd::Tensor inv_tau = nd::Tensor::zeros({na, nt});
  nd::Tensor mask = nd::Tensor::zeros({na, nt + no});
  nd::Tensor w_pos = nd::Tensor::zeros({na, nt});
  nd::Tensor w_lse = nd::Tensor::zeros({na, 1});
  const double per_anchor = 1.0 / static_cast<double>(na);
  for (std::size_t a = 0; a < na; ++a) {
    const double t = class_temperature(taus, anchor_label[a]);
    std::size_t positives = 0;
    for (std::size_t j = 0; j < nt; ++j) {
      inv_tau(a, j) = 1.0 / t;
      const bool self = a < nt && a == j;
      if (!self) {
        mask(a, j) = 1.0;
        if (labels[tail_rows[j]] == anchor_label[a]) ++positives;
      }
    }
    for (std::size_t j = 0; j < no; ++j) mask(a, nt + j) = 1.0;
    if (positives == 0) continue;
    w_lse(a, 0) = per_anchor;
    for (std::size_t j = 0; j < nt; ++j) {
      const bool self = a < nt && a == j;
      if (!self && labels[tail_rows[j]] == anchor_label[a]) {
        w_pos(a, j) = -per_anchor / static_cast<double>(positives);
      }
    }
  }

  nd::Var sim_tail = nd::mul_const(nd::matmul_nt(anchors, tail), inv_tau);
  nd::Var sim_out = nd::scale(nd::matmul_nt(anchors, in.outliers), 1.0 / in.tau);
  nd::Var lse = nd::logsumexp_rows(nd::concat_cols(sim_tail, sim_out), mask);
  return nd::add(nd::weighted_sum(lse, w_lse), nd::weighted_sum(sim_tail, w_pos));
}

nd::Var aohl_loss(const HeadInputs& in) {
  check_temperature(in.tau, "tau");
  const std::size_t no = in.outliers.rows();
  if (no == 0) throw std::invalid_argument("aohl_loss: empty outlier batch");
  const auto& labels = *in.labels;
  std::vector<std::size_t> head_rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < in.head_count) head_rows.push_back(i);
  }
  const std::size_t nh = head_rows.size();
  nd::Tensor inv_tau = nd::Tensor::zeros({no, nh});
  for (std::size_t j = 0; j < nh; ++j) {
    const double t = class_temperature(*in.class_tau, labels[head_rows[j]]);
    for (std::size_t i = 0; i < no; ++i) inv_tau(i, j) = 1.0 / t;
  }
  nd::Var head = nd::gather_rows(in.embeddings, head_rows);
  nd::Var sim_head = nd::mul_const(nd::matmul_nt(in.outliers, head), inv_tau);
  nd::Var sim_proto =
      nd::scale(nd::matmul_nt(in.outliers, in.outlier_prototype), 1.0 / in.tau);
  nd::Var lse = nd::logsumexp_rows(nd::concat_cols(sim_head, sim_proto));
  const nd::Tensor w = nd::Tensor::filled({no, 1}, 1.0 / static_cast<double>(no));
  return nd::sub(nd::weighted_sum(lse, w), nd::weighted_sum(sim_proto, w));
}

LossResult rscl_loss(const LossInputs& in) {
  LossResult out;
  nd::Var ocl = ocl_loss(in.id_logits, in.labels, in.outlier_logits,
                         in.weights.alpha);
  out.breakdown.ocl = ocl.value().item();
  nd::Var total = ocl;

  const bool has_tail = in.tail_prototypes.has_value() && in.head_count < in.num_classes;
  // Terms with zero weight are still evaluated for the breakdown but kept out
  // of the objective.
  if (has_tail) {
    TailInputs t;
    t.embeddings = in.id_embeddings;
    t.labels = &in.labels;
    t.outliers = in.outlier_embeddings;
    t.prototypes = in.tail_prototypes;
    for (int c = in.head_count; c < in.num_classes; ++c) t.prototype_labels.push_back(c);
    t.class_tau = &in.class_tau;
    t.tau = in.tau;
    t.head_count = in.head_count;
    nd::Var tail = atscl_loss(t);
    out.breakdown.tail = tail.value().item();
    if (in.weights.beta != 0.0) {
      total = nd::add(total, nd::scale(tail, in.weights.beta));
    }
  }
  // With no head classes (k = 1) the head term is not used.
  if (in.outlier_embeddings.rows() > 0 && in.head_count > 0) {
    HeadInputs h;
    h.outliers = in.outlier_embeddings;
    h.embeddings = in.id_embeddings;
    h.labels = &in.labels;
    h.outlier_prototype = in.outlier_prototype;
    h.class_tau = &in.class_tau;
    h.tau = in.tau;
    h.head_count = in.head_count;
    nd::Var head = aohl_loss(h);
    out.breakdown.head = head.value().item();
    if (in.weights.gamma != 0.0) {
      total = nd::add(total, nd::scale(head, in.weights.gamma));
    }
  }
  out.total = total;
  out.breakdown.total = total.value().item();
  return out;
}

}  // namespace ltood::losses
