#pragma once

#include <optional>
#include <vector>

#include "ltood/ndcore/ops.hpp"

namespace ltood::losses {

struct LossWeights {
  double alpha = 0.05;  // outlier-class cross-entropy weight
  double beta = 0.05;   // tail contrastive term
  double gamma = 0.1;   // head / outlier-prototype term
};

// Cross-entropy of ID rows at their labels plus alpha times cross-entropy of
// outlier rows at the extra class C. Logits are [rows x (C+1)], labels are
// 0-based ID classes.
nd::Var ocl_loss(nd::Var id_logits, const std::vector<int>& labels,
                 nd::Var outlier_logits, double alpha);

// Tail-class supervised contrastive term. Anchors are the tail samples of the
// batch plus the tail prototypes (prototype i carries label
// prototype_labels[i]). For an anchor x of class c the positives are the
// other batch samples of class c; the denominator runs over the other tail
// samples at temperature class_tau[c] and over the outliers at `tau`.
// Anchors without positives contribute zero; the result is averaged over all
// anchors.
struct TailInputs {
  nd::Var embeddings;  // [B x D] ID batch
  const std::vector<int>* labels = nullptr;
  nd::Var outliers;  // [Bo x D]
  std::optional<nd::Var> prototypes;
  std::vector<int> prototype_labels;
  const std::vector<double>* class_tau = nullptr;
  double tau = 0.1;
  int head_count = 0;
};
nd::Var atscl_loss(const TailInputs& in);

// Head-class term: each outlier is pulled to the outlier prototype (at `tau`)
// against the head samples of the batch (each at its own class temperature).
// Averaged once over the outliers.
struct HeadInputs {
  nd::Var outliers;    // [Bo x D]
  nd::Var embeddings;  // [B x D] ID batch
  const std::vector<int>* labels = nullptr;
  nd::Var outlier_prototype;  // [1 x D]
  const std::vector<double>* class_tau = nullptr;
  double tau = 0.1;
  int head_count = 0;
};
nd::Var aohl_loss(const HeadInputs& in);

struct LossInputs {
  nd::Var id_logits;
  nd::Var outlier_logits;
  nd::Var id_embeddings;
  nd::Var outlier_embeddings;
  std::vector<int> labels;
  // Absent when the profile has no tail classes.
  std::optional<nd::Var> tail_prototypes;
  nd::Var outlier_prototype;
  std::vector<double> class_tau;
  double tau = 0.1;
  int head_count = 0;
  int num_classes = 0;
  LossWeights weights;
};

struct LossBreakdown {
  double ocl = 0.0;
  double tail = 0.0;
  double head = 0.0;
  double total = 0.0;
};

struct LossResult {
  nd::Var total;
  LossBreakdown breakdown;
};

// L_OCL + beta * L_tail + gamma * L_head. The tail term is absent when there
// are no tail classes and the head term when there are no outliers or no
// head classes.
LossResult rscl_loss(const LossInputs& in);

}  // namespace ltood::losses
