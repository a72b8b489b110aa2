#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltood/data/class_profile.hpp"
#include "ltood/data/dataset.hpp"
#include "ltood/model/model.hpp"

namespace ltood::detector {

struct ScoredSample {
  double ood_score = 0.0;  // softmax probability of class C over all C+1 logits
  int predicted = 0;       // argmax over the C ID logits
  int label = 0;           // true label; C marks OOD
};

// Scores every row of `x`; labels[i] (or C when absent) is copied through.
std::vector<ScoredSample> score(const model::ModelParams& params, const nd::Tensor& x,
                                const std::vector<int>* labels = nullptr);
std::vector<ScoredSample> score_logits(const nd::Tensor& logits,
                                       const std::vector<int>* labels = nullptr);

// Detector decision: OOD iff ood_score >= eta.
inline bool is_ood(const ScoredSample& s, double eta) { return s.ood_score >= eta; }

struct ClassAccuracy {
  double acc = 0.0;
  std::optional<double> head_acc;  // absent when the range is empty
  std::optional<double> tail_acc;
  std::size_t head_count = 0;  // samples
  std::size_t tail_count = 0;
};

// ID samples only; an OOD label is an error.
ClassAccuracy classification_report(std::span<const ScoredSample> scored,
                                    const data::ClassProfile& profile);

struct PoolMetrics {
  std::string name;
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  double eta = 0.0;
  std::size_t id_count = 0;
  std::size_t ood_count = 0;
};

PoolMetrics pool_metrics(std::string name, std::span<const double> id_scores,
                         std::span<const double> ood_scores);

struct MetricsReport {
  std::vector<PoolMetrics> pools;
  PoolMetrics average;  // equal-weight mean over pools
  ClassAccuracy accuracy;
};

struct NamedPool {
  std::string name;
  const data::OutlierPool* pool = nullptr;
};

MetricsReport evaluate(const model::ModelParams& params, const data::LabeledDataset& id_test,
                       const std::vector<NamedPool>& pools,
                       const data::ClassProfile& profile);

// Equal-weight average of per-pool metrics.
PoolMetrics average_pools(const std::vector<PoolMetrics>& pools);

nlohmann::json to_json(const MetricsReport& r);
// Aligned plain-text table: pool | AUROC | AUPR | FPR95 | ACC, percentages.
std::string to_table(const MetricsReport& r);

}  // namespace ltood::detector
