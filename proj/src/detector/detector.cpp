#include "ltood/detector/detector.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ltood/detector/metrics.hpp"

namespace ltood::detector {

std::vector<ScoredSample> score_logits(const nd::Tensor& logits,
                                       const std::vector<int>* labels) {
  const std::size_t k = logits.cols();
  if (k < 2) throw std::invalid_argument("score: logits need C+1 >= 2 columns");
  if (labels && labels->size() != logits.rows()) {
    throw std::invalid_argument("score: label count does not match rows");
  }
  const int classes = static_cast<int>(k) - 1;
  std::vector<ScoredSample> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : row) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    ScoredSample& o = out[r];
    o.ood_score = std::exp(row[k - 1] - mx) / s;
    int best = 0;
    for (int c = 1; c < classes; ++c) {
      if (row[static_cast<std::size_t>(c)] > row[static_cast<std::size_t>(best)]) best = c;
    }
    o.predicted = best;
    o.label = labels ? (*labels)[r] : classes;
  }
  return out;
}

std::vector<ScoredSample> score(const model::ModelParams& params, const nd::Tensor& x,
                                const std::vector<int>* labels) {
  return score_logits(model::predict_logits(params, x), labels);
}

ClassAccuracy classification_report(std::span<const ScoredSample> scored,
                                    const data::ClassProfile& profile) {
  const int classes = profile.num_classes();
  ClassAccuracy r;
  std::size_t correct = 0;
  std::size_t head_correct = 0;
  std::size_t tail_correct = 0;
  for (const auto& s : scored) {
    if (s.label < 0 || s.label >= classes) {
      throw std::invalid_argument(
          "classification_report: sample with OOD or invalid label " +
          std::to_string(s.label) + "; accuracy is defined on ID samples only");
    }
    const bool ok = s.predicted == s.label;
    correct += ok;
    if (profile.is_head(s.label)) {
      ++r.head_count;
      head_correct += ok;
    } else {
      ++r.tail_count;
      tail_correct += ok;
    }
  }
  if (scored.empty()) throw std::invalid_argument("classification_report: no samples");
  r.acc = static_cast<double>(correct) / static_cast<double>(scored.size());
  if (r.head_count) r.head_acc = static_cast<double>(head_correct) / r.head_count;
  if (r.tail_count) r.tail_acc = static_cast<double>(tail_correct) / r.tail_count;
  return r;
}

PoolMetrics pool_metrics(std::string name, std::span<const double> id_scores,
                         std::span<const double> ood_scores) {
  PoolMetrics m;
  m.name = std::move(name);
  m.auroc = auroc(id_scores, ood_scores);
  m.aupr = aupr(id_scores, ood_scores);
  m.eta = threshold_at_tpr(ood_scores, 0.95);
  m.fpr95 = fpr_at(m.eta, id_scores);
  m.id_count = id_scores.size();
  m.ood_count = ood_scores.size();
  return m;
}

PoolMetrics average_pools(const std::vector<PoolMetrics>& pools) {
  PoolMetrics avg;
  avg.name = "Average";
  if (pools.empty()) return avg;
  for (const auto& p : pools) {
    avg.auroc += p.auroc;
    avg.aupr += p.aupr;
    avg.fpr95 += p.fpr95;
    avg.eta += p.eta;
    avg.id_count = p.id_count;
    avg.ood_count += p.ood_count;
  }
  const auto n = static_cast<double>(pools.size());
  avg.auroc /= n;
  avg.aupr /= n;
  avg.fpr95 /= n;
  avg.eta /= n;
  return avg;
}

MetricsReport evaluate(const model::ModelParams& params, const data::LabeledDataset& id_test,
                       const std::vector<NamedPool>& pools,
                       const data::ClassProfile& profile) {
  if (pools.empty()) throw std::invalid_argument("evaluate: need at least one OOD pool");
  const auto id_scored = score(params, id_test.features, &id_test.labels);
  std::vector<double> id_scores;
  for (const auto& s : id_scored) id_scores.push_back(s.ood_score);

  MetricsReport r;
  r.accuracy = classification_report(id_scored, profile);
  for (const auto& np : pools) {
    const auto scored = score(params, np.pool->features);
    std::vector<double> ood_scores;
    for (const auto& s : scored) ood_scores.push_back(s.ood_score);
    r.pools.push_back(pool_metrics(np.name, id_scores, ood_scores));
  }
  r.average = average_pools(r.pools);
  return r;
}

}  // namespace ltood::detector
