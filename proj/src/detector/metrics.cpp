#include "ltood/detector/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ltood::detector {

namespace {

void require_nonempty(std::span<const double> s, const char* what) {
  if (s.empty()) throw std::invalid_argument(std::string(what) + " is empty");
}

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, "auroc: ID score list");
  require_nonempty(ood_scores, "auroc: OOD score list");
  struct Item {
    double score;
    bool ood;
  };
  std::vector<Item> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, false});
  for (double s : ood_scores) all.push_back({s, true});
  std::sort(all.begin(), all.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  // Sum of 1-based midranks of the OOD items.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    std::size_t ood_in_group = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      ood_in_group += all[j].ood ? 1 : 0;
      ++j;
    }
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += midrank * static_cast<double>(ood_in_group);
    i = j;
  }
  const auto m = static_cast<double>(ood_scores.size());
  const auto n = static_cast<double>(id_scores.size());
  return (rank_sum - m * (m + 1.0) / 2.0) / (m * n);
}

double aupr(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, "aupr: ID score list");
  require_nonempty(ood_scores, "aupr: OOD score list");
  struct Item {
    double score;
    bool ood;
  };
  std::vector<Item> all;
  for (double s : id_scores) all.push_back({s, false});
  for (double s : ood_scores) all.push_back({s, true});
  std::sort(all.begin(), all.end(),
            [](const Item& a, const Item& b) { return a.score > b.score; });
  const auto positives = static_cast<double>(ood_scores.size());
  double tp = 0.0;
  double fp = 0.0;
  double prev_recall = 0.0;
  double ap = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].ood ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / positives;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double threshold_at_tpr(std::span<const double> ood_scores, double target) {
  require_nonempty(ood_scores, "threshold_at_tpr: OOD score list");
  if (!(target > 0.0 && target <= 1.0)) {
    throw std::invalid_argument("threshold_at_tpr: target must lie in (0, 1]");
  }
  const std::size_t m = ood_scores.size();
  // Smallest count meeting the target; the tolerance absorbs products such as
  // 0.95 * 20 landing a hair above an integer.
  auto need = static_cast<std::size_t>(std::ceil(target * static_cast<double>(m) - 1e-9));
  need = std::clamp<std::size_t>(need, 1, m);
  std::vector<double> sorted(ood_scores.begin(), ood_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  return sorted[need - 1];
}

double fpr_at(double eta, std::span<const double> id_scores) {
  require_nonempty(id_scores, "fpr_at: ID score list");
  const auto hits = std::count_if(id_scores.begin(), id_scores.end(),
                                  [eta](double s) { return s >= eta; });
  return static_cast<double>(hits) / static_cast<double>(id_scores.size());
}

}  // namespace ltood::detector
