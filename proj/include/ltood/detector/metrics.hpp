#pragma once

#include <span>

// Separability metrics between ID and OOD detector scores. Larger scores mean
// "more OOD"; OOD samples are the positive class throughout.
namespace ltood::detector {

// P(ood > id) + 0.5 * P(ood == id), via midranks in O((n + m) log(n + m)).
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

// Average precision with OOD as positive: sweep thresholds over the distinct
// scores in descending order and sum precision * recall increment.
double aupr(std::span<const double> id_scores, std::span<const double> ood_scores);

// Largest threshold eta with at least `target` of the OOD scores >= eta, i.e.
// the ceil(target * M)-th largest OOD score.
double threshold_at_tpr(std::span<const double> ood_scores, double target = 0.95);

// Fraction of ID scores >= eta.
double fpr_at(double eta, std::span<const double> id_scores);

}  // namespace ltood::detector
