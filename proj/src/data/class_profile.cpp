#include "ltood/data/class_profile.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ltood::data {

std::vector<std::int64_t> longtail_counts(int num_classes, std::int64_t n_max,
                                          double rho) {
  if (num_classes < 2) {
    throw std::invalid_argument("longtail_counts: need at least 2 classes");
  }
  if (n_max < 1) throw std::invalid_argument("longtail_counts: n_max < 1");
  if (!(rho >= 1.0) || !std::isfinite(rho)) {
    throw std::invalid_argument("longtail_counts: imbalance ratio must be >= 1");
  }
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes));
  const double denom = static_cast<double>(num_classes - 1);
  for (int i = 0; i < num_classes; ++i) {
    const double v =
        static_cast<double>(n_max) * std::pow(rho, -static_cast<double>(i) / denom);
    // Guard against values like 49.999999999 that are exact integers in
    // real arithmetic.
    auto n = static_cast<std::int64_t>(std::floor(v + 1e-9));
    counts[static_cast<std::size_t>(i)] = std::max<std::int64_t>(n, 1);
  }
  return counts;
}

std::vector<double> normalize_profile(const std::vector<std::int64_t>& counts) {
  if (counts.empty()) throw std::invalid_argument("normalize_profile: empty");
  double ss = 0.0;
  for (auto c : counts) {
    if (c <= 0) {
      throw std::invalid_argument("normalize_profile: counts must be positive");
    }
    ss += static_cast<double>(c) * static_cast<double>(c);
  }
  const double norm = std::sqrt(ss);
  std::vector<double> out;
  out.reserve(counts.size());
  for (auto c : counts) out.push_back(static_cast<double>(c) / norm);
  return out;
}

int head_class_count(int num_classes, double tail_fraction) {
  if (!(tail_fraction >= 0.0 && tail_fraction <= 1.0)) {
    throw std::invalid_argument("tail fraction k must lie in [0, 1], got " +
                                std::to_string(tail_fraction));
  }
  const auto tails = static_cast<int>(
      std::floor(tail_fraction * num_classes + 0.5 + 1e-9));
  return num_classes - std::min(tails, num_classes);
}

std::int64_t ClassProfile::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ClassProfile make_profile(std::vector<std::int64_t> counts,
                          double tail_fraction) {
  if (counts.empty()) throw std::invalid_argument("class profile: no classes");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 1) {
      throw std::invalid_argument("class profile: class " + std::to_string(i) +
                                  " has no samples");
    }
    if (i > 0 && counts[i] > counts[i - 1]) {
      throw std::invalid_argument(
          "class profile: counts must be nonincreasing (class " +
          std::to_string(i) + ")");
    }
  }
  ClassProfile p;
  p.normalized = normalize_profile(counts);
  p.counts = std::move(counts);
  p.tail_fraction = tail_fraction;
  p.head_count = head_class_count(p.num_classes(), tail_fraction);
  return p;
}

}  // namespace ltood::data
