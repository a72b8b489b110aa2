#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ltood::data {

// n_i = floor(n_max * rho^(-(i-1)/(C-1))) for i = 1..C: exponentially
// decaying per-class sample counts with n_1 / n_C ~= rho.
std::vector<std::int64_t> longtail_counts(int num_classes, std::int64_t n_max,
                                          double rho);

// counts / ||counts||_2, same order.
std::vector<double> normalize_profile(const std::vector<std::int64_t>& counts);

// C - round_half_up(k * C).
int head_class_count(int num_classes, double tail_fraction);

// Per-class training counts and the head/tail partition. Classes are
// 0-based: heads are [0, head_count), tails are [head_count, C).
struct ClassProfile {
  std::vector<std::int64_t> counts;
  std::vector<double> normalized;
  double tail_fraction = 0.6;
  int head_count = 0;

  int num_classes() const { return static_cast<int>(counts.size()); }
  int tail_count() const { return num_classes() - head_count; }
  bool is_head(int cls) const { return cls < head_count; }
  bool is_tail(int cls) const { return cls >= head_count; }
  std::int64_t total() const;
};

// Validates counts (nonempty, positive, nonincreasing) and tail_fraction in
// [0, 1].
ClassProfile make_profile(std::vector<std::int64_t> counts,
                          double tail_fraction);

}  // namespace ltood::data
