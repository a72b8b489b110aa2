#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ltood/ndcore/tensor.hpp"

namespace ltood::temperature {

enum class Variant { sqrt, linear };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& s);

// Class-wise temperature that cools with training progress, faster for
// frequent classes:
//   sqrt:   tau * (1 - sqrt(e/E) * sqrt(n_c))
//   linear: tau * (1 - (e/E) * n_c)
// where n_c is the l2-normalized sample count of class c and e the zero-based
// epoch counter.
class Schedule {
 public:
  Schedule(double tau, int epochs, Variant variant, std::vector<double> normalized);

  double adjust(int epoch, int cls) const;
  // Temperatures of every class at one epoch.
  std::vector<double> at_epoch(int epoch) const;
  // [(E+1) x C], row e holds adjust(e, .).
  nd::Tensor table() const;

  double tau() const { return tau_; }
  int epochs() const { return epochs_; }
  Variant variant() const { return variant_; }
  int num_classes() const { return static_cast<int>(normalized_.size()); }
  const std::vector<double>& normalized() const { return normalized_; }

 private:
  double tau_;
  int epochs_;
  Variant variant_;
  std::vector<double> normalized_;
};

// CSV with columns epoch,class_1..class_C (one row per epoch 0..E).
void write_table_csv(std::ostream& os, const Schedule& s);

}  // namespace ltood::temperature
