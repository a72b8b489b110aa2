#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltood/data/class_profile.hpp"
#include "ltood/data/dataset.hpp"

namespace ltood::data {

// Isotropic Gaussian class clusters: class c ~ N(means[c], stddev^2 I).
struct ClusterSpec {
  nd::Tensor means = nd::Tensor::zeros({0, 0});  // [C x D_in]
  double stddev = 1.0;

  int num_classes() const { return static_cast<int>(means.rows()); }
  std::size_t dim() const { return means.cols(); }
};

// Means drawn uniformly on the sphere of the given radius.
ClusterSpec random_cluster_spec(int num_classes, std::size_t dim, double radius,
                                double stddev, std::uint64_t seed);

struct SyntheticSplits {
  LabeledDataset train;
  LabeledDataset test;
};

// Train split follows the profile counts exactly; test split has
// `test_per_class` rows for every class.
SyntheticSplits synth_id(const ClassProfile& profile, const ClusterSpec& spec,
                         std::size_t test_per_class, std::uint64_t seed);

enum class OutlierKind { near_tail, near_head, ambient };

const char* outlier_kind_name(OutlierKind k);
OutlierKind parse_outlier_kind(const std::string& name);

struct OutlierParams {
  // near-tail / near-head: stddev multiplier around the chosen class mean.
  double inflation = 3.0;
  // ambient: N(0, ambient_scale^2 I).
  double ambient_scale = 6.0;
};

OutlierPool synth_outliers(OutlierKind kind, std::size_t n,
                           const ClassProfile& profile, const ClusterSpec& spec,
                           const OutlierParams& params, std::uint64_t seed);

// Concatenates pools row-wise (used for mixed auxiliary pools).
OutlierPool concat_pools(const std::vector<OutlierPool>& pools,
                         std::string generator);

}  // namespace ltood::data
