#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltood/ndcore/tensor.hpp"

namespace ltood::data {

enum class Split { train, test };

const char* split_name(Split s);

// Rows of features with 0-based class labels. A label equal to the class
// count marks an out-of-distribution row.
struct LabeledDataset {
  nd::Tensor features = nd::Tensor::zeros({0, 0});
  std::vector<int> labels;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  nd::Tensor rows(const std::vector<std::size_t>& idx) const;
};

// Unlabeled auxiliary or test outliers.
struct OutlierPool {
  nd::Tensor features = nd::Tensor::zeros({0, 0});
  std::string generator;
  std::uint64_t seed = 0;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  nd::Tensor rows(const std::vector<std::size_t>& idx) const;
};

nd::Tensor gather(const nd::Tensor& features,
                  const std::vector<std::size_t>& idx);

}  // namespace ltood::data
