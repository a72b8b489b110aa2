#include "ltood/data/dataset.hpp"

#include <algorithm>

#include "ltood/error.hpp"

namespace ltood::data {

const char* split_name(Split s) { return s == Split::train ? "train" : "test"; }

nd::Tensor gather(const nd::Tensor& features,
                  const std::vector<std::size_t>& idx) {
  const std::size_t cols = features.cols();
  nd::Tensor out = nd::Tensor::zeros({idx.size(), cols});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= features.rows()) {
      throw ShapeError("row index " + std::to_string(idx[i]) +
                       " out of range");
    }
    auto src = features.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

nd::Tensor LabeledDataset::rows(const std::vector<std::size_t>& idx) const {
  return gather(features, idx);
}

nd::Tensor OutlierPool::rows(const std::vector<std::size_t>& idx) const {
  return gather(features, idx);
}

}  // namespace ltood::data
