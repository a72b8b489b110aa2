#pragma once

#include <filesystem>
#include <optional>
#include <variant>

#include "ltood/data/dataset.hpp"

namespace ltood::data {

// Columns f0..f{dim-1}, plus an integer "label" column when labeled.
struct CsvSchema {
  std::size_t dim = 0;
  bool labeled = true;
  // Labels must lie in [0, num_classes]; num_classes marks OOD rows.
  std::optional<int> num_classes;
};

void save_csv(const std::filesystem::path& path, const LabeledDataset& ds);
void save_csv(const std::filesystem::path& path, const OutlierPool& pool);

LabeledDataset load_labeled_csv(const std::filesystem::path& path,
                                const CsvSchema& schema,
                                Split split = Split::train);
OutlierPool load_pool_csv(const std::filesystem::path& path, std::size_t dim);

std::variant<LabeledDataset, OutlierPool> load_csv(
    const std::filesystem::path& path, const CsvSchema& schema);

}  // namespace ltood::data
