#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "ltood/model/model.hpp"

namespace ltood::model {

// A checkpoint is two files next to each other:
//   <stem>.json  manifest: dims, seed, epoch, and the ordered tensor layout
//   <stem>.bin   every tensor flattened, float64 little-endian, in layout order
struct CheckpointMeta {
  std::uint64_t seed = 0;
  int epoch = 0;
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
  // Additional named tensors (optimizer moments); written after the model.
  std::map<std::string, nd::Tensor> blocks;
};

std::filesystem::path manifest_path(const std::filesystem::path& stem);
std::filesystem::path data_path(const std::filesystem::path& stem);

void save_checkpoint(const std::filesystem::path& stem, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& stem);

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace ltood::model
