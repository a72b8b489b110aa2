#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "ltood/losses/losses.hpp"
#include "ltood/mining/mining.hpp"
#include "ltood/model/model.hpp"
#include "ltood/temperature/temperature.hpp"

namespace ltood::trainer {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 48;
  losses::LossWeights weights;
  double tail_fraction = 0.6;  // k
  double tau = 0.1;
  temperature::Variant variant = temperature::Variant::sqrt;
  // Fraction of epochs trained on mixed outliers before switching to
  // neutral-only outliers.
  double stage_split = 0.75;
  std::string optimizer = "adam";
  double learning_rate = 1e-3;
  bool cosine = true;
  std::uint64_t seed = 0;
  bool normalize_embeddings = true;
  mining::ScoreForm score_form = mining::ScoreForm::head_logprob;
  // Re-mine every N iterations; the candidate draw is reused in between.
  int mine_every = 1;
  // 0 means floor(train size / batch size), at least 1.
  int iters_per_epoch = 0;
  // Hidden sizes; input_dim and num_classes come from the dataset.
  model::ModelConfig model;

  // "ocl-baseline" when both contrastive weights are zero, otherwise "rscl".
  std::string run_label() const;
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
// Applies a partial JSON object of overrides (same keys as to_json).
TrainConfig apply_overrides(TrainConfig base, const nlohmann::json& delta);

}  // namespace ltood::trainer
