#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "ltood/data/class_profile.hpp"
#include "ltood/data/dataset.hpp"
#include "ltood/error.hpp"
#include "ltood/ndcore/adam.hpp"
#include "ltood/trainer/config.hpp"

namespace ltood::trainer {

// Mixed outliers iff epoch < floor(stage_split * epochs).
bool is_mixed_stage(int epoch, double stage_split, int epochs);
int mixed_epochs(double stage_split, int epochs);

// Indices into the mined candidates: B/3 from each category in the mixed
// stage, B from the neutral category afterwards.
std::vector<std::size_t> select_outlier_batch(int epoch,
                                              const mining::MinedPartition& partition,
                                              int batch_size, const TrainConfig& config,
                                              std::mt19937_64& rng);

struct TrainState {
  int epoch = 0;  // next epoch to run
  std::int64_t step = 0;
  model::ModelParams params;
  nd::Adam optimizer;
  std::mt19937_64 rng;
  losses::LossBreakdown last;
};

TrainState init_state(const TrainConfig& config, std::size_t input_dim,
                      int num_classes);

struct LogRecord {
  int epoch = 0;
  std::int64_t step = 0;
  losses::LossBreakdown loss;
};

nlohmann::json to_json(const LogRecord& r);

// Loss evaluated on a batch without updating anything.
losses::LossBreakdown evaluate_loss(const model::ModelParams& params,
                                    const TrainConfig& config,
                                    const data::ClassProfile& profile, int epoch,
                                    const nd::Tensor& id_x,
                                    const std::vector<int>& id_labels,
                                    const nd::Tensor& outlier_x);

// Raised when the objective stops being finite. `dump` names the file holding
// the offending batch, if one could be written.
class NonFiniteLoss : public NonFiniteError {
 public:
  NonFiniteLoss(const std::string& what, std::filesystem::path dump)
      : NonFiniteError(what), dump_(std::move(dump)) {}
  const std::filesystem::path& dump() const { return dump_; }

 private:
  std::filesystem::path dump_;
};

struct StepContext {
  const TrainConfig* config = nullptr;
  const data::ClassProfile* profile = nullptr;
  double learning_rate = 0.0;
  // Where to write the batch when the loss is non-finite (empty: no dump).
  std::filesystem::path diagnostic_dir;
};

// One Adam update on the combined objective.
losses::LossBreakdown train_step(TrainState& state, const StepContext& ctx,
                                 const nd::Tensor& id_x,
                                 const std::vector<int>& id_labels,
                                 const nd::Tensor& outlier_x);

double learning_rate_at(const TrainConfig& config, int epoch);

struct FitOptions {
  std::function<void(const LogRecord&)> on_step;
  // Stop after this many epochs have completed (for resume tests).
  std::optional<int> stop_after_epoch;
  std::filesystem::path diagnostic_dir;
};

// Runs epochs state.epoch .. E-1 in place.
void fit(TrainState& state, const TrainConfig& config,
         const data::ClassProfile& profile, const data::LabeledDataset& train,
         const data::OutlierPool& aux, const FitOptions& options = {});

// Model, optimizer moments, RNG and counters.
void save_state(const std::filesystem::path& stem, const TrainState& state,
                const TrainConfig& config);
TrainState load_state(const std::filesystem::path& stem);

}  // namespace ltood::trainer
