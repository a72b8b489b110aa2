#include "ltood/trainer/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ltood/model/checkpoint.hpp"
#include "ltood/temperature/temperature.hpp"

namespace ltood::trainer {

using nlohmann::json;

int mixed_epochs(double stage_split, int epochs) {
  return static_cast<int>(std::floor(stage_split * epochs + 1e-9));
}

bool is_mixed_stage(int epoch, double stage_split, int epochs) {
  return epoch < mixed_epochs(stage_split, epochs);
}

namespace {

// First `count` entries of a Fisher-Yates shuffle of `items`.
std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> items,
                                                  std::size_t count,
                                                  std::mt19937_64& rng) {
  if (count > items.size()) {
    throw std::invalid_argument("cannot draw " + std::to_string(count) + " of " +
                                std::to_string(items.size()) + " items");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(count);
  return items;
}

std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

std::vector<std::size_t> select_outlier_batch(int epoch,
                                              const mining::MinedPartition& partition,
                                              int batch_size, const TrainConfig& config,
                                              std::mt19937_64& rng) {
  const auto b = static_cast<std::size_t>(batch_size);
  if (is_mixed_stage(epoch, config.stage_split, config.epochs)) {
    if (b % 3 != 0) {
      throw std::invalid_argument("mixed outlier batch needs B divisible by 3, got " +
                                  std::to_string(b));
    }
    std::vector<std::size_t> out;
    for (const auto* cat : {&partition.tail_like, &partition.head_like, &partition.neutral}) {
      auto part = draw_without_replacement(*cat, b / 3, rng);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  return draw_without_replacement(partition.neutral, b, rng);
}

TrainState init_state(const TrainConfig& config, std::size_t input_dim,
                      int num_classes) {
  config.validate();
  model::ModelConfig mc = config.model;
  mc.input_dim = input_dim;
  mc.num_classes = num_classes;
  TrainState s;
  s.params = model::init_params(mc, config.seed);
  std::vector<nd::Shape> shapes;
  for (const auto& t : s.params.tensors) shapes.push_back(t.shape());
  s.optimizer = nd::Adam(shapes);
  // Separate stream from the parameter initializer.
  s.rng.seed(config.seed ^ 0x9e3779b97f4a7c15ULL);
  return s;
}

json to_json(const LogRecord& r) {
  return json{{"epoch", r.epoch},   {"step", r.step},
              {"ocl", r.loss.ocl},  {"tail", r.loss.tail},
              {"head", r.loss.head}, {"total", r.loss.total}};
}

double learning_rate_at(const TrainConfig& config, int epoch) {
  if (!config.cosine) return config.learning_rate;
  const double progress = static_cast<double>(epoch) / config.epochs;
  return config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

losses::LossResult build_loss(nd::Tape& tape, const model::BoundParams& b,
                              const TrainConfig& config,
                              const data::ClassProfile& profile, int epoch,
                              const nd::Tensor& id_x,
                              const std::vector<int>& id_labels,
                              const nd::Tensor& outlier_x) {
  const int classes = profile.num_classes();
  if (b.config->num_classes != classes) {
    throw std::invalid_argument("model has " + std::to_string(b.config->num_classes) +
                                " classes, profile has " + std::to_string(classes));
  }
  const temperature::Schedule schedule(config.tau, config.epochs, config.variant,
                                       profile.normalized);
  nd::Var id_feat = model::encode(b, tape.constant(id_x));
  nd::Var out_feat = model::encode(b, tape.constant(outlier_x));

  losses::LossInputs in;
  in.id_logits = model::classify(b, id_feat);
  in.outlier_logits = model::classify(b, out_feat);
  in.id_embeddings = model::project(b, id_feat, config.normalize_embeddings);
  in.outlier_embeddings = model::project(b, out_feat, config.normalize_embeddings);
  in.labels = id_labels;
  if (profile.tail_count() > 0) {
    in.tail_prototypes = model::tail_prototypes(b, profile.head_count);
  }
  in.outlier_prototype = model::outlier_prototype(b);
  in.class_tau = schedule.at_epoch(std::min(epoch, config.epochs));
  in.tau = config.tau;
  in.head_count = profile.head_count;
  in.num_classes = classes;
  in.weights = config.weights;
  return losses::rscl_loss(in);
}

std::filesystem::path dump_batch(const std::filesystem::path& dir, const TrainState& s,
                                 const nd::Tensor& id_x, const std::vector<int>& labels,
                                 const nd::Tensor& outlier_x, const std::string& reason) {
  if (dir.empty()) return {};
  std::filesystem::create_directories(dir);
  const auto path = dir / "nonfinite_batch.json";
  json j = {{"reason", reason},
            {"epoch", s.epoch},
            {"step", s.step},
            {"id_features", std::vector<double>(id_x.values().begin(), id_x.values().end())},
            {"id_shape", id_x.shape()},
            {"labels", labels},
            {"outlier_features",
             std::vector<double>(outlier_x.values().begin(), outlier_x.values().end())},
            {"outlier_shape", outlier_x.shape()}};
  std::ofstream os(path);
  os << j.dump() << '\n';
  return os ? path : std::filesystem::path{};
}

}  // namespace

losses::LossBreakdown evaluate_loss(const model::ModelParams& params,
                                    const TrainConfig& config,
                                    const data::ClassProfile& profile, int epoch,
                                    const nd::Tensor& id_x,
                                    const std::vector<int>& id_labels,
                                    const nd::Tensor& outlier_x) {
  nd::Tape tape(nd::Mode::inference);
  auto b = model::bind(tape, params, false);
  return build_loss(tape, b, config, profile, epoch, id_x, id_labels, outlier_x)
      .breakdown;
}

losses::LossBreakdown train_step(TrainState& state, const StepContext& ctx,
                                 const nd::Tensor& id_x,
                                 const std::vector<int>& id_labels,
                                 const nd::Tensor& outlier_x) {
  const TrainConfig& config = *ctx.config;
  nd::Tape tape;
  auto b = model::bind(tape, state.params, true);
  losses::LossResult loss;
  try {
    loss = build_loss(tape, b, config, *ctx.profile, state.epoch, id_x, id_labels,
                      outlier_x);
  } catch (const NonFiniteError& e) {
    const auto path = dump_batch(ctx.diagnostic_dir, state, id_x, id_labels, outlier_x, e.what());
    throw NonFiniteLoss(std::string("non-finite loss at step ") +
                            std::to_string(state.step) + ": " + e.what(),
                        path);
  }
  if (!std::isfinite(loss.breakdown.total)) {
    const auto path = dump_batch(ctx.diagnostic_dir, state, id_x, id_labels, outlier_x,
                                 "non-finite total");
    throw NonFiniteLoss("non-finite loss at step " + std::to_string(state.step), path);
  }
  tape.backward(loss.total);

  std::array<nd::Tensor*, model::kNumParams> params{};
  std::array<const nd::Tensor*, model::kNumParams> grads{};
  for (std::size_t i = 0; i < model::kNumParams; ++i) {
    params[i] = &state.params.tensors[i];
    grads[i] = &tape.grad(b.vars[i]);
    if (!grads[i]->all_finite()) {
      const std::string what = "non-finite gradient of " + std::string(model::param_name(i));
      const auto path = dump_batch(ctx.diagnostic_dir, state, id_x, id_labels, outlier_x, what);
      throw NonFiniteLoss(what + " at step " + std::to_string(state.step), path);
    }
  }
  if (config.optimizer == "sgd") {
    for (std::size_t i = 0; i < model::kNumParams; ++i) {
      auto p = params[i]->values();
      auto g = grads[i]->values();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= ctx.learning_rate * g[j];
    }
  } else {
    state.optimizer.step(params, grads, ctx.learning_rate);
  }
  // A finite loss can still push the parameters past the double range; the
  // state is unusable afterwards, so stop here with the batch that did it.
  if (!state.params.all_finite()) {
    const auto path = dump_batch(ctx.diagnostic_dir, state, id_x, id_labels, outlier_x,
                                 "non-finite parameters after update");
    throw NonFiniteLoss("non-finite parameters after the update at step " +
                            std::to_string(state.step),
                        path);
  }
  ++state.step;
  state.last = loss.breakdown;
  return loss.breakdown;
}

void fit(TrainState& state, const TrainConfig& config, const data::ClassProfile& profile,
         const data::LabeledDataset& train, const data::OutlierPool& aux,
         const FitOptions& options) {
  config.validate();
  if (train.size() == 0) throw std::invalid_argument("fit: empty training set");
  if (aux.size() == 0) throw std::invalid_argument("fit: empty outlier pool");
  const auto b = static_cast<std::size_t>(config.batch_size);
  const std::size_t n = train.size();
  const int iters = config.iters_per_epoch > 0
                        ? config.iters_per_epoch
                        : static_cast<int>(std::max<std::size_t>(1, n / b));
  StepContext ctx{&config, &profile, 0.0, options.diagnostic_dir};

  nd::Tensor candidates;
  mining::MinedPartition partition;
  for (; state.epoch < config.epochs; ++state.epoch) {
    if (options.stop_after_epoch && state.epoch >= *options.stop_after_epoch) break;
    ctx.learning_rate = learning_rate_at(config, state.epoch);
    const auto order = draw_without_replacement(iota_vec(n), n, state.rng);
    for (int it = 0; it < iters; ++it) {
      std::vector<std::size_t> id_idx(b);
      std::vector<int> labels(b);
      for (std::size_t i = 0; i < b; ++i) {
        id_idx[i] = order[(static_cast<std::size_t>(it) * b + i) % n];
        labels[i] = train.labels[id_idx[i]];
      }
      const nd::Tensor id_x = train.rows(id_idx);

      if (it % config.mine_every == 0 || candidates.numel() <= 1) {
        std::vector<std::size_t> cand_idx;
        if (aux.size() >= 3 * b) {
          cand_idx = draw_without_replacement(iota_vec(aux.size()), 3 * b, state.rng);
        } else {
          std::uniform_int_distribution<std::size_t> pick(0, aux.size() - 1);
          for (std::size_t i = 0; i < 3 * b; ++i) cand_idx.push_back(pick(state.rng));
        }
        candidates = aux.rows(cand_idx);
        try {
          partition = mining::mine(candidates, state.params, profile.head_count,
                                   config.score_form);
        } catch (const NonFiniteError& e) {
          const auto path = dump_batch(options.diagnostic_dir, state, id_x, labels, candidates,
                                       std::string("mining: ") + e.what());
          throw NonFiniteLoss("non-finite outlier scores at step " +
                                  std::to_string(state.step) + ": " + e.what(),
                              path);
        }
      }
      const auto chosen = select_outlier_batch(state.epoch, partition, config.batch_size,
                                               config, state.rng);
      const nd::Tensor outlier_x = data::gather(candidates, chosen);

      const auto loss = train_step(state, ctx, id_x, labels, outlier_x);
      if (options.on_step) options.on_step(LogRecord{state.epoch, state.step, loss});
    }
  }
}

void save_state(const std::filesystem::path& stem, const TrainState& state,
                const TrainConfig& config) {
  model::Checkpoint ck;
  ck.params = state.params;
  ck.meta.seed = config.seed;
  ck.meta.epoch = state.epoch;
  std::ostringstream rng;
  rng << state.rng;
  ck.meta.extra = {{"config", to_json(config)},
                   {"step", state.step},
                   {"adam_steps", state.optimizer.steps()},
                   {"rng", rng.str()}};
  const auto& m = state.optimizer.first_moments();
  const auto& v = state.optimizer.second_moments();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::string name(model::param_name(i));
    ck.blocks.emplace("adam.m." + name, m[i]);
    ck.blocks.emplace("adam.v." + name, v[i]);
  }
  model::save_checkpoint(stem, ck);
}

TrainState load_state(const std::filesystem::path& stem) {
  model::Checkpoint ck = model::load_checkpoint(stem);
  TrainState s;
  s.params = std::move(ck.params);
  s.epoch = ck.meta.epoch;
  const json& extra = ck.meta.extra;
  s.step = extra.value("step", std::int64_t{0});
  std::vector<nd::Shape> shapes;
  for (const auto& t : s.params.tensors) shapes.push_back(t.shape());
  s.optimizer = nd::Adam(shapes);
  s.optimizer.set_steps(extra.value("adam_steps", std::int64_t{0}));
  for (std::size_t i = 0; i < model::kNumParams; ++i) {
    const std::string name(model::param_name(i));
    auto mi = ck.blocks.find("adam.m." + name);
    auto vi = ck.blocks.find("adam.v." + name);
    if (mi != ck.blocks.end()) s.optimizer.first_moments()[i] = mi->second;
    if (vi != ck.blocks.end()) s.optimizer.second_moments()[i] = vi->second;
  }
  if (extra.contains("rng")) {
    std::istringstream is(extra["rng"].get<std::string>());
    is >> s.rng;
  }
  return s;
}

}  // namespace ltood::trainer
