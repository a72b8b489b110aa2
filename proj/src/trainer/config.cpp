#include "ltood/trainer/config.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace ltood::trainer {

using nlohmann::json;

std::string TrainConfig::run_label() const {
  return weights.beta == 0.0 && weights.gamma == 0.0 ? "ocl-baseline" : "rscl";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 3) fail("batch_size must be >= 3");
  if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0) {
    fail("loss weights must be >= 0");
  }
  if (!(tail_fraction >= 0.0 && tail_fraction <= 1.0)) fail("k must lie in [0, 1]");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (!(stage_split >= 0.0 && stage_split <= 1.0)) fail("stage_split must lie in [0, 1]");
  if (optimizer != "adam" && optimizer != "sgd") fail("optimizer must be adam or sgd");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("lr must be >= 0");
  if (mine_every < 1) fail("mine_every must be >= 1");
  if (iters_per_epoch < 0) fail("iters_per_epoch must be >= 0");
  const int mixed = static_cast<int>(std::floor(stage_split * epochs + 1e-9));
  if (mixed > 0 && batch_size % 3 != 0) {
    fail("batch_size must be divisible by 3 when mixed outliers are used");
  }
}

json to_json(const TrainConfig& c) {
  return json{
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"alpha", c.weights.alpha},
      {"beta", c.weights.beta},
      {"gamma", c.weights.gamma},
      {"k", c.tail_fraction},
      {"tau", c.tau},
      {"variant", temperature::variant_name(c.variant)},
      {"stage_split", c.stage_split},
      {"optimizer", c.optimizer},
      {"lr", c.learning_rate},
      {"cosine", c.cosine},
      {"seed", c.seed},
      {"normalize_embeddings", c.normalize_embeddings},
      {"score_form", mining::score_form_name(c.score_form)},
      {"mine_every", c.mine_every},
      {"iters_per_epoch", c.iters_per_epoch},
      {"hidden_dim", c.model.hidden_dim},
      {"feature_dim", c.model.feature_dim},
      {"proj_hidden_dim", c.model.proj_hidden_dim},
      {"proj_dim", c.model.proj_dim},
  };
}

TrainConfig apply_overrides(TrainConfig c, const json& delta) {
  if (!delta.is_object()) throw std::invalid_argument("config: expected a JSON object");
  static const std::set<std::string> known = {
      "epochs", "batch_size", "alpha", "beta", "gamma", "k", "tau", "variant",
      "stage_split", "optimizer", "lr", "cosine", "seed", "normalize_embeddings",
      "score_form", "mine_every", "iters_per_epoch", "hidden_dim", "feature_dim",
      "proj_hidden_dim", "proj_dim"};
  for (const auto& [key, value] : delta.items()) {
    if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  try {
    c.epochs = delta.value("epochs", c.epochs);
    c.batch_size = delta.value("batch_size", c.batch_size);
    c.weights.alpha = delta.value("alpha", c.weights.alpha);
    c.weights.beta = delta.value("beta", c.weights.beta);
    c.weights.gamma = delta.value("gamma", c.weights.gamma);
    c.tail_fraction = delta.value("k", c.tail_fraction);
    c.tau = delta.value("tau", c.tau);
    if (delta.contains("variant")) {
      c.variant = temperature::parse_variant(delta["variant"].get<std::string>());
    }
    c.stage_split = delta.value("stage_split", c.stage_split);
    c.optimizer = delta.value("optimizer", c.optimizer);
    c.learning_rate = delta.value("lr", c.learning_rate);
    c.cosine = delta.value("cosine", c.cosine);
    c.seed = delta.value("seed", c.seed);
    c.normalize_embeddings = delta.value("normalize_embeddings", c.normalize_embeddings);
    if (delta.contains("score_form")) {
      c.score_form = mining::parse_score_form(delta["score_form"].get<std::string>());
    }
    c.mine_every = delta.value("mine_every", c.mine_every);
    c.iters_per_epoch = delta.value("iters_per_epoch", c.iters_per_epoch);
    c.model.hidden_dim = delta.value("hidden_dim", c.model.hidden_dim);
    c.model.feature_dim = delta.value("feature_dim", c.model.feature_dim);
    c.model.proj_hidden_dim = delta.value("proj_hidden_dim", c.model.proj_hidden_dim);
    c.model.proj_dim = delta.value("proj_dim", c.model.proj_dim);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

TrainConfig config_from_json(const json& j, TrainConfig base) {
  return apply_overrides(std::move(base), j);
}

}  // namespace ltood::trainer
