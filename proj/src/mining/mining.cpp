#include "ltood/mining/mining.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ltood/error.hpp"

namespace ltood::mining {

const char* score_form_name(ScoreForm f) {
  return f == ScoreForm::head_logprob ? "head-logprob" : "tail-mass";
}

ScoreForm parse_score_form(const std::string& s) {
  if (s == "head-logprob") return ScoreForm::head_logprob;
  if (s == "tail-mass") return ScoreForm::tail_mass;
  throw std::invalid_argument("unknown score form '" + s +
                              "' (expected head-logprob or tail-mass)");
}

double outlier_score(std::span<const double> logits, int num_classes,
                     int head_count, ScoreForm form) {
  if (num_classes < 1 || logits.size() < static_cast<std::size_t>(num_classes)) {
    throw ShapeError("outlier_score: need at least " +
                     std::to_string(num_classes) + " logits, got " +
                     std::to_string(logits.size()));
  }
  if (head_count < 0 || head_count > num_classes) {
    throw std::out_of_range("outlier_score: head count " +
                            std::to_string(head_count) + " outside [0, " +
                            std::to_string(num_classes) + "]");
  }
  const auto c = static_cast<std::size_t>(num_classes);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, logits[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < c; ++j) s += std::exp(logits[j] - mx);
  const double lse = mx + std::log(s);

  const auto n = static_cast<std::size_t>(head_count);
  double score = 0.0;
  if (form == ScoreForm::head_logprob) {
    score = 1.0;
    for (std::size_t j = 0; j < n; ++j) score -= logits[j] - lse;
  } else {
    for (std::size_t j = n; j < c; ++j) score += std::exp(logits[j] - lse);
  }
  return score;
}

std::vector<double> outlier_scores_serial(const nd::Tensor& logits,
                                          int num_classes, int head_count,
                                          ScoreForm form) {
  std::vector<double> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    out[r] = outlier_score(logits.row(r), num_classes, head_count, form);
  }
  return out;
}

std::vector<double> outlier_scores(const nd::Tensor& logits, int num_classes,
                                   int head_count, ScoreForm form) {
  // Validate once so no exception escapes the parallel region.
  if (logits.rows() > 0) outlier_score(logits.row(0), num_classes, head_count, form);
  std::vector<double> out(logits.rows());
  const auto rows = static_cast<std::int64_t>(logits.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    out[static_cast<std::size_t>(r)] = outlier_score(
        logits.row(static_cast<std::size_t>(r)), num_classes, head_count, form);
  }
  return out;
}

MinedPartition partition_by_score(std::vector<double> scores) {
  if (scores.empty() || scores.size() % 3 != 0) {
    throw std::invalid_argument("mine: candidate count " +
                                std::to_string(scores.size()) +
                                " is not a positive multiple of 3");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  const std::size_t b = scores.size() / 3;
  MinedPartition p;
  p.tail_like.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b));
  p.neutral.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                   order.begin() + static_cast<std::ptrdiff_t>(2 * b));
  p.head_like.assign(order.begin() + static_cast<std::ptrdiff_t>(2 * b), order.end());
  p.scores = std::move(scores);
  return p;
}

MinedPartition mine(const nd::Tensor& candidates, const model::ModelParams& params,
                    int head_count, ScoreForm form) {
  if (candidates.rows() == 0 || candidates.rows() % 3 != 0) {
    throw std::invalid_argument("mine: candidate count " +
                                std::to_string(candidates.rows()) +
                                " is not a positive multiple of 3");
  }
  const nd::Tensor logits = model::predict_logits(params, candidates);
  return partition_by_score(
      outlier_scores(logits, params.config.num_classes, head_count, form));
}

nlohmann::json to_json(const MinedPartition& p) {
  return {{"scores", p.scores},
          {"partition",
           {{"tail_like", p.tail_like},
            {"neutral", p.neutral},
            {"head_like", p.head_like}}}};
}

}  // namespace ltood::mining
