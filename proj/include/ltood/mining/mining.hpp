#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltood/model/model.hpp"

namespace ltood::mining {

// head-logprob: 1 - sum over head classes n < N of log softmax_C(f)_n
// tail-mass:    sum over tail classes of softmax_C(f)_c
// Both softmaxes run over the C ID logits only; a trailing outlier logit is
// ignored.
enum class ScoreForm { head_logprob, tail_mass };

const char* score_form_name(ScoreForm f);
ScoreForm parse_score_form(const std::string& s);

double outlier_score(std::span<const double> logits, int num_classes,
                     int head_count, ScoreForm form = ScoreForm::head_logprob);

// Scores every row of a [n x C] or [n x (C+1)] logit matrix.
std::vector<double> outlier_scores_serial(const nd::Tensor& logits,
                                          int num_classes, int head_count,
                                          ScoreForm form = ScoreForm::head_logprob);
// OpenMP over rows; identical results to the serial version.
std::vector<double> outlier_scores(const nd::Tensor& logits, int num_classes,
                                   int head_count,
                                   ScoreForm form = ScoreForm::head_logprob);

// Candidates sorted by descending score (stable on the original index) and
// cut into thirds: top -> tail-like, middle -> neutral, bottom -> head-like.
struct MinedPartition {
  std::vector<std::size_t> tail_like;
  std::vector<std::size_t> neutral;
  std::vector<std::size_t> head_like;
  std::vector<double> scores;

  std::size_t third() const { return tail_like.size(); }
};

MinedPartition partition_by_score(std::vector<double> scores);

// Scores `candidates` (3B rows of raw features) with the current model and
// partitions them. No gradients are recorded.
MinedPartition mine(const nd::Tensor& candidates, const model::ModelParams& params,
                    int head_count, ScoreForm form = ScoreForm::head_logprob);

nlohmann::json to_json(const MinedPartition& p);

}  // namespace ltood::mining
