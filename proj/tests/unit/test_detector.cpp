#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "ltood/detector/detector.hpp"
#include "ltood/detector/metrics.hpp"

using namespace ltood;
using namespace ltood::detector;

namespace {

using Scores = std::vector<double>;

double auroc_pairs(const Scores& id, const Scores& ood) {
  double wins = 0.0;
  for (double o : ood) {
    for (double i : id) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Average precision by sweeping every distinct score as a threshold.
double ap_sweep(const Scores& id, const Scores& ood) {
  std::set<double, std::greater<>> thresholds(id.begin(), id.end());
  thresholds.insert(ood.begin(), ood.end());
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    const auto tp = std::count_if(ood.begin(), ood.end(), [t](double s) { return s >= t; });
    const auto fp = std::count_if(id.begin(), id.end(), [t](double s) { return s >= t; });
    const double recall = static_cast<double>(tp) / static_cast<double>(ood.size());
    if (tp > 0) ap += (recall - prev_recall) * static_cast<double>(tp) / static_cast<double>(tp + fp);
    prev_recall = recall;
  }
  return ap;
}

// Largest candidate threshold detecting at least 95% of the OOD scores.
double threshold_sweep(const Scores& ood) {
  double best = -INFINITY;
  for (double t : ood) {
    const auto hits = std::count_if(ood.begin(), ood.end(), [t](double s) { return s >= t; });
    if (hits * 100 >= static_cast<long>(ood.size()) * 95) best = std::max(best, t);
  }
  return best;
}

Scores draw(std::size_t n, std::mt19937_64& rng, double shift, bool coarse) {
  std::normal_distribution<double> d(shift, 1.0);
  Scores s(n);
  for (auto& x : s) x = coarse ? std::round(d(rng) * 2.0) / 2.0 : d(rng);
  return s;
}

nd::Tensor logit_rows(std::initializer_list<std::initializer_list<double>> rows) {
  return nd::Tensor::matrix(rows);
}

}  // namespace

TEST_CASE("auroc examples") {
  CHECK(auroc(Scores{0.1, 0.2}, Scores{0.3, 0.4}) == 1.0);
  CHECK(auroc(Scores{0.1, 0.3}, Scores{0.2, 0.4}) == 0.75);
  CHECK(auroc(Scores{0.5}, Scores{0.5}) == 0.5);
  CHECK(auroc(Scores{0.3, 0.4}, Scores{0.1, 0.2}) == 0.0);
  CHECK_THROWS_AS(auroc(Scores{}, Scores{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(auroc(Scores{1.0}, Scores{}), std::invalid_argument);
}

TEST_CASE("rank auroc matches all-pairs brute force") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> size(1, 500);
  for (int t = 0; t < 200; ++t) {
    const bool coarse = t % 3 == 0;  // heavy ties every third instance
    const auto id = draw(size(rng), rng, 0.0, coarse);
    const auto ood = draw(size(rng), rng, 0.7, coarse);
    const double a = auroc(id, ood);
    CHECK(std::abs(a - auroc_pairs(id, ood)) < 1e-12);
    CHECK(std::abs(a + auroc(ood, id) - 1.0) < 1e-12);
  }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto id = draw(80, rng, 0.0, t % 2 == 0);
    const auto ood = draw(60, rng, 0.5, t % 2 == 0);
    auto f = [](Scores s) {
      for (auto& x : s) x = std::exp(2.0 * x) + 3.0;
      return s;
    };
    CHECK(std::abs(auroc(id, ood) - auroc(f(id), f(ood))) < 1e-12);
  }
}

TEST_CASE("aupr examples") {
  CHECK(aupr(Scores{0.1, 0.2}, Scores{0.3, 0.4}) == 1.0);
  CHECK(aupr(Scores{0.1, 0.2}, Scores{0.9}) == 1.0);
  CHECK(aupr(Scores{0.1, 0.3}, Scores{0.2}) == 0.5);
  // OOD (0.4, 0.2), ID (0.3, 0.1): precision 1 at recall 1/2, 2/3 at recall 1.
  CHECK(aupr(Scores{0.3, 0.1}, Scores{0.4, 0.2}) == doctest::Approx(0.5 + 1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(aupr(Scores{}, Scores{1.0}), std::invalid_argument);
}

TEST_CASE("aupr matches a threshold sweep") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  for (int t = 0; t < 200; ++t) {
    const bool coarse = t % 2 == 0;
    const auto id = draw(size(rng), rng, 0.0, coarse);
    const auto ood = draw(size(rng), rng, 0.5, coarse);
    CHECK(std::abs(aupr(id, ood) - ap_sweep(id, ood)) < 1e-12);
  }
}

TEST_CASE("threshold_at_tpr examples") {
  const Scores tenths = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  CHECK(threshold_at_tpr(tenths) == 0.1);
  CHECK(threshold_at_tpr(Scores(7, 0.25)) == 0.25);
  CHECK(threshold_at_tpr(Scores{0.42}) == 0.42);
  // 20 scores: keeping 19 of them still reaches 95%.
  Scores twenty;
  for (int i = 1; i <= 20; ++i) twenty.push_back(i);
  CHECK(threshold_at_tpr(twenty) == 2.0);
  CHECK_THROWS_AS(threshold_at_tpr(Scores{}), std::invalid_argument);
}

TEST_CASE("fpr_at examples") {
  CHECK(fpr_at(0.5, Scores{0.1, 0.2}) == 0.0);
  CHECK(fpr_at(0.2, Scores{0.1, 0.3}) == 0.5);
  CHECK(fpr_at(0.3, Scores{0.1, 0.3}) == 0.5);  // ties count as detected
  CHECK_THROWS_AS(fpr_at(0.1, Scores{}), std::invalid_argument);

  std::mt19937_64 rng(4);
  const auto same_id = draw(20000, rng, 0.0, false);
  const auto same_ood = draw(20000, rng, 0.0, false);
  CHECK(std::abs(fpr_at(threshold_at_tpr(same_ood), same_id) - 0.95) < 0.01);
}

TEST_CASE("threshold and fpr match an exhaustive sweep") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  for (int t = 0; t < 300; ++t) {
    const bool coarse = t % 2 == 1;
    const auto id = draw(size(rng), rng, 0.0, coarse);
    const auto ood = draw(size(rng), rng, 1.0, coarse);
    const double eta = threshold_at_tpr(ood);
    CHECK(eta == threshold_sweep(ood));
    const auto fp = std::count_if(id.begin(), id.end(), [eta](double s) { return s >= eta; });
    CHECK(fpr_at(eta, id) == static_cast<double>(fp) / static_cast<double>(id.size()));
  }
}

TEST_CASE("fpr is nonincreasing in the threshold") {
  std::mt19937_64 rng(6);
  const auto id = draw(300, rng, 0.0, true);
  double prev = 1.0;
  for (double eta = -4.0; eta <= 4.0; eta += 0.125) {
    const double f = fpr_at(eta, id);
    CHECK(f <= prev);
    prev = f;
  }
}

TEST_CASE("scoring uses the full softmax and ID argmax") {
  const auto logits = logit_rows({{1, 1, 1, 1}, {0, 3, 1, 800}, {2, 5, -1, 0.5}});
  const std::vector<int> labels = {0, 3, 1};
  const auto s = score_logits(logits, &labels);
  REQUIRE(s.size() == 3);
  CHECK(s[0].ood_score == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s[1].ood_score == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s[1].predicted == 1);  // the outlier column never wins the ID argmax
  CHECK(s[2].predicted == 1);
  CHECK(s[1].label == 3);
  const double z = std::exp(2) + std::exp(5) + std::exp(-1) + std::exp(0.5);
  CHECK(s[2].ood_score == doctest::Approx(std::exp(0.5) / z).epsilon(1e-14));

  const auto unlabeled = score_logits(logits);
  CHECK(unlabeled[0].label == 3);
  CHECK(is_ood(s[1], 0.9));
  CHECK_FALSE(is_ood(s[0], 0.9));
  CHECK(is_ood(s[0], 0.25));
}

TEST_CASE("ood score complements the ID softmax mass") {
  std::mt19937_64 rng(7);
  const auto logits = testing::random_matrix(200, 6, rng, 5.0);
  const auto s = score_logits(logits);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    double id_mass = 0.0;
    for (std::size_t j = 0; j < 5; ++j) id_mass += std::exp(row[j] - mx) / z;
    CHECK(std::abs(s[r].ood_score + id_mass - 1.0) < 1e-12);
    CHECK(s[r].ood_score >= 0.0);
    CHECK(s[r].ood_score <= 1.0);
    CHECK(s[r].predicted >= 0);
    CHECK(s[r].predicted < 5);
  }
}

TEST_CASE("classification report splits head and tail") {
  const auto profile = data::make_profile({50, 40, 30, 20, 10}, 0.6);  // 2 heads
  std::vector<ScoredSample> all_right;
  std::vector<ScoredSample> heads_right;
  for (int c = 0; c < 5; ++c) {
    for (int i = 0; i < 4; ++i) {
      all_right.push_back({0.1, c, c});
      heads_right.push_back({0.1, c < 2 ? c : 0, c});
    }
  }
  const auto a = classification_report(all_right, profile);
  CHECK(a.acc == 1.0);
  CHECK(a.head_acc == 1.0);
  CHECK(a.tail_acc == 1.0);
  const auto h = classification_report(heads_right, profile);
  CHECK(h.head_acc == 1.0);
  CHECK(h.tail_acc == 0.0);
  CHECK(h.acc == doctest::Approx(2.0 / 5.0));
  CHECK(h.head_count == 8);
  CHECK(h.tail_count == 12);
  // Balanced test counts: overall accuracy is the count-weighted mix.
  CHECK(h.acc == doctest::Approx((8 * *h.head_acc + 12 * *h.tail_acc) / 20));

  const auto no_tail = classification_report(all_right, data::make_profile({50, 40, 30, 20, 10}, 0.0));
  CHECK_FALSE(no_tail.tail_acc.has_value());
  CHECK(no_tail.head_acc == 1.0);

  std::vector<ScoredSample> with_ood = all_right;
  with_ood.push_back({0.9, 0, 5});
  CHECK_THROWS_AS(classification_report(with_ood, profile), std::invalid_argument);
}

TEST_CASE("pool metrics and equal-weight averaging") {
  const auto p1 = pool_metrics("a", Scores{0.1, 0.3}, Scores{0.2, 0.4});
  CHECK(p1.auroc == 0.75);
  CHECK(p1.eta == 0.2);
  CHECK(p1.fpr95 == 0.5);
  CHECK(p1.id_count == 2);
  CHECK(p1.ood_count == 2);
  const auto p2 = pool_metrics("b", Scores{0.1, 0.2}, Scores{0.3, 0.4, 0.5, 0.6});
  CHECK(p2.auroc == 1.0);
  CHECK(p2.fpr95 == 0.0);
  const auto avg = average_pools({p1, p2});
  CHECK(avg.name == "Average");
  CHECK(avg.auroc == doctest::Approx(0.875));
  CHECK(avg.fpr95 == doctest::Approx(0.25));
  CHECK(avg.aupr == doctest::Approx((p1.aupr + p2.aupr) / 2));
}

TEST_CASE("evaluate reports every pool and serializes") {
  model::ModelConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_dim = 6;
  cfg.feature_dim = 5;
  cfg.proj_hidden_dim = 5;
  cfg.proj_dim = 4;
  cfg.num_classes = 4;
  const auto params = model::init_params(cfg, 8);
  std::mt19937_64 rng(9);
  data::LabeledDataset test;
  test.features = testing::random_matrix(40, 3, rng);
  for (int i = 0; i < 40; ++i) test.labels.push_back(i % 4);
  data::OutlierPool p1{testing::random_matrix(30, 3, rng, 4.0), "one", 1};
  data::OutlierPool p2{testing::random_matrix(20, 3, rng, 8.0), "two", 2};
  const auto profile = data::make_profile({40, 30, 20, 10}, 0.5);

  const auto report = evaluate(params, test, {{"one", &p1}, {"two", &p2}}, profile);
  REQUIRE(report.pools.size() == 2);
  CHECK(report.pools[0].name == "one");
  CHECK(report.pools[1].ood_count == 20);
  CHECK(report.average.auroc ==
        doctest::Approx((report.pools[0].auroc + report.pools[1].auroc) / 2));

  std::vector<double> id_scores;
  for (const auto& s : score(params, test.features, &test.labels)) id_scores.push_back(s.ood_score);
  std::vector<double> ood_scores;
  for (const auto& s : score(params, p1.features)) ood_scores.push_back(s.ood_score);
  CHECK(report.pools[0].auroc == auroc(id_scores, ood_scores));

  const auto j = to_json(report);
  CHECK(j["pools"].size() == 2);
  CHECK(j["average"]["name"] == "Average");
  CHECK(j.contains("head_acc"));

  const auto table = to_table(report);
  CHECK(table.find("AUROC") != std::string::npos);
  CHECK(table.find("Average") != std::string::npos);
  CHECK(table.find("two") != std::string::npos);
}
