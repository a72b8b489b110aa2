#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "ltood/cli/benchmark.hpp"
#include "ltood/error.hpp"
#include "ltood/mining/mining.hpp"

using namespace ltood;
using mining::ScoreForm;

namespace {

std::vector<double> logits_of(std::initializer_list<double> v) { return v; }

void check_partition(const mining::MinedPartition& p, std::size_t n) {
  const std::size_t b = n / 3;
  REQUIRE(p.tail_like.size() == b);
  REQUIRE(p.neutral.size() == b);
  REQUIRE(p.head_like.size() == b);
  std::set<std::size_t> all(p.tail_like.begin(), p.tail_like.end());
  all.insert(p.neutral.begin(), p.neutral.end());
  all.insert(p.head_like.begin(), p.head_like.end());
  CHECK(all.size() == n);
  CHECK(*all.rbegin() == n - 1);
  auto lo = [&](const std::vector<std::size_t>& v) {
    double m = INFINITY;
    for (auto i : v) m = std::min(m, p.scores[i]);
    return m;
  };
  auto hi = [&](const std::vector<std::size_t>& v) {
    double m = -INFINITY;
    for (auto i : v) m = std::max(m, p.scores[i]);
    return m;
  };
  CHECK(lo(p.tail_like) >= hi(p.neutral));
  CHECK(lo(p.neutral) >= hi(p.head_like));
}

}  // namespace

TEST_CASE("all-zero logits score 1 + N log C") {
  const std::vector<double> z(10, 0.0);
  CHECK(std::abs(mining::outlier_score(z, 10, 4) - (1.0 + 4.0 * std::log(10.0))) < 1e-10);
  CHECK(std::abs(mining::outlier_score(z, 10, 4) - 10.210340) < 1e-6);
  for (int c = 2; c <= 12; ++c) {
    const std::vector<double> zc(static_cast<std::size_t>(c) + 1, 0.0);
    for (int n = 0; n <= c; ++n) {
      CHECK(std::abs(mining::outlier_score(zc, c, n) - (1.0 + n * std::log(c))) < 1e-10);
    }
  }
}

TEST_CASE("tail-peaked logits outscore head-peaked logits") {
  const auto tail_peaked = logits_of({0, 0, 0, 0, 0, 0, 0, 8, 0, 0});
  const auto head_peaked = logits_of({8, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  for (auto form : {ScoreForm::head_logprob, ScoreForm::tail_mass}) {
    CHECK(mining::outlier_score(tail_peaked, 10, 4, form) >
          mining::outlier_score(head_peaked, 10, 4, form));
  }
  // Sharpening onto a head class drives the head log-softmax sum down.
  const auto sharper = logits_of({30, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(mining::outlier_score(sharper, 10, 1) < mining::outlier_score(head_peaked, 10, 1));
  CHECK(mining::outlier_score(sharper, 10, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("trailing outlier logit is ignored and shifts cancel") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> f(11);
    for (auto& x : f) x = d(rng);
    const double shift = d(rng) * 10.0;
    auto shifted = f;
    for (std::size_t j = 0; j < 10; ++j) shifted[j] += shift;
    auto other_outlier = f;
    other_outlier[10] += 100.0;
    for (auto form : {ScoreForm::head_logprob, ScoreForm::tail_mass}) {
      const double s = mining::outlier_score(f, 10, 4, form);
      CHECK(std::abs(s - mining::outlier_score(shifted, 10, 4, form)) < 1e-9);
      CHECK(s == mining::outlier_score(other_outlier, 10, 4, form));
      CHECK(s == mining::outlier_score(std::span(f).first(10), 10, 4, form));
    }
  }
}

TEST_CASE("tail-mass score is the tail softmax mass") {
  const auto f = logits_of({1.0, 2.0, 0.5, -1.0});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5) + std::exp(-1.0);
  CHECK(mining::outlier_score(f, 4, 2, ScoreForm::tail_mass) ==
        doctest::Approx((std::exp(0.5) + std::exp(-1.0)) / z).epsilon(1e-14));
  CHECK(mining::outlier_score(f, 4, 2, ScoreForm::head_logprob) ==
        doctest::Approx(1.0 - (1.0 - std::log(z)) - (2.0 - std::log(z))).epsilon(1e-14));
}

TEST_CASE("outlier_score validates its inputs") {
  const std::vector<double> f(5, 0.0);
  CHECK_THROWS_AS(mining::outlier_score(f, 5, 6), std::out_of_range);
  CHECK_THROWS_AS(mining::outlier_score(f, 5, -1), std::out_of_range);
  CHECK_THROWS_AS(mining::outlier_score(f, 6, 2), ShapeError);
  CHECK(mining::parse_score_form("tail-mass") == ScoreForm::tail_mass);
  CHECK_THROWS_AS(mining::parse_score_form("bogus"), std::invalid_argument);
}

TEST_CASE("hand-sorted six candidates") {
  const auto p = mining::partition_by_score({2, 9, 7, 1, 8, 3});
  CHECK(p.tail_like == std::vector<std::size_t>{1, 4});
  CHECK(p.neutral == std::vector<std::size_t>{2, 5});
  CHECK(p.head_like == std::vector<std::size_t>{0, 3});
  CHECK(p.third() == 2);

  const auto sorted = mining::partition_by_score({9, 8, 7, 3, 2, 1});
  CHECK(sorted.tail_like == std::vector<std::size_t>{0, 1});
  CHECK(sorted.neutral == std::vector<std::size_t>{2, 3});
  CHECK(sorted.head_like == std::vector<std::size_t>{4, 5});
}

TEST_CASE("identical scores split by original index") {
  const auto p = mining::partition_by_score(std::vector<double>(9, 1.5));
  CHECK(p.tail_like == std::vector<std::size_t>{0, 1, 2});
  CHECK(p.neutral == std::vector<std::size_t>{3, 4, 5});
  CHECK(p.head_like == std::vector<std::size_t>{6, 7, 8});
}

TEST_CASE("partitions are exact thirds for random inputs") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> bd(1, 80);
  std::uniform_int_distribution<int> tie(0, 5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 * static_cast<std::size_t>(bd(rng));
    std::vector<double> s(n);
    // Coarse values force plenty of ties.
    for (auto& x : s) x = t % 2 ? static_cast<double>(tie(rng)) : std::ldexp(bd(rng), -3);
    check_partition(mining::partition_by_score(s), n);
  }
  CHECK_THROWS_AS(mining::partition_by_score({}), std::invalid_argument);
  CHECK_THROWS_AS(mining::partition_by_score({1, 2, 3, 4}), std::invalid_argument);
}

TEST_CASE("partition is invariant to candidate order") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> d;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(30);
    for (auto& x : s) x = d(rng);
    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> ps(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) ps[i] = s[perm[i]];
    const auto a = mining::partition_by_score(s);
    const auto b = mining::partition_by_score(ps);
    auto mapped = [&](const std::vector<std::size_t>& idx) {
      std::set<std::size_t> out;
      for (auto i : idx) out.insert(perm[i]);
      return out;
    };
    CHECK(mapped(b.tail_like) == std::set<std::size_t>(a.tail_like.begin(), a.tail_like.end()));
    CHECK(mapped(b.neutral) == std::set<std::size_t>(a.neutral.begin(), a.neutral.end()));
    CHECK(mapped(b.head_like) == std::set<std::size_t>(a.head_like.begin(), a.head_like.end()));
  }
}

TEST_CASE("parallel scoring equals serial scoring bitwise") {
  std::mt19937_64 rng(29);
  const auto logits = testing::random_matrix(999, 11, rng, 4.0);
  for (auto form : {ScoreForm::head_logprob, ScoreForm::tail_mass}) {
    const auto a = mining::outlier_scores_serial(logits, 10, 4, form);
    const auto b = mining::outlier_scores(logits, 10, 4, form);
    CHECK(a == b);
  }
  CHECK_THROWS_AS(mining::outlier_scores(logits, 10, 11), std::out_of_range);
}

TEST_CASE("mine scores through the model and rejects bad sizes") {
  model::ModelConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dim = 8;
  cfg.feature_dim = 6;
  cfg.proj_hidden_dim = 6;
  cfg.proj_dim = 4;
  cfg.num_classes = 5;
  const auto params = model::init_params(cfg, 4);
  std::mt19937_64 rng(31);
  const auto x = testing::random_matrix(12, 4, rng);
  const auto p = mining::mine(x, params, 2);
  check_partition(p, 12);
  const auto expect = mining::outlier_scores(model::predict_logits(params, x), 5, 2);
  CHECK(p.scores == expect);
  CHECK_THROWS_AS(mining::mine(testing::random_matrix(10, 4, rng), params, 2),
                  std::invalid_argument);

  const auto j = mining::to_json(p);
  CHECK(j["scores"].size() == 12);
  CHECK(j["partition"]["tail_like"].size() == 4);
}

// The head-logprob score grows with how confidently the head classes are ruled
// out, so it also rewards sharp head predictions; tail affinity is what the
// tail-mass form measures.
TEST_CASE("head-logprob score rewards sharpness over tail mass") {
  const auto sharp_head = logits_of({12, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto mild_tail = logits_of({0, 0, 0, 0, 1, 1, 1, 1, 1, 1});
  CHECK(mining::outlier_score(sharp_head, 10, 4) > mining::outlier_score(mild_tail, 10, 4));
  CHECK(mining::outlier_score(sharp_head, 10, 4, ScoreForm::tail_mass) <
        mining::outlier_score(mild_tail, 10, 4, ScoreForm::tail_mass));
}

TEST_CASE("a trained model mines near-tail candidates as tail-like") {
  double rate_sum = 0.0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    cli::SynthSpec spec;
    spec.n_max = 300;
    spec.aux_size = 600;
    spec.ood_test_size = 200;
    spec.test_per_class = 20;
    spec.seed = static_cast<std::uint64_t>(seed);
    const auto bench = cli::make_benchmark(spec);
    trainer::TrainConfig config;
    config.epochs = 8;
    config.seed = static_cast<std::uint64_t>(seed);
    const auto result = cli::run_experiment(config, bench);

    // Equal thirds of near-tail, near-head and ambient candidates.
    const auto& pools = bench.ood_tests;
    std::vector<const data::OutlierPool*> kinds(3);
    for (const auto& p : pools) {
      if (p.name == "near-tail") kinds[0] = &p.pool;
      if (p.name == "near-head") kinds[1] = &p.pool;
      if (p.name == "ambient") kinds[2] = &p.pool;
    }
    const std::size_t b = 48;
    std::vector<std::size_t> idx(b);
    std::iota(idx.begin(), idx.end(), 0);
    const auto mixed = data::concat_pools(
        {data::OutlierPool{kinds[0]->rows(idx), "t", 0},
         data::OutlierPool{kinds[1]->rows(idx), "h", 0},
         data::OutlierPool{kinds[2]->rows(idx), "a", 0}},
        "mix");
    const auto part = mining::mine(mixed.features, result.params, bench.profile.head_count,
                                   ScoreForm::tail_mass);
    const auto near_tail = std::count_if(part.tail_like.begin(), part.tail_like.end(),
                                         [&](std::size_t i) { return i < b; });
    rate_sum += static_cast<double>(near_tail) / static_cast<double>(b);
  }
  const double rate = rate_sum / seeds;
  MESSAGE("near-tail share of the tail-like third: " << rate);
  CHECK(rate > 1.0 / 3.0);
}
