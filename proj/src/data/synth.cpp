#include "ltood/data/synth.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ltood::data {

namespace {

void fill_gaussian(std::span<double> row, std::span<const double> mean,
                   double stddev, std::mt19937_64& rng) {
  for (std::size_t j = 0; j < row.size(); ++j) {
    std::normal_distribution<double> n(0.0, 1.0);
    row[j] = mean[j] + stddev * n(rng);
  }
}

void validate(const ClusterSpec& spec) {
  if (spec.dim() < 2) throw std::invalid_argument("cluster spec: D_in < 2");
  if (!(spec.stddev > 0.0)) {
    throw std::invalid_argument("cluster spec: stddev must be positive");
  }
}

}  // namespace

ClusterSpec random_cluster_spec(int num_classes, std::size_t dim, double radius,
                                double stddev, std::uint64_t seed) {
  if (num_classes < 1) throw std::invalid_argument("cluster spec: no classes");
  ClusterSpec spec;
  spec.stddev = stddev;
  spec.means = nd::Tensor::zeros({static_cast<std::size_t>(num_classes), dim});
  std::mt19937_64 rng(seed);
  for (int c = 0; c < num_classes; ++c) {
    auto row = spec.means.row(static_cast<std::size_t>(c));
    double ss = 0.0;
    do {
      ss = 0.0;
      for (double& v : row) {
        std::normal_distribution<double> n(0.0, 1.0);
        v = n(rng);
        ss += v * v;
      }
    } while (ss == 0.0);
    const double s = radius / std::sqrt(ss);
    for (double& v : row) v *= s;
  }
  validate(spec);
  return spec;
}

SyntheticSplits synth_id(const ClassProfile& profile, const ClusterSpec& spec,
                         std::size_t test_per_class, std::uint64_t seed) {
  validate(spec);
  if (spec.num_classes() != profile.num_classes()) {
    throw std::invalid_argument("synth_id: cluster spec has " +
                                std::to_string(spec.num_classes()) +
                                " classes, profile has " +
                                std::to_string(profile.num_classes()));
  }
  const std::size_t dim = spec.dim();
  std::mt19937_64 rng(seed);
  SyntheticSplits out;

  auto make = [&](Split split, auto count_of) {
    std::size_t total = 0;
    for (int c = 0; c < profile.num_classes(); ++c) total += count_of(c);
    LabeledDataset ds;
    ds.split = split;
    ds.features = nd::Tensor::zeros({total, dim});
    ds.labels.reserve(total);
    std::size_t r = 0;
    for (int c = 0; c < profile.num_classes(); ++c) {
      for (std::size_t i = 0; i < count_of(c); ++i, ++r) {
        fill_gaussian(ds.features.row(r),
                      spec.means.row(static_cast<std::size_t>(c)), spec.stddev,
                      rng);
        ds.labels.push_back(c);
      }
    }
    return ds;
  };

  out.train = make(Split::train, [&](int c) {
    return static_cast<std::size_t>(profile.counts[static_cast<std::size_t>(c)]);
  });
  out.test = make(Split::test, [&](int) { return test_per_class; });
  return out;
}

const char* outlier_kind_name(OutlierKind k) {
  switch (k) {
    case OutlierKind::near_tail: return "near-tail";
    case OutlierKind::near_head: return "near-head";
    case OutlierKind::ambient: return "ambient";
  }
  return "?";
}

OutlierKind parse_outlier_kind(const std::string& name) {
  if (name == "near-tail") return OutlierKind::near_tail;
  if (name == "near-head") return OutlierKind::near_head;
  if (name == "ambient") return OutlierKind::ambient;
  throw std::invalid_argument("unknown outlier kind '" + name +
                              "' (expected near-tail, near-head or ambient)");
}

OutlierPool synth_outliers(OutlierKind kind, std::size_t n,
                           const ClassProfile& profile, const ClusterSpec& spec,
                           const OutlierParams& params, std::uint64_t seed) {
  validate(spec);
  if (n == 0) throw std::invalid_argument("synth_outliers: n must be >= 1");
  const std::size_t dim = spec.dim();
  OutlierPool pool;
  pool.generator = outlier_kind_name(kind);
  pool.seed = seed;
  pool.features = nd::Tensor::zeros({n, dim});
  std::mt19937_64 rng(seed);

  if (kind == OutlierKind::ambient) {
    const std::vector<double> origin(dim, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      fill_gaussian(pool.features.row(r), origin, params.ambient_scale, rng);
    }
    return pool;
  }

  const bool tail = kind == OutlierKind::near_tail;
  const int lo = tail ? profile.head_count : 0;
  const int hi = tail ? profile.num_classes() : profile.head_count;
  if (hi <= lo) {
    throw std::invalid_argument(std::string("synth_outliers: profile has no ") +
                                (tail ? "tail" : "head") + " classes");
  }
  std::uniform_int_distribution<int> pick(lo, hi - 1);
  const double sd = params.inflation * spec.stddev;
  for (std::size_t r = 0; r < n; ++r) {
    const int c = pick(rng);
    fill_gaussian(pool.features.row(r),
                  spec.means.row(static_cast<std::size_t>(c)), sd, rng);
  }
  return pool;
}

OutlierPool concat_pools(const std::vector<OutlierPool>& pools,
                         std::string generator) {
  OutlierPool out;
  out.generator = std::move(generator);
  if (pools.empty()) return out;
  const std::size_t dim = pools.front().dim();
  std::vector<double> v;
  std::size_t rows = 0;
  for (const auto& p : pools) {
    if (p.dim() != dim) throw std::invalid_argument("concat_pools: dim mismatch");
    v.insert(v.end(), p.features.values().begin(), p.features.values().end());
    rows += p.size();
  }
  out.features = nd::Tensor({rows, dim}, std::move(v));
  out.seed = pools.front().seed;
  return out;
}

}  // namespace ltood::data
