#include "ltood/cli/benchmark.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

#include "ltood/data/csv_io.hpp"
#include "ltood/error.hpp"

namespace ltood::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Decorrelated sub-seeds for the individual generators.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr data::OutlierKind kKinds[] = {data::OutlierKind::near_tail,
                                        data::OutlierKind::near_head,
                                        data::OutlierKind::ambient};

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_counts_csv(const fs::path& path, const data::ClassProfile& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "class,count,normalized\n";
  for (int c = 0; c < p.num_classes(); ++c) {
    os << c << ',' << p.counts[c] << ',' << fmt(p.normalized[c]) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string pool_file(const std::string& name) { return "ood_" + name + ".csv"; }

}  // namespace

void SynthSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synth: --C must be >= 2");
  if (n_max < 1) throw std::invalid_argument("synth: --n-max must be >= 1");
  if (!(rho >= 1.0)) throw std::invalid_argument("synth: --rho must be >= 1");
  if (dim < 2) throw std::invalid_argument("synth: --dim must be >= 2");
  if (!(tail_fraction >= 0.0 && tail_fraction <= 1.0)) {
    throw std::invalid_argument("synth: --k must lie in [0, 1]");
  }
  if (test_per_class < 1) throw std::invalid_argument("synth: --test-per-class must be >= 1");
  if (aux_size < 3) throw std::invalid_argument("synth: --aux-size must be >= 3");
  if (ood_test_size < 1) throw std::invalid_argument("synth: --ood-test-size must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("synth: --radius must be > 0");
  if (!(stddev > 0.0)) throw std::invalid_argument("synth: --stddev must be > 0");
  if (!(outliers.inflation > 0.0) || !(outliers.ambient_scale > 0.0) ||
      !(test_outliers.inflation > 0.0) || !(test_outliers.ambient_scale > 0.0)) {
    throw std::invalid_argument("synth: outlier spreads must be > 0");
  }
}

json to_json(const SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"n_max", s.n_max},
          {"rho", s.rho},
          {"dim", s.dim},
          {"k", s.tail_fraction},
          {"test_per_class", s.test_per_class},
          {"aux_size", s.aux_size},
          {"ood_test_size", s.ood_test_size},
          {"radius", s.radius},
          {"stddev", s.stddev},
          {"inflation", s.outliers.inflation},
          {"ambient_scale", s.outliers.ambient_scale},
          {"test_inflation", s.test_outliers.inflation},
          {"test_ambient_scale", s.test_outliers.ambient_scale},
          {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  s.num_classes = j.at("num_classes").get<int>();
  s.n_max = j.at("n_max").get<std::int64_t>();
  s.rho = j.at("rho").get<double>();
  s.dim = j.at("dim").get<std::size_t>();
  s.tail_fraction = j.at("k").get<double>();
  s.test_per_class = j.at("test_per_class").get<std::size_t>();
  s.aux_size = j.at("aux_size").get<std::size_t>();
  s.ood_test_size = j.at("ood_test_size").get<std::size_t>();
  s.radius = j.at("radius").get<double>();
  s.stddev = j.at("stddev").get<double>();
  s.outliers.inflation = j.at("inflation").get<double>();
  s.outliers.ambient_scale = j.at("ambient_scale").get<double>();
  s.test_outliers.inflation = j.at("test_inflation").get<double>();
  s.test_outliers.ambient_scale = j.at("test_ambient_scale").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

Benchmark make_benchmark(const SynthSpec& spec) {
  spec.validate();
  Benchmark b;
  b.spec = spec;
  b.profile = data::make_profile(data::longtail_counts(spec.num_classes, spec.n_max, spec.rho),
                                 spec.tail_fraction);
  b.clusters = data::random_cluster_spec(spec.num_classes, spec.dim, spec.radius,
                                         spec.stddev, derive_seed(spec.seed, 0));
  auto splits = data::synth_id(b.profile, b.clusters, spec.test_per_class,
                               derive_seed(spec.seed, 1));
  b.train = std::move(splits.train);
  b.test = std::move(splits.test);

  std::vector<data::OutlierPool> parts;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t n = spec.aux_size / 3 + (i < spec.aux_size % 3 ? 1 : 0);
    parts.push_back(data::synth_outliers(kKinds[i], n, b.profile, b.clusters, spec.outliers,
                                         derive_seed(spec.seed, 2 + i)));
  }
  b.aux = data::concat_pools(parts, "mixture(near_tail,near_head,ambient)");
  b.aux.seed = spec.seed;

  for (std::size_t i = 0; i < 3; ++i) {
    b.ood_tests.push_back(
        {data::outlier_kind_name(kKinds[i]),
         data::synth_outliers(kKinds[i], spec.ood_test_size, b.profile, b.clusters,
                              spec.test_outliers, derive_seed(spec.seed, 10 + i))});
  }
  return b;
}

std::vector<std::string> benchmark_files(const Benchmark& b) {
  std::vector<std::string> files = {"dataset.json", "counts.csv", "train.csv", "test.csv",
                                    "aux.csv"};
  for (const auto& p : b.ood_tests) files.push_back(pool_file(p.name));
  return files;
}

json dataset_manifest(const Benchmark& b) {
  json pools = json::array();
  for (const auto& p : b.ood_tests) {
    pools.push_back({{"name", p.name}, {"file", pool_file(p.name)}, {"rows", p.pool.size()}});
  }
  return {{"format", "ltood-dataset"},
          {"version", 1},
          {"profile",
           {{"counts", b.profile.counts},
            {"normalized", b.profile.normalized},
            {"k", b.profile.tail_fraction},
            {"head_count", b.profile.head_count}}},
          {"seed", b.spec.seed},
          {"generator", to_json(b.spec)},
          {"dim", b.train.dim()},
          {"num_classes", b.profile.num_classes()},
          {"train", "train.csv"},
          {"test", "test.csv"},
          {"aux", "aux.csv"},
          {"ood_tests", pools}};
}

void save_benchmark(const fs::path& dir, const Benchmark& b) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory " + dir.string());
  }
  {
    std::ofstream os(dir / "dataset.json", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / "dataset.json").string());
    os << dataset_manifest(b).dump(2) << '\n';
  }
  write_counts_csv(dir / "counts.csv", b.profile);
  data::save_csv(dir / "train.csv", b.train);
  data::save_csv(dir / "test.csv", b.test);
  data::save_csv(dir / "aux.csv", b.aux);
  for (const auto& p : b.ood_tests) data::save_csv(dir / pool_file(p.name), p.pool);
}

Benchmark load_benchmark(const fs::path& dir) {
  const fs::path mpath = dir / "dataset.json";
  std::ifstream is(mpath);
  if (!is) throw std::runtime_error("missing dataset manifest " + mpath.string());
  json m;
  try {
    m = json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError(mpath.string() + ": " + e.what());
  }
  Benchmark b;
  b.spec = synth_spec_from_json(m.at("generator"));
  const auto& prof = m.at("profile");
  b.profile = data::make_profile(prof.at("counts").get<std::vector<std::int64_t>>(),
                                 prof.at("k").get<double>());
  const auto dim = m.at("dim").get<std::size_t>();
  data::CsvSchema schema{dim, true, b.profile.num_classes()};
  b.train = data::load_labeled_csv(dir / m.at("train").get<std::string>(), schema,
                                   data::Split::train);
  b.test = data::load_labeled_csv(dir / m.at("test").get<std::string>(), schema,
                                  data::Split::test);
  b.aux = data::load_pool_csv(dir / m.at("aux").get<std::string>(), dim);
  b.aux.generator = "aux";
  b.aux.seed = b.spec.seed;
  for (const auto& p : m.at("ood_tests")) {
    auto pool = data::load_pool_csv(dir / p.at("file").get<std::string>(), dim);
    pool.generator = p.at("name").get<std::string>();
    b.ood_tests.push_back({p.at("name").get<std::string>(), std::move(pool)});
  }

  std::vector<std::int64_t> seen(b.profile.counts.size(), 0);
  for (int y : b.train.labels) {
    if (y >= b.profile.num_classes()) {
      throw std::invalid_argument("train.csv: OOD label in the training split");
    }
    ++seen[static_cast<std::size_t>(y)];
  }
  if (seen != b.profile.counts) {
    throw std::invalid_argument("train.csv: per-class counts differ from the profile");
  }
  return b;
}

std::vector<detector::NamedPool> pool_refs(const Benchmark& b) {
  std::vector<detector::NamedPool> refs;
  for (const auto& p : b.ood_tests) refs.push_back({p.name, &p.pool});
  return refs;
}

data::ClassProfile profile_for(const Benchmark& b, double tail_fraction) {
  return data::make_profile(b.profile.counts, tail_fraction);
}

ExperimentResult run_experiment(const trainer::TrainConfig& config, const Benchmark& b,
                                const trainer::FitOptions& options) {
  const auto profile = profile_for(b, config.tail_fraction);
  auto state = trainer::init_state(config, b.train.dim(), profile.num_classes());
  trainer::fit(state, config, profile, b.train, b.aux, options);
  ExperimentResult r;
  r.report = detector::evaluate(state.params, b.test, pool_refs(b), profile);
  r.last_loss = state.last;
  r.params = std::move(state.params);
  return r;
}

}  // namespace ltood::cli
