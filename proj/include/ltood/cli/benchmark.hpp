#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltood/data/synth.hpp"
#include "ltood/detector/detector.hpp"
#include "ltood/trainer/trainer.hpp"

namespace ltood::cli {

// Parameters of the synthetic long-tailed benchmark.
struct SynthSpec {
  int num_classes = 10;
  std::int64_t n_max = 500;
  double rho = 100.0;
  std::size_t dim = 8;
  double tail_fraction = 0.6;
  std::size_t test_per_class = 100;
  std::size_t aux_size = 3000;       // auxiliary training outliers, equal thirds per kind
  std::size_t ood_test_size = 1000;  // per OOD test pool
  double radius = 4.0;               // class means on this sphere
  double stddev = 1.0;
  data::OutlierParams outliers;       // auxiliary pool
  data::OutlierParams test_outliers;  // OOD test pools
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SynthSpec& s);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

struct NamedOutlierPool {
  std::string name;
  data::OutlierPool pool;
};

struct Benchmark {
  SynthSpec spec;
  data::ClassProfile profile;
  data::ClusterSpec clusters;
  data::LabeledDataset train;
  data::LabeledDataset test;
  data::OutlierPool aux;
  std::vector<NamedOutlierPool> ood_tests;
};

// Pure function of the spec (including its seed).
Benchmark make_benchmark(const SynthSpec& spec);

// Directory layout: dataset.json, counts.csv, train.csv, test.csv, aux.csv,
// ood_<kind>.csv.
void save_benchmark(const std::filesystem::path& dir, const Benchmark& b);
Benchmark load_benchmark(const std::filesystem::path& dir);
// Files save_benchmark writes, relative to the directory.
std::vector<std::string> benchmark_files(const Benchmark& b);
nlohmann::json dataset_manifest(const Benchmark& b);

std::vector<detector::NamedPool> pool_refs(const Benchmark& b);

struct ExperimentResult {
  detector::MetricsReport report;
  losses::LossBreakdown last_loss;
  model::ModelParams params;
};

// Trains from scratch with `config` (its seed drives init and batching) and
// evaluates on every OOD test pool.
ExperimentResult run_experiment(const trainer::TrainConfig& config, const Benchmark& b,
                                const trainer::FitOptions& options = {});

// Profile of the benchmark counts with the given tail fraction.
data::ClassProfile profile_for(const Benchmark& b, double tail_fraction);

}  // namespace ltood::cli
