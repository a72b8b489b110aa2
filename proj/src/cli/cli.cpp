#include "ltood/cli/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "ltood/cli/benchmark.hpp"
#include "ltood/cli/manifest.hpp"
#include "ltood/cli/svg_plot.hpp"
#include "ltood/data/csv_io.hpp"
#include "ltood/error.hpp"
#include "ltood/model/checkpoint.hpp"

namespace ltood::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("LTOOD_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  std::uint64_t s = 0;
  const char* end = v + std::char_traits<char>::length(v);
  auto [ptr, ec] = std::from_chars(v, end, s);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("LTOOD_SEED must be a non-negative integer, got '" +
                                std::string(v) + "'");
  }
  return s;
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory " + dir.string() +
                             (ec ? ": " + ec.message() : std::string()));
  }
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
  if (!os) throw std::runtime_error("write failed: " + p.string());
}

std::vector<std::string> strip_out(const std::vector<std::string>& args) {
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out") {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0) continue;
    kept.push_back(args[i]);
  }
  return kept;
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// Collects what a command read and wrote into its manifest.
struct Recorder {
  ExperimentManifest m;

  Recorder(std::string command, const std::vector<std::string>& args, const fs::path& out) {
    m.command = std::move(command);
    m.args = strip_out(args);
    m.working_dir = fs::current_path().string();
    m.output_dir = out.string();
  }
  void input(const fs::path& p) { m.inputs[p.string()] = file_blob_sha1(p); }
  // Pins the effective seed so a re-run does not depend on LTOOD_SEED.
  void pin_seed(std::uint64_t seed) {
    if (!has_flag(m.args, "--seed")) {
      m.args.push_back("--seed");
      m.args.push_back(std::to_string(seed));
    }
  }
  void finish(const fs::path& out) {
    m.inputs_hash = combined_hash(m.inputs);
    m.outputs = hash_tree(out);
    write_manifest(out, m);
  }
};

// --- training configuration flags ------------------------------------------

struct TrainFlags {
  std::string config_file;
  std::optional<int> epochs, batch_size, mine_every, iters_per_epoch;
  std::optional<double> alpha, beta, gamma, k, tau, stage_split, lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant, score_form, optimizer;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_file, "JSON file with TrainConfig fields")
        ->check(CLI::ExistingFile);
    app->add_option("--epochs", epochs, "number of epochs E");
    app->add_option("--batch-size", batch_size, "ID batch size B (multiple of 3)");
    app->add_option("--alpha", alpha, "weight of the outlier-class cross-entropy");
    app->add_option("--beta", beta, "weight of the tail contrastive term");
    app->add_option("--gamma", gamma, "weight of the head outlier-prototype term");
    app->add_option("--k", k, "fraction of tail classes");
    app->add_option("--tau", tau, "base temperature");
    app->add_option("--stage-split", stage_split,
                    "fraction of epochs using mixed outliers before neutral-only");
    app->add_option("--seed", seed, "random seed (default: $LTOOD_SEED or 0)");
    app->add_option("--variant", variant, "temperature schedule: sqrt|linear")
        ->check(CLI::IsMember({"sqrt", "linear"}));
    app->add_option("--score-form", score_form, "mining score: head-logprob|tail-mass")
        ->check(CLI::IsMember({"head-logprob", "tail-mass"}));
    app->add_option("--mine-every", mine_every, "re-mine candidates every N iterations");
    app->add_option("--iters-per-epoch", iters_per_epoch, "0: train size / batch size");
    app->add_option("--lr", lr, "initial learning rate");
    app->add_option("--optimizer", optimizer, "adam|sgd")
        ->check(CLI::IsMember({"adam", "sgd"}));
  }

  json delta() const {
    json d = json::object();
    auto put = [&](const char* key, const auto& v) {
      if (v) d[key] = *v;
    };
    put("epochs", epochs);
    put("batch_size", batch_size);
    put("alpha", alpha);
    put("beta", beta);
    put("gamma", gamma);
    put("k", k);
    put("tau", tau);
    put("stage_split", stage_split);
    put("seed", seed);
    put("variant", variant);
    put("score_form", score_form);
    put("mine_every", mine_every);
    put("iters_per_epoch", iters_per_epoch);
    put("lr", lr);
    put("optimizer", optimizer);
    return d;
  }

  // defaults < $LTOOD_SEED < config file < flags
  trainer::TrainConfig resolve(Recorder* rec) const {
    trainer::TrainConfig c;
    if (auto s = env_seed()) c.seed = *s;
    if (!config_file.empty()) {
      std::ifstream is(config_file);
      if (!is) throw std::runtime_error("cannot read " + config_file);
      json j;
      try {
        j = json::parse(is);
      } catch (const json::exception& e) {
        throw ParseError(config_file + ": " + e.what());
      }
      c = trainer::config_from_json(j, c);
      if (rec) rec->input(config_file);
    }
    c = trainer::apply_overrides(c, delta());
    c.validate();
    return c;
  }
};

trainer::TrainConfig config_of_checkpoint(const model::Checkpoint& ck) {
  if (!ck.meta.extra.contains("config")) {
    throw std::runtime_error("checkpoint carries no training configuration");
  }
  return trainer::config_from_json(ck.meta.extra.at("config"));
}

void record_dataset(Recorder& rec, const fs::path& dir, const Benchmark& b) {
  for (const auto& f : benchmark_files(b)) {
    if (fs::exists(dir / f)) rec.input(dir / f);
  }
  rec.m.datasets.push_back(dataset_manifest(b));
}

void record_checkpoint(Recorder& rec, const fs::path& stem) {
  rec.input(model::manifest_path(stem));
  rec.input(model::data_path(stem));
}

// --- synth -------------------------------------------------------------------

struct SynthOpts {
  fs::path out;
  SynthSpec spec;
  std::optional<std::uint64_t> seed;
};

void add_synth(CLI::App& app, SynthOpts& o) {
  auto* c = app.add_subcommand("synth", "generate a synthetic long-tailed benchmark");
  c->add_option("--out", o.out, "output directory")->required();
  c->add_option("--C", o.spec.num_classes, "number of ID classes")->capture_default_str();
  c->add_option("--n-max", o.spec.n_max, "samples of the largest class")
      ->capture_default_str();
  c->add_option("--rho", o.spec.rho, "imbalance ratio n_max / n_min")->capture_default_str();
  c->add_option("--dim", o.spec.dim, "feature dimension D_in")->capture_default_str();
  c->add_option("--k", o.spec.tail_fraction, "fraction of tail classes")
      ->capture_default_str();
  c->add_option("--test-per-class", o.spec.test_per_class, "balanced test rows per class")
      ->capture_default_str();
  c->add_option("--aux-size", o.spec.aux_size, "auxiliary outlier pool size")
      ->capture_default_str();
  c->add_option("--ood-test-size", o.spec.ood_test_size, "rows per OOD test pool")
      ->capture_default_str();
  c->add_option("--radius", o.spec.radius, "radius of the class-mean sphere")
      ->capture_default_str();
  c->add_option("--stddev", o.spec.stddev, "class cluster standard deviation")
      ->capture_default_str();
  c->add_option("--inflation", o.spec.outliers.inflation,
                "stddev multiplier of near-tail / near-head outliers")
      ->capture_default_str();
  c->add_option("--ambient-scale", o.spec.outliers.ambient_scale,
                "stddev of the ambient outlier distribution")
      ->capture_default_str();
  c->add_option("--seed", o.seed, "random seed (default: $LTOOD_SEED or 0)");
}

int cmd_synth(SynthOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  o.spec.seed = o.seed ? *o.seed : env_seed().value_or(0);
  o.spec.validate();
  const Benchmark b = make_benchmark(o.spec);
  prepare_out(o.out);
  save_benchmark(o.out, b);
  Recorder rec("synth", args, o.out);
  rec.pin_seed(o.spec.seed);
  rec.m.seeds = {o.spec.seed};
  rec.m.config = to_json(o.spec);
  rec.m.datasets.push_back(dataset_manifest(b));
  rec.finish(o.out);
  out << "wrote " << b.train.size() << " train, " << b.test.size() << " test, "
      << b.aux.size() << " auxiliary rows and " << b.ood_tests.size() << " OOD test pools to "
      << o.out.string() << '\n';
  return kExitOk;
}

// --- train -------------------------------------------------------------------

struct TrainOpts {
  fs::path data;
  fs::path out;
  TrainFlags flags;
  bool quiet = false;
};

void add_train(CLI::App& app, TrainOpts& o) {
  auto* c = app.add_subcommand("train", "train a model on a dataset directory");
  c->add_option("--data", o.data, "dataset directory written by synth")->required();
  c->add_option("--out", o.out, "run directory")->required();
  c->add_flag("--quiet", o.quiet, "do not echo the JSON-lines log to stdout");
  o.flags.add_to(c);
}

int cmd_train(TrainOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  Recorder rec("train", args, o.out);
  const trainer::TrainConfig config = o.flags.resolve(&rec);
  const Benchmark b = load_benchmark(o.data);
  record_dataset(rec, o.data, b);
  prepare_out(o.out);
  write_text(o.out / "config.json", trainer::to_json(config).dump(2) + "\n");

  std::ofstream log(o.out / "train_log.jsonl", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + (o.out / "train_log.jsonl").string());
  trainer::FitOptions fo;
  fo.diagnostic_dir = o.out;
  fo.on_step = [&](const trainer::LogRecord& r) {
    const std::string line = trainer::to_json(r).dump();
    log << line << '\n';
    if (!o.quiet) out << line << '\n';
  };
  const auto profile = profile_for(b, config.tail_fraction);
  auto state = trainer::init_state(config, b.train.dim(), profile.num_classes());
  trainer::fit(state, config, profile, b.train, b.aux, fo);
  log.close();
  trainer::save_state(o.out / "checkpoint", state, config);

  rec.pin_seed(config.seed);
  rec.m.seeds = {config.seed};
  rec.m.config = trainer::to_json(config);
  rec.m.label = config.run_label();
  rec.finish(o.out);
  if (!o.quiet) {
    out << json{{"done", true}, {"label", config.run_label()}, {"epochs", state.epoch},
                {"steps", state.step}}
               .dump()
        << '\n';
  }
  return kExitOk;
}

// --- mine --------------------------------------------------------------------

struct MineOpts {
  fs::path data;
  fs::path checkpoint;
  fs::path out;
  std::optional<int> batch_size;
  std::optional<double> k;
  std::optional<std::string> score_form;
  std::optional<std::uint64_t> seed;
};

void add_mine(CLI::App& app, MineOpts& o) {
  auto* c = app.add_subcommand("mine", "score and partition 3B auxiliary candidates");
  c->add_option("--data", o.data, "dataset directory")->required();
  c->add_option("--checkpoint", o.checkpoint, "checkpoint stem (without .json)")->required();
  c->add_option("--out", o.out, "output directory")->required();
  c->add_option("--batch-size", o.batch_size, "B; 3B candidates are drawn (default: run's)");
  c->add_option("--k", o.k, "fraction of tail classes (default: run's)");
  c->add_option("--score-form", o.score_form, "head-logprob|tail-mass (default: run's)")
      ->check(CLI::IsMember({"head-logprob", "tail-mass"}));
  c->add_option("--seed", o.seed, "candidate draw seed (default: $LTOOD_SEED or 0)");
}

int cmd_mine(MineOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  Recorder rec("mine", args, o.out);
  const auto ck = model::load_checkpoint(o.checkpoint);
  const auto config = config_of_checkpoint(ck);
  const Benchmark b = load_benchmark(o.data);
  record_dataset(rec, o.data, b);
  record_checkpoint(rec, o.checkpoint);

  const int batch = o.batch_size.value_or(config.batch_size);
  if (batch < 1) throw std::invalid_argument("mine: --batch-size must be >= 1");
  const auto profile = profile_for(b, o.k.value_or(config.tail_fraction));
  const auto form = o.score_form ? mining::parse_score_form(*o.score_form) : config.score_form;
  const std::uint64_t seed = o.seed ? *o.seed : env_seed().value_or(0);

  const std::size_t want = 3 * static_cast<std::size_t>(batch);
  if (b.aux.size() < want) {
    throw std::invalid_argument("mine: auxiliary pool has fewer than 3B rows");
  }
  std::vector<std::size_t> idx(b.aux.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(want);
  const auto partition = mining::mine(b.aux.rows(idx), ck.params, profile.head_count, form);

  prepare_out(o.out);
  json j = mining::to_json(partition);
  j["candidates"] = idx;
  j["score_form"] = mining::score_form_name(form);
  j["head_count"] = profile.head_count;
  write_text(o.out / "mined.json", j.dump(2) + "\n");

  rec.pin_seed(seed);
  rec.m.seeds = {seed};
  rec.m.config = trainer::to_json(config);
  rec.finish(o.out);
  out << "mined " << want << " candidates into thirds of " << partition.third() << " -> "
      << (o.out / "mined.json").string() << '\n';
  return kExitOk;
}

// --- eval --------------------------------------------------------------------

struct EvalOpts {
  fs::path data;
  fs::path checkpoint;
  fs::path out;
  std::vector<std::string> pools;
  std::optional<double> k;
};

void add_eval(CLI::App& app, EvalOpts& o) {
  auto* c = app.add_subcommand("eval", "evaluate a checkpoint on the OOD test pools");
  c->add_option("--data", o.data, "dataset directory")->required();
  c->add_option("--checkpoint", o.checkpoint, "checkpoint stem (without .json)")->required();
  c->add_option("--out", o.out, "output directory")->required();
  c->add_option("--pool", o.pools, "extra OOD test CSV (repeatable)")
      ->check(CLI::ExistingFile);
  c->add_option("--k", o.k, "fraction of tail classes for the head/tail split");
}

int cmd_eval(EvalOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  Recorder rec("eval", args, o.out);
  if (!fs::exists(model::manifest_path(o.checkpoint))) {
    throw std::runtime_error("missing checkpoint " + model::manifest_path(o.checkpoint).string());
  }
  const auto ck = model::load_checkpoint(o.checkpoint);
  const auto config = config_of_checkpoint(ck);
  Benchmark b = load_benchmark(o.data);
  record_dataset(rec, o.data, b);
  record_checkpoint(rec, o.checkpoint);
  for (const auto& p : o.pools) {
    auto pool = data::load_pool_csv(p, b.train.dim());
    rec.input(p);
    b.ood_tests.push_back({fs::path(p).stem().string(), std::move(pool)});
  }
  const auto profile = profile_for(b, o.k.value_or(config.tail_fraction));
  const auto report = detector::evaluate(ck.params, b.test, pool_refs(b), profile);

  prepare_out(o.out);
  write_text(o.out / "metrics.json", detector::to_json(report).dump(2) + "\n");
  const std::string table = detector::to_table(report);
  write_text(o.out / "metrics.txt", table);
  rec.m.seeds = {config.seed};
  rec.m.config = trainer::to_json(config);
  rec.m.label = config.run_label();
  rec.finish(o.out);
  out << table;
  return kExitOk;
}

// --- ablate ------------------------------------------------------------------

struct AblateOpts {
  fs::path data;
  fs::path out;
  std::string sweep_file;
  std::vector<std::string> grid;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
  TrainFlags flags;
};

void add_ablate(CLI::App& app, AblateOpts& o) {
  auto* c = app.add_subcommand("ablate", "run a sweep of config deltas and compare them");
  c->add_option("--data", o.data, "dataset directory")->required();
  c->add_option("--out", o.out, "sweep directory")->required();
  c->add_option("--sweep", o.sweep_file,
                "JSON: {\"runs\": [{\"name\": ..., \"delta\": {...}}]} or a list of deltas")
      ->check(CLI::ExistingFile);
  c->add_option("--grid", o.grid, "key=v1,v2,... (repeatable; the cartesian product runs)");
  c->add_option("--seeds", o.seeds, "training seeds per run (default: the base seed)")
      ->delimiter(',');
  c->add_option("--jobs", o.jobs, "sub-runs in parallel")->check(CLI::PositiveNumber);
  o.flags.add_to(c);
}

struct SweepRun {
  std::string name;
  json delta;
};

std::string normalize_key(std::string k) {
  for (char& ch : k) {
    if (ch == '-') ch = '_';
  }
  return k;
}

json parse_value(const std::string& v) {
  try {
    return json::parse(v);
  } catch (const json::exception&) {
    return v;
  }
}

std::vector<SweepRun> sweep_runs(const AblateOpts& o, Recorder& rec) {
  std::vector<SweepRun> runs;
  if (!o.sweep_file.empty()) {
    std::ifstream is(o.sweep_file);
    json j;
    try {
      j = json::parse(is);
    } catch (const json::exception& e) {
      throw ParseError(o.sweep_file + ": " + e.what());
    }
    rec.input(o.sweep_file);
    const json& list = j.is_array() ? j : j.at("runs");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& r = list[i];
      if (r.contains("delta")) {
        runs.push_back({r.value("name", "run" + std::to_string(i)), r.at("delta")});
      } else {
        runs.push_back({"run" + std::to_string(i), r});
      }
    }
  }
  if (!o.grid.empty()) {
    std::vector<SweepRun> product{{"", json::object()}};
    for (const auto& g : o.grid) {
      const auto eq = g.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == g.size()) {
        throw std::invalid_argument("--grid expects key=v1,v2,..., got '" + g + "'");
      }
      const std::string key = normalize_key(g.substr(0, eq));
      std::vector<std::string> values;
      std::stringstream ss(g.substr(eq + 1));
      for (std::string v; std::getline(ss, v, ',');) values.push_back(v);
      std::vector<SweepRun> next;
      for (const auto& base : product) {
        for (const auto& v : values) {
          SweepRun r = base;
          r.name += (r.name.empty() ? "" : ";") + key + "=" + v;
          r.delta[key] = parse_value(v);
          next.push_back(std::move(r));
        }
      }
      product = std::move(next);
    }
    runs.insert(runs.end(), product.begin(), product.end());
  }
  if (runs.empty()) throw std::invalid_argument("ablate: give --sweep and/or --grid");
  for (const auto& r : runs) {
    if (r.name.empty() || r.name.find_first_of("/\\,\n") != std::string::npos) {
      throw std::invalid_argument("ablate: run name '" + r.name +
                                  "' must be nonempty without '/', '\\' or ','");
    }
  }
  return runs;
}

struct SubResult {
  bool ok = false;
  std::string error;
  detector::MetricsReport report;
  std::string label;
};

std::string csv_safe(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_ablate(AblateOpts& o, const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  Recorder rec("ablate", args, o.out);
  const trainer::TrainConfig base = o.flags.resolve(&rec);
  const auto runs = sweep_runs(o, rec);
  const Benchmark b = load_benchmark(o.data);
  record_dataset(rec, o.data, b);
  std::vector<std::uint64_t> seeds = o.seeds.empty() ? std::vector{base.seed} : o.seeds;
  prepare_out(o.out);

  struct Task {
    std::size_t run;
    std::size_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (std::size_t s = 0; s < seeds.size(); ++s) tasks.push_back({r, s});
  }
  std::vector<SubResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;

  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
      const auto& task = tasks[t];
      SubResult& res = results[t];
      const fs::path dir =
          o.out / runs[task.run].name / ("seed-" + std::to_string(seeds[task.seed]));
      try {
        json delta = runs[task.run].delta;
        delta["seed"] = seeds[task.seed];
        const auto config = trainer::apply_overrides(base, delta);
        config.validate();
        res.label = config.run_label();
        prepare_out(dir);
        write_text(dir / "config.json", trainer::to_json(config).dump(2) + "\n");
        std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
        trainer::FitOptions fo;
        fo.diagnostic_dir = dir;
        fo.on_step = [&](const trainer::LogRecord& r) { log << trainer::to_json(r).dump() << '\n'; };
        const auto profile = profile_for(b, config.tail_fraction);
        auto state = trainer::init_state(config, b.train.dim(), profile.num_classes());
        trainer::fit(state, config, profile, b.train, b.aux, fo);
        log.close();
        trainer::save_state(dir / "checkpoint", state, config);
        res.report = detector::evaluate(state.params, b.test, pool_refs(b), profile);
        write_text(dir / "metrics.json", detector::to_json(res.report).dump(2) + "\n");
        res.ok = true;
      } catch (const std::exception& e) {
        res.error = e.what();
        std::lock_guard lock(err_mu);
        err << "ablate: run '" << runs[task.run].name << "' seed " << seeds[task.seed]
            << " failed: " << e.what() << '\n';
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(o.jobs, static_cast<int>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::ostringstream per_seed, cmp;
  per_seed << "run,seed,label,auroc,aupr,fpr95,acc,status\n";
  cmp << "run,delta,label,seeds_ok,auroc,aupr,fpr95,acc,head_acc,tail_acc,status\n";
  bool any_failed = false;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    double au = 0, ap = 0, fp = 0, acc = 0, hacc = 0, tacc = 0;
    int ok = 0, with_head = 0, with_tail = 0;
    std::string label;
    std::vector<std::string> errors;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const SubResult& res = results[r * seeds.size() + s];
      if (!res.label.empty()) label = res.label;
      per_seed << runs[r].name << ',' << seeds[s] << ',' << res.label << ',';
      if (!res.ok) {
        per_seed << ",,,," << "failed: " << csv_safe(res.error) << '\n';
        errors.push_back(res.error);
        continue;
      }
      const auto& a = res.report.average;
      per_seed << fixed(a.auroc) << ',' << fixed(a.aupr) << ',' << fixed(a.fpr95) << ','
               << fixed(res.report.accuracy.acc) << ",ok\n";
      ++ok;
      au += a.auroc;
      ap += a.aupr;
      fp += a.fpr95;
      acc += res.report.accuracy.acc;
      if (res.report.accuracy.head_acc) hacc += *res.report.accuracy.head_acc, ++with_head;
      if (res.report.accuracy.tail_acc) tacc += *res.report.accuracy.tail_acc, ++with_tail;
    }
    any_failed = any_failed || !errors.empty();
    std::string delta;
    for (const auto& [key, v] : runs[r].delta.items()) {
      delta += (delta.empty() ? "" : ";") + key + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
    }
    cmp << runs[r].name << ',' << csv_safe(delta) << ',' << label << ',' << ok << ',';
    if (ok > 0) {
      cmp << fixed(au / ok) << ',' << fixed(ap / ok) << ',' << fixed(fp / ok) << ','
          << fixed(acc / ok) << ',' << (with_head ? fixed(hacc / with_head) : "") << ','
          << (with_tail ? fixed(tacc / with_tail) : "") << ',';
    } else {
      cmp << ",,,,,,";
    }
    cmp << (errors.empty() ? std::string("ok")
                           : "failed " + std::to_string(errors.size()) + "/" +
                                 std::to_string(seeds.size()) + ": " + csv_safe(errors.front()))
        << '\n';
  }
  write_text(o.out / "runs.csv", per_seed.str());
  write_text(o.out / "comparison.csv", cmp.str());

  rec.pin_seed(base.seed);
  rec.m.seeds = seeds;
  rec.m.config = trainer::to_json(base);
  rec.finish(o.out);
  out << cmp.str();
  return any_failed ? kExitRuntime : kExitOk;
}

// --- plot --------------------------------------------------------------------

struct PlotOpts {
  fs::path out;
  std::string input;
  std::string x_column;
  std::string name = "plot";
  std::string title;
  std::string y_label;
  bool temperature = false;
  double tau = 0.1;
  int epochs = 200;
  std::string variant = "sqrt";
  std::string counts_file;
  int num_classes = 10;
  std::int64_t n_max = 5000;
  double rho = 100.0;
  std::vector<int> classes;
};

void add_plot(CLI::App& app, PlotOpts& o) {
  auto* c = app.add_subcommand(
      "plot", "render a CSV (or a temperature schedule) as an SVG line plot plus its CSV");
  c->add_option("--out", o.out, "output directory")->required();
  c->add_option("--name", o.name, "file stem of <name>.svg / <name>.csv")->capture_default_str();
  c->add_option("--title", o.title, "plot title");
  c->add_option("--y-label", o.y_label, "y axis label");
  auto* in = c->add_option("--input", o.input, "numeric CSV with a header row")
                 ->check(CLI::ExistingFile);
  c->add_option("--x", o.x_column, "x column name (default: first column)");
  auto* temp = c->add_flag("--temperature", o.temperature,
                           "plot the class-wise temperature schedule instead");
  in->excludes(temp);
  c->add_option("--tau", o.tau, "base temperature")->capture_default_str();
  c->add_option("--epochs", o.epochs, "epochs E")->capture_default_str();
  c->add_option("--variant", o.variant, "sqrt|linear")
      ->check(CLI::IsMember({"sqrt", "linear"}))
      ->capture_default_str();
  c->add_option("--counts", o.counts_file, "counts.csv written by synth")
      ->check(CLI::ExistingFile);
  c->add_option("--C", o.num_classes, "classes (without --counts)")->capture_default_str();
  c->add_option("--n-max", o.n_max, "largest class (without --counts)")->capture_default_str();
  c->add_option("--rho", o.rho, "imbalance ratio (without --counts)")->capture_default_str();
  c->add_option("--classes", o.classes, "0-based classes to draw (default: all)")
      ->delimiter(',');
}

std::vector<std::int64_t> read_counts_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<std::int64_t> counts;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cls, cnt;
    std::getline(ss, cls, ',');
    std::getline(ss, cnt, ',');
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(cnt.data(), cnt.data() + cnt.size(), v);
    if (ec != std::errc() || p != cnt.data() + cnt.size()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad count '" + cnt +
                       "'");
    }
    counts.push_back(v);
  }
  if (counts.empty()) throw std::invalid_argument(path.string() + ": no class counts");
  return counts;
}

int cmd_plot(PlotOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  Recorder rec("plot", args, o.out);
  if (o.name.empty() || o.name.find_first_of("/\\") != std::string::npos) {
    throw std::invalid_argument("plot: --name must be a plain file stem");
  }
  LinePlot plot;
  if (o.temperature) {
    std::vector<std::int64_t> counts;
    if (!o.counts_file.empty()) {
      counts = read_counts_csv(o.counts_file);
      rec.input(o.counts_file);
    } else {
      counts = data::longtail_counts(o.num_classes, o.n_max, o.rho);
    }
    const temperature::Schedule sched(o.tau, o.epochs, temperature::parse_variant(o.variant),
                                      data::normalize_profile(counts));
    std::vector<int> classes = o.classes;
    if (classes.empty()) {
      for (int c = 0; c < sched.num_classes(); ++c) classes.push_back(c);
    }
    for (int c : classes) {
      if (c < 0 || c >= sched.num_classes()) {
        throw std::invalid_argument("plot: class " + std::to_string(c) + " out of range");
      }
    }
    const nd::Tensor table = sched.table();
    plot.x_label = "epoch";
    plot.y_label = o.y_label.empty() ? "temperature" : o.y_label;
    plot.title = o.title.empty() ? std::string("class-wise temperature (") + o.variant + ")"
                                 : o.title;
    for (int e = 0; e <= o.epochs; ++e) plot.x.push_back(e);
    for (int c : classes) {
      Series s{"class_" + std::to_string(c), {}};
      for (int e = 0; e <= o.epochs; ++e) {
        s.y.push_back(table(static_cast<std::size_t>(e), static_cast<std::size_t>(c)));
      }
      plot.series.push_back(std::move(s));
    }
  } else {
    if (o.input.empty()) throw std::invalid_argument("plot: give --input or --temperature");
    plot = plot_from_csv(o.input, o.x_column);
    rec.input(o.input);
    plot.title = o.title;
    plot.y_label = o.y_label;
  }
  const std::string svg = render_svg(plot);
  std::ostringstream csv;
  write_plot_csv(csv, plot);
  prepare_out(o.out);
  write_text(o.out / (o.name + ".svg"), svg);
  write_text(o.out / (o.name + ".csv"), csv.str());
  rec.finish(o.out);
  out << "wrote " << (o.out / (o.name + ".svg")).string() << '\n';
  return kExitOk;
}

// --- rerun -------------------------------------------------------------------

struct RerunOpts {
  fs::path manifest;
  std::optional<fs::path> out;
  bool verify = false;
};

void add_rerun(CLI::App& app, RerunOpts& o) {
  auto* c = app.add_subcommand("rerun", "re-execute a command from its manifest.json");
  c->add_option("--manifest", o.manifest, "manifest.json of a previous command")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_option("--out", o.out, "output directory (default: the recorded one)");
  c->add_flag("--verify", o.verify, "compare the new outputs with the recorded hashes");
}

int cmd_rerun(RerunOpts& o, std::ostream& out, std::ostream& err) {
  const ExperimentManifest m = read_manifest(o.manifest);
  if (m.command == "rerun") throw std::invalid_argument("rerun: manifest of a rerun");
  const fs::path cwd = fs::current_path();
  fs::path target = o.out ? fs::absolute(*o.out) : fs::path(m.output_dir);
  std::vector<std::string> args{m.command};
  args.insert(args.end(), m.args.begin(), m.args.end());

  std::error_code ec;
  fs::current_path(m.working_dir, ec);
  if (ec) throw std::runtime_error("cannot enter recorded working directory " + m.working_dir);
  struct Restore {
    fs::path dir;
    ~Restore() {
      std::error_code ignored;
      fs::current_path(dir, ignored);
    }
  } restore{cwd};
  if (target.is_relative()) target = fs::absolute(target);
  args.push_back("--out");
  args.push_back(target.string());
  std::ostringstream sink;
  const int code = run(args, sink, err);
  if (code != kExitOk) return code;

  if (!o.verify) {
    out << "re-ran " << m.command << " into " << target.string() << '\n';
    return kExitOk;
  }
  const auto now = read_manifest(target / kManifestName);
  int mismatches = 0;
  for (const auto& [name, h] : m.outputs) {
    auto it = now.outputs.find(name);
    if (it == now.outputs.end()) {
      err << "missing output " << name << '\n';
      ++mismatches;
    } else if (it->second != h) {
      err << "output differs: " << name << " (" << h << " vs " << it->second << ")\n";
      ++mismatches;
    }
  }
  for (const auto& [name, h] : now.outputs) {
    if (!m.outputs.count(name)) {
      err << "unexpected output " << name << '\n';
      ++mismatches;
    }
  }
  if (now.inputs_hash != m.inputs_hash) {
    err << "inputs changed since the original run (" << m.inputs_hash << " vs "
        << now.inputs_hash << ")\n";
    ++mismatches;
  }
  if (mismatches) {
    err << mismatches << " mismatch(es)\n";
    return kExitRuntime;
  }
  out << "reproduced " << m.outputs.size() << " output files bit-for-bit\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-tailed out-of-distribution detection toolkit", "ltood"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ltood 1.0.0");

  SynthOpts synth;
  TrainOpts train;
  MineOpts mine;
  EvalOpts eval;
  AblateOpts ablate;
  PlotOpts plot;
  RerunOpts rerun;
  add_synth(app, synth);
  add_train(app, train);
  add_mine(app, mine);
  add_eval(app, eval);
  add_ablate(app, ablate);
  add_plot(app, plot);
  add_rerun(app, rerun);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::vector<std::string> sub_args(args.begin() + 1, args.end());
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "synth") return cmd_synth(synth, sub_args, out);
    if (name == "train") return cmd_train(train, sub_args, out);
    if (name == "mine") return cmd_mine(mine, sub_args, out);
    if (name == "eval") return cmd_eval(eval, sub_args, out);
    if (name == "ablate") return cmd_ablate(ablate, sub_args, out, err);
    if (name == "plot") return cmd_plot(plot, sub_args, out);
    if (name == "rerun") return cmd_rerun(rerun, out, err);
    err << "unknown command " << name << '\n';
    return kExitUsage;
  } catch (const trainer::NonFiniteLoss& e) {
    err << "error: " << e.what();
    if (!e.dump().empty()) err << "; offending batch written to " << e.dump().string();
    err << '\n';
    return kExitRuntime;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::logic_error& e) {
    // invalid_argument, ShapeError, out_of_range: bad input or flags
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace ltood::cli
