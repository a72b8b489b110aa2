#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "ltood/cli/benchmark.hpp"
#include "ltood/cli/cli.hpp"
#include "ltood/cli/manifest.hpp"
#include "ltood/cli/svg_plot.hpp"
#include "ltood/data/csv_io.hpp"

using namespace ltood;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// A small benchmark that trains in well under a second per epoch.
std::vector<std::string> small_synth(const fs::path& out) {
  return {"synth",          "--out",         out.string(), "--C",  "5",
          "--n-max",        "60",            "--rho",      "10",   "--dim",
          "4",              "--test-per-class", "10",      "--aux-size", "150",
          "--ood-test-size", "40",           "--seed",     "3"};
}

const std::vector<std::string> kFast = {"--epochs", "2", "--batch-size", "12"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Minimal XML well-formedness: declaration, balanced tags, quoted attributes,
// and only the five predefined entities.
bool well_formed_xml(const std::string& s, std::string& why) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  while (i < s.size()) {
    if (s[i] == '<') {
      if (s.compare(i, 5, "<?xml") == 0) {
        i = s.find("?>", i);
        if (i == std::string::npos) return why = "unterminated declaration", false;
        i += 2;
        continue;
      }
      if (s.compare(i, 4, "<!--") == 0) {
        i = s.find("-->", i);
        if (i == std::string::npos) return why = "unterminated comment", false;
        i += 3;
        continue;
      }
      const auto end = s.find('>', i);
      if (end == std::string::npos) return why = "unterminated tag", false;
      std::string tag = s.substr(i + 1, end - i - 1);
      i = end + 1;
      if (!tag.empty() && tag[0] == '/') {
        const std::string name = tag.substr(1);
        if (stack.empty() || stack.back() != name) return why = "mismatched </" + name + ">", false;
        stack.pop_back();
        continue;
      }
      const bool self_closing = !tag.empty() && tag.back() == '/';
      if (self_closing) tag.pop_back();
      const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
      if (name.empty()) return why = "empty tag name", false;
      std::size_t quotes = 0;
      for (char c : tag) quotes += c == '"';
      if (quotes % 2) return why = "unbalanced quotes in <" + name + ">", false;
      if (stack.empty()) {
        if (root_seen) return why = "second root element", false;
        root_seen = true;
      }
      if (!self_closing) stack.push_back(name);
      continue;
    }
    if (s[i] == '&') {
      const auto semi = s.find(';', i);
      const std::string ent = semi == std::string::npos ? "" : s.substr(i, semi - i + 1);
      if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") {
        return why = "bad entity near " + s.substr(i, 8), false;
      }
    }
    ++i;
  }
  if (!stack.empty()) return why = "unclosed <" + stack.back() + ">", false;
  if (!root_seen) return why = "no root", false;
  return true;
}

}  // namespace

TEST_CASE("synth writes the long-tailed counts") {
  testing::TempDir dir("cli");
  const auto r = run({"synth", "--out", (dir / "d").string(), "--C", "10", "--n-max", "5000",
                      "--rho", "100", "--aux-size", "30", "--ood-test-size", "10",
                      "--test-per-class", "2"});
  REQUIRE(r.code == cli::kExitOk);
  const auto rows = lines_of(slurp(dir / "d" / "counts.csv"));
  REQUIRE(rows.size() == 11);
  CHECK(rows[0] == "class,count,normalized");
  const std::vector<std::string> counts = {"5000", "2997", "1796", "1077", "645",
                                           "387",  "232",  "139",  "83",   "50"};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    CHECK(rows[i + 1].rfind(std::to_string(i) + "," + counts[i] + ",0.", 0) == 0);
  }
  for (const auto& f : {"dataset.json", "train.csv", "test.csv", "aux.csv",
                        "ood_near-tail.csv", "ood_near-head.csv", "ood_ambient.csv",
                        "manifest.json"}) {
    CHECK(fs::exists(dir / "d" / f));
  }
}

TEST_CASE("synth is deterministic") {
  testing::TempDir dir("cli");
  REQUIRE(run(small_synth(dir / "a")).code == 0);
  REQUIRE(run(small_synth(dir / "b")).code == 0);
  const auto ha = cli::hash_tree(dir / "a");
  CHECK(ha == cli::hash_tree(dir / "b"));
  CHECK(ha.size() >= 7);
}

TEST_CASE("usage errors exit with 1") {
  testing::TempDir dir("cli");
  CHECK(run({"synth", "--out", (dir / "x").string(), "--rho", "0"}).code == cli::kExitUsage);
  CHECK(run({"synth", "--out", (dir / "x").string(), "--C", "1"}).code == cli::kExitUsage);
  CHECK(run({"synth"}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"train", "--data", (dir / "none").string(), "--out", (dir / "r").string(),
             "--variant", "cubic"})
            .code == cli::kExitUsage);
  const auto help = run({"train", "--help"});
  CHECK(help.code == 0);
  for (const auto* flag : {"--epochs", "--alpha", "--beta", "--gamma", "--k", "--tau",
                           "--stage-split", "--seed", "--variant", "--score-form"}) {
    CHECK(help.out.find(flag) != std::string::npos);
  }
}

TEST_CASE("train, mine and eval a small run") {
  testing::TempDir dir("cli");
  const auto data = dir / "data";
  REQUIRE(run(small_synth(data)).code == 0);

  const auto tr = run(cat({"train", "--data", data.string(), "--out", (dir / "run").string(),
                           "--epochs", "1", "--batch-size", "12"},
                          {}));
  REQUIRE(tr.code == 0);
  CHECK(fs::exists(dir / "run" / "checkpoint.json"));
  CHECK(fs::exists(dir / "run" / "checkpoint.bin"));
  const auto log = lines_of(slurp(dir / "run" / "train_log.jsonl"));
  REQUIRE(!log.empty());
  CHECK(json::parse(log[0]).contains("total"));
  CHECK(json::parse(lines_of(tr.out).back())["done"] == true);
  const auto manifest = cli::read_manifest(dir / "run" / "manifest.json");
  CHECK(manifest.label == "rscl");
  CHECK(manifest.config["epochs"] == 1);

  const auto mn = run({"mine", "--data", data.string(), "--checkpoint",
                       (dir / "run" / "checkpoint").string(), "--out", (dir / "mine").string()});
  REQUIRE(mn.code == 0);
  const auto mined = read_json(dir / "mine" / "mined.json");
  CHECK(mined["scores"].size() == 36);
  CHECK(mined["partition"]["neutral"].size() == 12);

  // Second pool: the near-tail pool again under another name.
  fs::copy_file(data / "ood_near-tail.csv", dir / "extra.csv");
  const auto ev = run({"eval", "--data", data.string(), "--checkpoint",
                       (dir / "run" / "checkpoint").string(), "--out", (dir / "eval").string(),
                       "--pool", (dir / "extra.csv").string()});
  REQUIRE(ev.code == 0);
  const auto metrics = read_json(dir / "eval" / "metrics.json");
  REQUIRE(metrics["pools"].size() == 4);
  double mean = 0.0;
  for (const auto& p : metrics["pools"]) mean += p["auroc"].get<double>() / 4.0;
  CHECK(metrics["average"]["auroc"].get<double>() == doctest::Approx(mean).epsilon(1e-12));
  CHECK(metrics["pools"][3]["auroc"] == metrics["pools"][0]["auroc"]);
  CHECK(metrics.contains("head_acc"));
  CHECK(metrics.contains("tail_acc"));
  CHECK(ev.out.find("Average") != std::string::npos);
  CHECK(slurp(dir / "eval" / "metrics.txt") == ev.out);

  const auto missing = run({"eval", "--data", data.string(), "--checkpoint",
                            (dir / "nope").string(), "--out", (dir / "e2").string()});
  CHECK(missing.code == cli::kExitRuntime);
}

TEST_CASE("zero contrastive weights label the run as the baseline") {
  testing::TempDir dir("cli");
  REQUIRE(run(small_synth(dir / "data")).code == 0);
  const auto r = run(cat({"train", "--data", (dir / "data").string(), "--out",
                          (dir / "run").string(), "--quiet", "--beta", "0", "--gamma", "0"},
                         kFast));
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(cli::read_manifest(dir / "run" / "manifest.json").label == "ocl-baseline");
}

TEST_CASE("config file and flags layer over the defaults") {
  testing::TempDir dir("cli");
  REQUIRE(run(small_synth(dir / "data")).code == 0);
  std::ofstream(dir / "cfg.json") << R"({"epochs": 1, "tau": 0.2, "alpha": 0.1})";
  const auto r = run({"train", "--data", (dir / "data").string(), "--out",
                      (dir / "run").string(), "--quiet", "--batch-size", "12", "--config",
                      (dir / "cfg.json").string(), "--tau", "0.3"});
  REQUIRE(r.code == 0);
  const auto cfg = read_json(dir / "run" / "config.json");
  CHECK(cfg["epochs"] == 1);
  CHECK(cfg["tau"] == 0.3);
  CHECK(cfg["alpha"] == 0.1);

  std::ofstream(dir / "bad.json") << R"({"epochs": 1, "warp": 9})";
  CHECK(run({"train", "--data", (dir / "data").string(), "--out", (dir / "r2").string(),
             "--config", (dir / "bad.json").string()})
            .code == cli::kExitUsage);
}

TEST_CASE("exploding training exits with 2 and names the dump") {
  testing::TempDir dir("cli");
  REQUIRE(run(small_synth(dir / "data")).code == 0);
  const auto r = run(cat({"train", "--data", (dir / "data").string(), "--out",
                          (dir / "run").string(), "--quiet", "--optimizer", "sgd", "--lr",
                          "1e200"},
                         kFast));
  CHECK(r.code == cli::kExitRuntime);
  CHECK(r.err.find("nonfinite_batch.json") != std::string::npos);
  CHECK(fs::exists(dir / "run" / "nonfinite_batch.json"));
}

TEST_CASE("ablate sweeps produce one comparison row per run") {
  testing::TempDir dir("cli");
  REQUIRE(run(small_synth(dir / "data")).code == 0);
  const auto r = run(cat({"ablate", "--data", (dir / "data").string(), "--out",
                          (dir / "sw").string(), "--grid", "variant=sqrt,linear", "--jobs", "2"},
                         kFast));
  REQUIRE(r.code == 0);
  const auto rows = lines_of(slurp(dir / "sw" / "comparison.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("run,delta,label,seeds_ok,auroc", 0) == 0);
  CHECK(rows[1].rfind("variant=sqrt,", 0) == 0);
  CHECK(rows[2].rfind("variant=linear,", 0) == 0);
  CHECK(rows[2].substr(rows[2].size() - 3) == ",ok");
  CHECK(fs::exists(dir / "sw" / "variant=linear" / "seed-0" / "metrics.json"));
}

TEST_CASE("tail-fraction sweep drops the matching loss terms") {
  testing::TempDir dir("cli");
  REQUIRE(run(small_synth(dir / "data")).code == 0);
  std::ofstream(dir / "sweep.json") << R"({"runs": [
      {"name": "k0", "delta": {"k": 0.0}}, {"name": "k04", "delta": {"k": 0.4}},
      {"name": "k06", "delta": {"k": 0.6}}, {"name": "k1", "delta": {"k": 1.0}}]})";
  const auto r = run(cat({"ablate", "--data", (dir / "data").string(), "--out",
                          (dir / "sw").string(), "--sweep", (dir / "sweep.json").string(),
                          "--seeds", "0,1"},
                         kFast));
  REQUIRE(r.code == 0);
  CHECK(lines_of(slurp(dir / "sw" / "comparison.csv")).size() == 5);
  CHECK(lines_of(slurp(dir / "sw" / "runs.csv")).size() == 9);
  auto terms = [&](const std::string& run_name) {
    double tail = 0, head = 0;
    for (const auto& l : lines_of(slurp(dir / "sw" / run_name / "seed-1" / "train_log.jsonl"))) {
      const auto j = json::parse(l);
      tail += std::abs(j["tail"].get<double>());
      head += std::abs(j["head"].get<double>());
    }
    return std::pair{tail, head};
  };
  CHECK(terms("k0").first == 0.0);
  CHECK(terms("k0").second > 0.0);
  CHECK(terms("k1").second == 0.0);
  CHECK(terms("k1").first > 0.0);
  CHECK(terms("k06").first > 0.0);
  CHECK(terms("k06").second > 0.0);
}

TEST_CASE("ablate flags failed runs and exits with 2") {
  testing::TempDir dir("cli");
  REQUIRE(run(small_synth(dir / "data")).code == 0);
  const auto r = run(cat({"ablate", "--data", (dir / "data").string(), "--out",
                          (dir / "sw").string(), "--grid", "lr=0.001,1e200", "--optimizer", "sgd"},
                         kFast));
  CHECK(r.code == cli::kExitRuntime);
  const auto rows = lines_of(slurp(dir / "sw" / "comparison.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].find(",ok") != std::string::npos);
  CHECK(rows[2].find("failed 1/1") != std::string::npos);
}

TEST_CASE("temperature plot is well-formed SVG with the expected endpoints") {
  testing::TempDir dir("cli");
  const auto r = run({"plot", "--out", dir.path().string(), "--name", "temperature",
                      "--temperature", "--classes", "0,4", "--epochs", "200"});
  REQUIRE(r.code == 0);
  std::string why;
  CHECK_MESSAGE(well_formed_xml(slurp(dir / "temperature.svg"), why), why);
  const auto rows = lines_of(slurp(dir / "temperature.csv"));
  REQUIRE(rows.size() == 202);
  auto cell = [](const std::string& row, std::size_t col) {
    std::stringstream ss(row);
    std::string v;
    for (std::size_t i = 0; i <= col; ++i) std::getline(ss, v, ',');
    return std::stod(v);
  };
  CHECK(cell(rows[1], 1) == doctest::Approx(0.1));
  CHECK(std::abs(cell(rows.back(), 1) - 0.0105) < 1e-4);
  CHECK(cell(rows.back(), 2) > cell(rows.back(), 1));
}

TEST_CASE("plot rejects empty or malformed CSV") {
  testing::TempDir dir("cli");
  std::ofstream(dir / "empty.csv").close();
  CHECK(run({"plot", "--out", dir.path().string(), "--input", (dir / "empty.csv").string()}).code ==
        cli::kExitUsage);
  std::ofstream(dir / "header.csv") << "x,y\n";
  CHECK(run({"plot", "--out", dir.path().string(), "--input", (dir / "header.csv").string()})
            .code == cli::kExitUsage);
  std::ofstream(dir / "bad.csv") << "x,y\n1,2\n2,abc\n";
  const auto bad =
      run({"plot", "--out", dir.path().string(), "--input", (dir / "bad.csv").string()});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find(":3") != std::string::npos);

  std::ofstream(dir / "ok.csv") << "epoch,a&b,c<d\n0,1,2\n1,0.5,3\n";
  const auto ok = run({"plot", "--out", dir.path().string(), "--name", "ok", "--title",
                       "\"quoted\" & <odd>", "--input", (dir / "ok.csv").string()});
  REQUIRE(ok.code == 0);
  std::string why;
  CHECK_MESSAGE(well_formed_xml(slurp(dir / "ok.svg"), why), why);
}

TEST_CASE("rerun reproduces outputs bit for bit") {
  testing::TempDir dir("cli");
  REQUIRE(run(small_synth(dir / "data")).code == 0);
  REQUIRE(run(cat({"train", "--data", (dir / "data").string(), "--out",
                   (dir / "run").string(), "--quiet"},
                  kFast))
              .code == 0);
  const auto again = run({"rerun", "--manifest", (dir / "run" / "manifest.json").string(),
                          "--out", (dir / "run2").string(), "--verify"});
  CHECK(again.code == 0);
  CHECK(again.out.find("bit-for-bit") != std::string::npos);
  CHECK(cli::hash_tree(dir / "run") == cli::hash_tree(dir / "run2"));

  const auto synth_again = run({"rerun", "--manifest",
                                (dir / "data" / "manifest.json").string(), "--out",
                                (dir / "data2").string(), "--verify"});
  CHECK(synth_again.code == 0);

  // A changed input is reported.
  std::ofstream(dir / "data" / "aux.csv", std::ios::app) << "0,0,0,0\n";
  const auto changed = run({"rerun", "--manifest", (dir / "run" / "manifest.json").string(),
                            "--out", (dir / "run3").string(), "--verify"});
  CHECK(changed.code == cli::kExitRuntime);
}

TEST_CASE("LTOOD_SEED sets the default seed and is pinned in the manifest") {
  testing::TempDir dir("cli");
  ::setenv("LTOOD_SEED", "41", 1);
  auto args = small_synth(dir / "a");
  args.resize(args.size() - 2);  // drop --seed 3
  const auto r = run(args);
  ::unsetenv("LTOOD_SEED");
  REQUIRE(r.code == 0);
  const auto m = cli::read_manifest(dir / "a" / "manifest.json");
  CHECK(m.seeds == std::vector<std::uint64_t>{41});
  CHECK(read_json(dir / "a" / "dataset.json")["seed"] == 41);
  const auto pos = std::find(m.args.begin(), m.args.end(), "--seed");
  REQUIRE(pos != m.args.end());
  CHECK(*(pos + 1) == "41");

  // The pinned seed survives a rerun without the variable.
  CHECK(run({"rerun", "--manifest", (dir / "a" / "manifest.json").string(), "--out",
             (dir / "b").string(), "--verify"})
            .code == 0);

  ::setenv("LTOOD_SEED", "not-a-number", 1);
  const auto bad = run(args);
  ::unsetenv("LTOOD_SEED");
  CHECK(bad.code == cli::kExitUsage);
}

TEST_CASE("untrained model is at chance on symmetric data") {
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cli::SynthSpec spec;
    spec.n_max = 100;
    spec.aux_size = 30;
    spec.ood_test_size = 10;
    spec.seed = seed;
    const auto b = cli::make_benchmark(spec);
    // "OOD" pool drawn from the ID generator itself.
    const auto twin = data::synth_id(b.profile, b.clusters, spec.test_per_class, seed + 1000).test;
    data::OutlierPool same{twin.features, "id-twin", seed};
    trainer::TrainConfig c;
    c.seed = seed;
    const auto state = trainer::init_state(c, spec.dim, spec.num_classes);
    const auto report = detector::evaluate(state.params, b.test, {{"twin", &same}}, b.profile);
    mean += report.average.auroc / 5.0;
  }
  CHECK(std::abs(mean - 0.5) <= 0.1);
}

TEST_CASE("the installed binary reports exit codes") {
  const char* bin = std::getenv("LTOOD_BINARY");
  if (bin == nullptr) {
    MESSAGE("LTOOD_BINARY not set; skipping");
    return;
  }
  testing::TempDir dir("cli");
  auto sh = [&](const std::string& args) {
    const std::string cmd = std::string("\"") + bin + "\" " + args + " > \"" +
                            (dir / "out.txt").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  CHECK(sh("--help") == 0);
  CHECK(slurp(dir / "out.txt").find("synth") != std::string::npos);
  CHECK(sh("synth --out \"" + (dir / "d").string() + "\" --rho 0") == 1);
  CHECK(sh("synth --out \"" + (dir / "d").string() +
           "\" --C 4 --n-max 30 --aux-size 30 --ood-test-size 9 --test-per-class 3") == 0);
  CHECK(fs::exists(dir / "d" / "manifest.json"));
  CHECK(sh("eval --data \"" + (dir / "d").string() + "\" --checkpoint \"" +
           (dir / "missing").string() + "\" --out \"" + (dir / "e").string() + "\"") == 2);
}
