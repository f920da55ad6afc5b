#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "seqlim/csv.hpp"
#include "seqlim/experiment.hpp"
#include "seqlim/gibbs.hpp"

using namespace seqlim;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"({
  "seed": 4242,
  "system": {
    "type": "interval",
    "grid": 513,
    "family": [{"preset": "doubling"}],
    "schedule": {"type": "periodic", "order": [0]}
  },
  "observable": {"type": "trig", "cos": [1.0]},
  "pipeline": [
    {"stage": "hypotheses", "samples": 16},
    {"stage": "rpf", "n_max": 16, "samples": 4},
    {"stage": "martingale", "n_max": 200, "variance_coeff": 0.5, "variance_tol": 1e-6},
    {"stage": "limits", "n_list": [8, 16, 32, 64], "samples": 20000,
     "slope_lo": -2.0, "slope_hi": 0.0, "moment_samples": 100000,
     "moment_slope_tol": 0.2}
  ]
})";

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("seqlim_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config validation rejects malformed input with field paths") {
  // unknown key
  CHECK_THROWS_WITH_AS(
      parse_config(R"({"seed":1,"system":{},"pipeline":[],"bogus":2})"),
      doctest::Contains("$.bogus"), ConfigError);
  // missing seed
  CHECK_THROWS_AS(parse_config(R"({"system":{},"pipeline":[]})"), ConfigError);
  // negative sample count carries the field path
  std::string bad = kTinyConfig;
  size_t pos = bad.find("\"samples\": 20000");
  bad.replace(pos, 16, "\"samples\": -5");
  CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("samples"), ConfigError);
  // non-increasing n_list
  std::string nl = kTinyConfig;
  pos = nl.find("[8, 16, 32, 64]");
  nl.replace(pos, 15, "[8, 8, 32, 64]");
  CHECK_THROWS_WITH_AS(parse_config(nl), doctest::Contains("n_list"), ConfigError);
  // unknown stage parameter (typo in a tolerance name)
  std::string typo = kTinyConfig;
  pos = typo.find("\"variance_tol\"");
  typo.replace(pos, 14, "\"varianse_tol\"");
  CHECK_THROWS_WITH_AS(parse_config(typo), doctest::Contains("varianse_tol"),
                       ConfigError);
  // schedule index out of range
  std::string sched = kTinyConfig;
  pos = sched.find("\"order\": [0]");
  sched.replace(pos, 12, "\"order\": [3]");
  CHECK_THROWS_AS(parse_config(sched), ConfigError);
}

TEST_CASE("bundled configurations parse and describe") {
  fs::path cfg_dir = SEQLIM_CONFIG_DIR;
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(cfg_dir)) {
    if (entry.path().extension() != ".json") continue;
    ExperimentConfig cfg = load_config(entry.path());
    std::string plan = describe_experiment(cfg);
    CHECK(plan.find("stages:") != std::string::npos);
    ++seen;
  }
  CHECK(seen >= 7);

  ExperimentConfig dbl = load_config(cfg_dir / "doubling_cos.json");
  std::string plan = describe_experiment(dbl);
  CHECK(plan.find("4097") != std::string::npos);
  ExperimentConfig sft = load_config(cfg_dir / "sft3.json");
  CHECK(describe_experiment(sft).find("3x3") != std::string::npos);
}

TEST_CASE("tiny pipeline runs end to end with verdicts and artifacts") {
  ExperimentConfig cfg = parse_config(kTinyConfig);
  fs::path out = temp_dir("run");
  ExperimentReport rep = run_experiment(cfg, out, 1);
  CHECK(rep.exit_code == 0);
  CHECK(fs::exists(rep.dir / "summary.json"));
  CHECK(fs::exists(rep.dir / "config.json"));
  CHECK(fs::exists(rep.dir / "hypotheses.csv"));
  CHECK(fs::exists(rep.dir / "rpf_triplet.csv"));
  CHECK(fs::exists(rep.dir / "variance_curve.csv"));
  CHECK(fs::exists(rep.dir / "distances.csv"));
  CHECK(fs::exists(rep.dir / "samples_n64.bin"));
  CHECK(fs::exists(rep.dir / "samples_n64.json"));
  for (const Verdict& v : rep.verdicts) CHECK(v.pass);
  // every verdict traces back to a persisted stage artifact
  CHECK(rep.verdicts.size() >= 8);
}

TEST_CASE("identical seeds give byte-identical csv outputs") {
  ExperimentConfig cfg = parse_config(kTinyConfig);
  fs::path out_a = temp_dir("rep_a"), out_b = temp_dir("rep_b");
  ExperimentReport a = run_experiment(cfg, out_a, 1);
  ExperimentReport b = run_experiment(cfg, out_b, 2);  // different worker cap
  for (const char* name : {"distances.csv", "variance_curve.csv", "moment_ratio.csv"}) {
    CHECK(read_file(a.dir / name) == read_file(b.dir / name));
  }
  CompareResult cmp = compare_reports(a.dir, b.dir);
  CHECK_FALSE(cmp.schema_mismatch);
  CHECK(cmp.flagged == 0);
}

TEST_CASE("different seeds stay within Monte Carlo error bars") {
  ExperimentConfig cfg_a = parse_config(kTinyConfig);
  std::string other = kTinyConfig;
  size_t pos = other.find("\"seed\": 4242");
  other.replace(pos, 12, "\"seed\": 999");
  ExperimentConfig cfg_b = parse_config(other);
  fs::path out_a = temp_dir("seed_a"), out_b = temp_dir("seed_b");
  ExperimentReport a = run_experiment(cfg_a, out_a, 1);
  ExperimentReport b = run_experiment(cfg_b, out_b, 1);
  CompareResult cmp = compare_reports(a.dir, b.dir);
  CHECK_FALSE(cmp.schema_mismatch);
  CHECK(cmp.flagged == 0);  // within 3x the recorded error bars
}

TEST_CASE("coboundary guard skips the CLT stage with a marker") {
  const char* cob_cfg = R"({
    "seed": 7,
    "system": {
      "type": "interval",
      "grid": 513,
      "family": [{"preset": "doubling"}],
      "schedule": {"type": "periodic", "order": [0]}
    },
    "observable": {"type": "coboundary", "cos": [0.2]},
    "pipeline": [
      {"stage": "martingale", "n_max": 400, "expect": "bounded",
       "variance_bound": 0.16},
      {"stage": "limits", "n_list": [8, 16, 32], "samples": 20000}
    ]
  })";
  ExperimentConfig cfg = parse_config(cob_cfg);
  fs::path out = temp_dir("cob");
  ExperimentReport rep = run_experiment(cfg, out, 1);
  CHECK(rep.exit_code == 0);
  bool skipped = false;
  for (const Verdict& v : rep.verdicts)
    if (v.name == "skipped_sigma_bounded" && v.note == "sigma bounded") skipped = true;
  CHECK(skipped);
}

TEST_CASE("cylinder query through a configuration") {
  fs::path cfg_dir = SEQLIM_CONFIG_DIR;
  ExperimentConfig cfg = load_config(cfg_dir / "golden_mean.json");
  System sys = cfg.make_system();
  const GibbsSystem& gs = sys.gibbs_sys(0, 8);
  double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<int> w = {0};
  CHECK(cylinder_mass(gs, 0, w) ==
        doctest::Approx(phi * phi / (1 + phi * phi)).epsilon(1e-9));
}

TEST_CASE("config hash is stable and seed-sensitive") {
  ExperimentConfig a = parse_config(kTinyConfig);
  ExperimentConfig b = parse_config(kTinyConfig);
  CHECK(a.config_hash == b.config_hash);
  std::string other = kTinyConfig;
  size_t pos = other.find("\"seed\": 4242");
  other.replace(pos, 12, "\"seed\": 4243");
  CHECK(parse_config(other).config_hash != a.config_hash);
}
