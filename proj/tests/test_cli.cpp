#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include "fmd/error.hpp"
#include "fmd/run.hpp"
#include "support.hpp"

using namespace fmd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("fmd_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_scenario(const fs::path& dir, const std::string& name, const SyntheticScenario& s) {
  const auto p = dir / name;
  std::ofstream(p) << s.to_json().dump(2);
  return p;
}

RunConfig synth_config(const fs::path& scenario, const fs::path& out) {
  RunConfig cfg;
  cfg.domain = "synth";
  cfg.catalog = fmdtest::data("synth_catalog.json");
  cfg.rules = bundled_data_dir() / "driving_rules.json";
  cfg.target = "synthetic:" + scenario.string();
  cfg.search.budget = 300;
  cfg.search.beam_budget = 150;
  cfg.search.pool_size = 64;
  cfg.out = out;
  return cfg;
}

/// Ten planted pairs at p = 1.0 on the synth catalog; every other set has p = 0.
SyntheticScenario ten_pairs() {
  SyntheticScenario s;
  s.base = 0.0;
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"box", "tent"}, {"cart", "sign"}, {"cone", "pole"}, {"crate", "lamp"}, {"dog", "kite"},
      {"box", "cart"}, {"cone", "dog"},  {"drone", "pole"}, {"kite", "lamp"}, {"sign", "tent"}};
  for (const auto& [a, b] : pairs) s.set_pair(a, b, 1.0);
  return s;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("search writes the run directory") {
    TempDir tmp("search");
    const auto cfg = synth_config(fmdtest::data("synth_scenario.json"), tmp.path / "run");
    std::ostringstream log;
    const auto r = cmd_search(cfg, log);
    for (const char* f : {"config.snapshot", "trace.log", "records.log", "summary.json", "summary.tsv",
                          "failure_modes.json", "failure_modes.tsv", "profiles.tsv", "lift.tsv"}) {
      CHECK_MESSAGE(fs::exists(cfg.out / f), f);
    }
    CHECK(read_records(cfg.out / "records.log") == r.all_candidates);
    const auto summary = nlohmann::json::parse(slurp(cfg.out / "summary.json"));
    CHECK(summary["records"] == r.all_candidates.size());
    CHECK(summary["spent"] == r.spent);
  }

  TEST_CASE("rerun from the snapshot reproduces the run") {
    TempDir tmp("snapshot");
    const auto cfg = synth_config(fmdtest::data("synth_scenario.json"), tmp.path / "a");
    std::ostringstream log;
    const auto first = cmd_search(cfg, log);
    auto again = RunConfig::from_snapshot(cfg.out / "config.snapshot");
    again.out = tmp.path / "b";
    CHECK(cmd_search(again, log) == first);
    CHECK(slurp(tmp.path / "a" / "records.log") == slurp(tmp.path / "b" / "records.log"));
  }

  TEST_CASE("binary: gpts with the whole budget in beam matches beam") {
    TempDir tmp("binary");
    const std::string common = std::string(FMD_CLI) + " search --domain synth --catalog " +
                               fmdtest::data("synth_catalog.json").string() + " --rules " +
                               (bundled_data_dir() / "driving_rules.json").string() + " --target synthetic:" +
                               fmdtest::data("synth_scenario.json").string() + " --seed 9 --budget 400";
    REQUIRE(std::system((common + " --algo gpts --beam-budget 400 --out " + (tmp.path / "g").string() + " > /dev/null").c_str()) == 0);
    REQUIRE(std::system((common + " --algo beam --out " + (tmp.path / "b").string() + " > /dev/null").c_str()) == 0);
    CHECK(slurp(tmp.path / "g" / "records.log") == slurp(tmp.path / "b" / "records.log"));
    CHECK(slurp(tmp.path / "g" / "trace.log") == slurp(tmp.path / "b" / "trace.log"));
  }

  TEST_CASE("binary: usage errors exit 1") {
    CHECK(std::system((std::string(FMD_CLI) + " search --budget notanumber > /dev/null 2>&1").c_str()) != 0);
    CHECK(WEXITSTATUS(std::system((std::string(FMD_CLI) + " search --budget notanumber > /dev/null 2>&1").c_str())) == 1);
    CHECK(WEXITSTATUS(std::system((std::string(FMD_CLI) + " search --tau 0 --target synthetic:" +
                                   fmdtest::data("synth_scenario.json").string() + " > /dev/null 2>&1")
                                      .c_str())) == 1);
    CHECK(WEXITSTATUS(std::system((std::string(FMD_CLI) + " --help > /dev/null").c_str())) == 0);
  }

  TEST_CASE("validate with fewer candidates than requested warns") {
    TempDir tmp("few");
    auto cfg = synth_config(fmdtest::data("synth_scenario.json"), tmp.path / "run");
    cfg.search.algo = Algo::Random;
    cfg.search.budget = 15;
    std::ostringstream log;
    cmd_search(cfg, log);
    const auto rep = cmd_validate(cfg.out, 10, 20, log);
    CHECK(rep.validated.size() == 3);
    REQUIRE(rep.warnings.size() == 1);
    CHECK(rep.warnings[0].find("only 3") != std::string::npos);
    CHECK(fs::exists(cfg.out / "validate.json"));
  }

  TEST_CASE("validate keeps planted sets at 100%") {
    TempDir tmp("planted");
    const auto scenario = write_scenario(tmp.path, "ten.json", ten_pairs());
    auto cfg = synth_config(scenario, tmp.path / "run");
    cfg.search.algo = Algo::Random;

    // Phase-one run by hand: the ten planted pairs plus two sets at p = 0.
    SearchResult r;
    const auto s = ten_pairs();
    for (const auto& [key, w] : s.pair_weights) {
      EvalRecord e;
      e.set = ConceptSet{key.first, key.second};
      e.m = 5;
      e.failures = 5;
      e.budget_cost = 5;
      r.all_candidates.push_back(e);
    }
    for (const char* key : {"box", "cone"}) {
      EvalRecord e;
      e.set = ConceptSet{key};
      e.m = 5;
      e.budget_cost = 5;
      r.all_candidates.push_back(e);
    }
    REQUIRE(r.all_candidates.size() == 12);
    r.spent = 60;
    write_run(cfg.out, cfg, r);

    std::ostringstream log;
    const auto rep = cmd_validate(cfg.out, 10, 20, log);
    CHECK(rep.validated.size() == 10);
    CHECK(rep.mean_fr == 1.0);
    CHECK(rep.std_fr == 0.0);
    CHECK(rep.at_least_80 == 10);
    for (const auto& v : rep.validated) CHECK(planted_probability(s, v.set) == 1.0);
  }

  TEST_CASE("replay round trip reproduces the records") {
    TempDir tmp("replay");
    const auto cfg = synth_config(fmdtest::data("synth_scenario.json"), tmp.path / "live");
    std::ostringstream log;
    const auto live = cmd_search(cfg, log);
    auto replay_cfg = cfg;
    replay_cfg.target = "replay:" + (cfg.out / "records.log").string();
    replay_cfg.out = tmp.path / "replay";
    const auto replayed = cmd_search(replay_cfg, log);
    REQUIRE(replayed.all_candidates.size() == live.all_candidates.size());
    for (std::size_t i = 0; i < live.all_candidates.size(); ++i) {
      CHECK(replayed.all_candidates[i].set == live.all_candidates[i].set);
      CHECK(replayed.all_candidates[i].failures == live.all_candidates[i].failures);
      CHECK(replayed.all_candidates[i].answers == live.all_candidates[i].answers);
    }
    CHECK(summarize(replayed.all_candidates, 0.6).mfr == summarize(live.all_candidates, 0.6).mfr);
  }

  TEST_CASE("transfer to shared and disjoint targets") {
    TempDir tmp("transfer");
    const auto source = write_scenario(tmp.path, "source.json", ten_pairs());
    SyntheticScenario other;
    other.base = 0.05;
    other.set_pair("drone", "noon", 0.9);
    const auto disjoint = write_scenario(tmp.path, "other.json", other);

    auto cfg = synth_config(source, tmp.path / "run");
    cfg.search.algo = Algo::Beam;
    cfg.search.budget = 1000;
    std::ostringstream log;
    cmd_search(cfg, log);

    TransferOptions opts;
    opts.out = tmp.path / "to_self";
    const auto self = cmd_transfer(cfg.out, cfg.target, opts, log);
    CHECK(self.report.mean_target_fr == 1.0);
    REQUIRE(self.report.multiplier);
    CHECK(*self.report.multiplier == doctest::Approx(1.0 / to_double(self.baseline.mfr)));
    CHECK(*self.report.multiplier > 1.0);
    CHECK(fs::exists(opts.out / "transfer.json"));

    opts.out = tmp.path / "to_other";
    const auto away = cmd_transfer(cfg.out, "synthetic:" + disjoint.string(), opts, log);
    CHECK(away.report.mean_target_fr < 0.2);
    CHECK(away.report.n == 10);
  }

  TEST_CASE("sweeps over kernel, samples and tau") {
    TempDir tmp("sweep");
    auto cfg = synth_config(fmdtest::data("synth_scenario.json"), tmp.path / "sweep");
    std::ostringstream log;

    const auto kernels = cmd_sweep(cfg, parse_grid("kernel=dotproduct,rbf"), log);
    CHECK(kernels.size() == 2);
    CHECK(fs::exists(cfg.out / "sweep.tsv"));
    CHECK(fs::exists(cfg.out / "kernel-rbf" / "records.log"));

    cfg.out.clear();
    cfg.search.algo = Algo::Random;
    cfg.search.budget = 1000;
    const auto ms = cmd_sweep(cfg, parse_grid("samples=5,10"), log);
    REQUIRE(ms.size() == 2);
    CHECK(ms[0].evaluated == 200);
    CHECK(ms[1].evaluated == 100);

    const auto taus = cmd_sweep(cfg, parse_grid("tau=0.2,0.4,0.6,0.8,1.0"), log);
    REQUIRE(taus.size() == 5);
    for (std::size_t i = 1; i < taus.size(); ++i) {
      CHECK(taus[i].summary.failure_modes <= taus[i - 1].summary.failure_modes);
    }

    const auto grid = parse_grid("beam_width=1,5;samples=5");
    REQUIRE(grid.size() == 2);
    CHECK(grid[0].second == std::vector<std::string>{"1", "5"});
    CHECK_THROWS_AS(parse_grid("nonsense"), ConfigError);
    CHECK_THROWS_AS(cmd_sweep(cfg, parse_grid("colour=red"), log), ConfigError);
  }

  TEST_CASE("config errors") {
    RunConfig cfg;
    cfg.catalog = "/nonexistent/catalog.json";
    cfg.target = "synthetic:" + fmdtest::data("synth_scenario.json").string();
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("catalog not found"), ConfigError);
    cfg = RunConfig{};
    cfg.target = "carrier-pigeon:x";
    CHECK_THROWS(make_session(cfg));
    CHECK(RunConfig::from_json(RunConfig{}.to_json()).to_json() == RunConfig{}.to_json());
  }
}
