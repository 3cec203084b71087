#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fmd/error.hpp"
#include "fmd/search.hpp"
#include "support.hpp"

using namespace fmd;

namespace {

std::shared_ptr<const Oracle> solo_oracle() {
  const std::string src = R"({"domain": "solo", "root": {"class": "ego", "tags": ["ego"]}, "max_depth_default": 1,
    "exclusion_groups": {},
    "concepts": [{"id": "solo", "kind": "entity", "category": "objects", "description": "A box ahead.",
      "fragment": [
        {"op": "add_node", "class": "solo", "tags": ["solo", "object", "collidable"],
         "attrs": {"location": "lane", "distance": {"range": [5, 15]}}},
        {"op": "add_edge", "from": "root", "to": "self", "relation": "front"}],
      "requires": []}]})";
  return std::make_shared<const Oracle>(std::make_shared<const Catalog>(load_catalog(src)),
                                        load_rules_file(bundled_data_dir() / "driving_rules.json"));
}

struct Fixture {
  std::shared_ptr<const Oracle> oracle;
  SyntheticTarget target;
  Problem problem;
  Evaluator evaluator;

  Fixture(std::shared_ptr<const Oracle> o, SyntheticScenario s, int depth = 5)
      : oracle(o), target(std::move(s), o), problem(o, depth), evaluator(o, target) {}
};

SyntheticScenario planted_scenario() { return load_scenario_file(fmdtest::data("synth_scenario.json")); }

void check_budget_invariants(const SearchResult& r, const SearchConfig& cfg) {
  CHECK(static_cast<long>(r.all_candidates.size()) * cfg.m == r.spent);
  CHECK(r.spent <= cfg.budget);
  CHECK(r.spent + r.unspent == cfg.budget);
  long cost = 0;
  std::set<std::string> keys;
  for (const auto& rec : r.all_candidates) {
    cost += rec.budget_cost;
    CHECK(rec.m == cfg.m);
    CHECK(keys.insert(rec.set.key()).second);
  }
  CHECK(cost == r.spent);
  for (const auto& fm : r.failure_modes) {
    const auto it = std::find_if(r.all_candidates.begin(), r.all_candidates.end(),
                                 [&](const EvalRecord& e) { return e.set == fm; });
    REQUIRE(it != r.all_candidates.end());
    CHECK(it->fr() >= cfg.tau);
  }
}

}  // namespace

TEST_SUITE("search") {
  TEST_CASE("mmr value examples") {
    CHECK(mmr_value(0.8, {{"a", "b"}}, {"a"}, 0.5) == doctest::Approx(0.55));
    CHECK(mmr_value(0.3, {{"a"}, {"b", "c"}}, {"b"}, 0.0) == 0.3);
    CHECK(mmr_value(0.7, {{"a", "b"}}, {"a", "b"}, 1.0) == doctest::Approx(-0.3));
    CHECK(mmr_value(0.4, {}, {"a"}, 1.0) == 0.4);
  }

  TEST_CASE("lambda zero selects top-k by fr; shifting every fr keeps the order") {
    std::mt19937_64 rng(1);
    const std::vector<std::string> ids{"a", "b", "c", "d", "e", "f"};
    for (int t = 0; t < 100; ++t) {
      std::vector<ScoredCandidate> pool;
      std::set<std::string> seen;
      for (int i = 0; i < 12; ++i) {
        std::vector<std::string> pick;
        std::sample(ids.begin(), ids.end(), std::back_inserter(pick), 1 + i % 3, rng);
        ConceptSet s(pick);
        if (!seen.insert(s.key()).second) continue;
        pool.push_back({s, static_cast<double>(rng() % 6) / 5.0});
      }
      auto sorted = pool;
      std::sort(sorted.begin(), sorted.end(), [](const ScoredCandidate& x, const ScoredCandidate& y) {
        return x.fr != y.fr ? x.fr > y.fr : x.set.key() < y.set.key();
      });
      std::vector<ConceptSet> top;
      for (std::size_t i = 0; i < std::min<std::size_t>(5, sorted.size()); ++i) top.push_back(sorted[i].set);
      CHECK(mmr_select(pool, 5, 0.0) == top);

      auto shifted = pool;
      for (auto& c : shifted) c.fr += 0.25;
      CHECK(mmr_select(shifted, 5, 0.3) == mmr_select(pool, 5, 0.3));
    }
  }

  TEST_CASE("random search evaluates exactly B/m distinct sets") {
    Fixture f(fmdtest::driving_oracle(), SyntheticScenario{});
    SearchConfig cfg;
    cfg.algo = Algo::Random;
    const auto r = run_random(cfg, f.problem, f.evaluator);
    CHECK(r.all_candidates.size() == 200);
    check_budget_invariants(r, cfg);
    for (const auto& rec : r.all_candidates) CHECK(f.problem.admissible(rec.set));
  }

  TEST_CASE("exhausted space returns the remaining budget with a warning") {
    auto o = solo_oracle();
    Fixture f(o, SyntheticScenario{}, 1);
    SearchConfig cfg;
    cfg.max_depth = 1;
    for (auto algo : {Algo::Random, Algo::Beam, Algo::Gpts}) {
      cfg.algo = algo;
      const auto r = run_search(cfg, f.problem, f.evaluator);
      CHECK(r.all_candidates.size() == 1);
      CHECK(r.spent == 5);
      CHECK(r.unspent == 995);
      CHECK(!r.warnings.empty());
    }
  }

  TEST_CASE("every algorithm is deterministic for a fixed seed") {
    for (auto algo : {Algo::Random, Algo::Beam, Algo::Gpts}) {
      SearchConfig cfg;
      cfg.algo = algo;
      cfg.seed = 42;
      cfg.budget = 400;
      cfg.beam_budget = 200;
      cfg.pool_size = 64;
      Fixture a(fmdtest::synth_oracle(), planted_scenario());
      Fixture b(fmdtest::synth_oracle(), planted_scenario());
      CHECK(run_search(cfg, a.problem, a.evaluator) == run_search(cfg, b.problem, b.evaluator));
    }
  }

  TEST_CASE("beam level one is every admissible singleton") {
    Fixture f(fmdtest::driving_oracle(), SyntheticScenario{});
    SearchConfig cfg;
    cfg.algo = Algo::Beam;
    const auto r = run_beam(cfg, f.problem, f.evaluator);
    std::vector<ConceptSet> level1;
    for (const auto& t : r.trace) {
      if (t.step == 1) level1.push_back(t.set);
    }
    CHECK(level1 == enumerate_expansions(f.problem.catalog(), ConceptSet{}));
    check_budget_invariants(r, cfg);
  }

  TEST_CASE("a dominant atom reaches the first frontier") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SyntheticScenario s;
      s.base = 0.05;
      s.atom_weights = {{"lamp", 0.6}};
      Fixture f(fmdtest::synth_oracle(), s);
      SearchConfig cfg;
      cfg.algo = Algo::Beam;
      cfg.m = 20;
      cfg.seed = seed;
      const auto r = run_beam(cfg, f.problem, f.evaluator);
      std::vector<ScoredCandidate> level1;
      for (const auto& rec : r.all_candidates) {
        if (rec.set.size() == 1) level1.push_back({rec.set, rec.fr()});
      }
      const auto frontier = mmr_select(level1, cfg.beam_width, cfg.lambda);
      if (std::find(frontier.begin(), frontier.end(), ConceptSet{"lamp"}) != frontier.end()) ++hits;
    }
    CHECK(hits == 20);
  }

  TEST_CASE("beam width one is greedy") {
    Fixture f(fmdtest::synth_oracle(), planted_scenario());
    SearchConfig cfg;
    cfg.algo = Algo::Beam;
    cfg.beam_width = 1;
    cfg.budget = 5000;
    const auto r = run_beam(cfg, f.problem, f.evaluator);
    // Each level expands only the best set of the previous level.
    std::map<int, std::vector<const EvalRecord*>> by_level;
    for (const auto& rec : r.all_candidates) by_level[static_cast<int>(rec.set.size())].push_back(&rec);
    for (int level = 2; by_level.count(level); ++level) {
      const EvalRecord* best = nullptr;
      for (const auto* rec : by_level[level - 1]) {
        if (!best || rec->fr() > best->fr() || (rec->fr() == best->fr() && rec->set.key() < best->set.key())) best = rec;
      }
      for (const auto* rec : by_level[level]) {
        CHECK(rec->set.intersection_size(best->set) == best->set.size());
      }
    }
    check_budget_invariants(r, cfg);
  }

  TEST_CASE("gpts with the whole budget in the beam phase is beam search") {
    Fixture a(fmdtest::synth_oracle(), planted_scenario());
    Fixture b(fmdtest::synth_oracle(), planted_scenario());
    SearchConfig cfg;
    cfg.seed = 3;
    cfg.beam_budget = cfg.budget;
    CHECK(run_gpts(cfg, a.problem, a.evaluator) == run_beam(cfg, b.problem, b.evaluator));
  }

  TEST_CASE("default gpts split and pure thompson") {
    Fixture f(fmdtest::synth_oracle(), planted_scenario());
    SearchConfig cfg;
    cfg.pool_size = 64;
    const auto r = run_gpts(cfg, f.problem, f.evaluator);
    const auto beam = std::count_if(r.trace.begin(), r.trace.end(), [](const TraceEntry& t) { return t.phase == "beam"; });
    const auto ts =
        std::count_if(r.trace.begin(), r.trace.end(), [](const TraceEntry& t) { return t.phase == "thompson"; });
    CHECK(beam == 100);
    CHECK(ts == 100);
    check_budget_invariants(r, cfg);

    cfg.beam_budget = 0;
    cfg.budget = 100;
    Fixture g(fmdtest::synth_oracle(), planted_scenario());
    const auto p = run_gpts(cfg, g.problem, g.evaluator);
    CHECK(p.all_candidates.size() == 20);
    CHECK(std::all_of(p.trace.begin(), p.trace.end(), [](const TraceEntry& t) { return t.phase == "thompson"; }));
  }

  TEST_CASE("thompson proposals") {
    auto o = fmdtest::synth_oracle();
    Problem problem(o, 5);
    const Encoder enc(o->catalog());
    Rng pool(1), draw(2);
    const auto prior = GpModel::prior(enc.dim(), KernelSpec{});
    const auto single = propose_thompson(prior, enc, problem, {}, 1, pool, draw);
    CHECK(problem.admissible(single));

    auto solo = solo_oracle();
    Problem tiny(solo, 1);
    const Encoder enc1(solo->catalog());
    CHECK(propose_thompson(GpModel::prior(1, KernelSpec{}), enc1, tiny, {}, 8, pool, draw) == ConceptSet{"solo"});
    CHECK_THROWS_AS(propose_thompson(GpModel::prior(1, KernelSpec{}), enc1, tiny, {"solo"}, 8, pool, draw),
                    SpaceExhausted);
  }

  TEST_CASE("a fitted surrogate steers proposals toward a strong atom") {
    auto o = fmdtest::synth_oracle();
    Problem problem(o, 5);
    const Encoder enc(o->catalog());
    SyntheticScenario s;
    s.base = 0.05;
    s.atom_weights = {{"kite", 0.8}};

    Rng data_rng(5);
    std::vector<ConceptSet> sets;
    std::set<std::string> seen;
    while (sets.size() < 60) {
      auto x = problem.sample_set(data_rng);
      if (x && seen.insert(x->key()).second) sets.push_back(*x);
    }
    Eigen::VectorXd y(static_cast<Eigen::Index>(sets.size()));
    for (std::size_t i = 0; i < sets.size(); ++i) y[static_cast<Eigen::Index>(i)] = planted_probability(s, sets[i]);
    const auto model = GpModel::fit(enc.encode_rows(sets), y, KernelSpec{});

    int guided = 0, uniform = 0;
    Rng pool(7), draw(8), base(9);
    for (int t = 0; t < 200; ++t) {
      if (propose_thompson(model, enc, problem, seen, 32, pool, draw).contains("kite")) ++guided;
      auto u = problem.sample_set(base);
      if (u && u->contains("kite")) ++uniform;
    }
    CHECK(guided > uniform + 40);
  }

  TEST_CASE("budget and dedup invariants over randomized configs") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 12; ++t) {
      SearchConfig cfg;
      cfg.algo = static_cast<Algo>(t % 3);
      cfg.m = 1 + static_cast<int>(rng() % 6);
      cfg.budget = 20 + static_cast<long>(rng() % 300);
      cfg.beam_budget = static_cast<long>(rng() % (cfg.budget + 1));
      cfg.beam_width = 1 + static_cast<int>(rng() % 6);
      cfg.max_depth = 1 + static_cast<int>(rng() % 5);
      cfg.pool_size = 16;
      cfg.seed = rng();
      Fixture f(fmdtest::synth_oracle(), planted_scenario(), cfg.max_depth);
      check_budget_invariants(run_search(cfg, f.problem, f.evaluator), cfg);
    }
  }

  TEST_CASE("config validation") {
    SearchConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.beam_budget = cfg.budget + 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.algo = Algo::Beam;
    CHECK_NOTHROW(cfg.validate());
    cfg = SearchConfig{};
    cfg.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SearchConfig{};
    cfg.m = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(SearchConfig::from_json(SearchConfig{}.to_json()).to_json() == SearchConfig{}.to_json());
  }
}
