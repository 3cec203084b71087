#include "fmd/search.hpp"

#include <algorithm>
#include <random>

#include "fmd/error.hpp"

namespace fmd {

std::string to_string(Algo a) {
  switch (a) {
    case Algo::Random: return "random";
    case Algo::Beam: return "beam";
    case Algo::Gpts: return "gpts";
  }
  return "?";
}

Algo algo_from_string(const std::string& s) {
  if (s == "random") return Algo::Random;
  if (s == "beam" || s == "bs") return Algo::Beam;
  if (s == "gpts") return Algo::Gpts;
  throw ConfigError("unknown algorithm: " + s);
}

void SearchConfig::validate() const {
  if (m < 1) throw ConfigError("samples per set must be >= 1");
  if (budget < 0) throw ConfigError("budget must be >= 0");
  if (algo == Algo::Gpts && (beam_budget < 0 || beam_budget > budget)) throw ConfigError("beam budget must lie in [0, budget]");
  if (beam_width < 1) throw ConfigError("beam width must be >= 1");
  if (max_depth < 1) throw ConfigError("max depth must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (pool_size < 1) throw ConfigError("pool size must be >= 1");
  if (!(kernel.noise_variance > 0.0)) throw ConfigError("noise variance must be > 0");
  if (!(kernel.rbf_lengthscale > 0.0)) throw ConfigError("rbf lengthscale must be > 0");
}

nlohmann::json SearchConfig::to_json() const {
  return {{"algo", to_string(algo)},
          {"budget", budget},
          {"samples", m},
          {"beam_width", beam_width},
          {"max_depth", max_depth},
          {"lambda", lambda},
          {"tau", tau},
          {"beam_budget", beam_budget},
          {"pool_size", pool_size},
          {"kernel", to_string(kernel.family)},
          {"noise", kernel.noise_variance},
          {"rbf_lengthscale", kernel.rbf_lengthscale},
          {"noise_grid", noise_grid},
          {"seed", seed}};
}

SearchConfig SearchConfig::from_json(const nlohmann::json& j) {
  SearchConfig c;
  c.algo = algo_from_string(j.value("algo", to_string(c.algo)));
  c.budget = j.value("budget", c.budget);
  c.m = j.value("samples", c.m);
  c.beam_width = j.value("beam_width", c.beam_width);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.lambda = j.value("lambda", c.lambda);
  c.tau = j.value("tau", c.tau);
  c.beam_budget = j.value("beam_budget", c.beam_budget);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.kernel.family = kernel_family_from_string(j.value("kernel", to_string(c.kernel.family)));
  c.kernel.noise_variance = j.value("noise", c.kernel.noise_variance);
  c.kernel.rbf_lengthscale = j.value("rbf_lengthscale", c.kernel.rbf_lengthscale);
  c.noise_grid = j.value("noise_grid", c.noise_grid);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json TraceEntry::to_json() const {
  return {{"phase", phase}, {"step", step},   {"set", set.ids()},
          {"fr", static_cast<double>(failures) / m}, {"failures", failures}, {"m", m},
          {"spent", spent}};
}

// ---- Problem ---------------------------------------------------------------

Problem::Problem(std::shared_ptr<const Oracle> oracle, int max_depth)
    : oracle_(std::move(oracle)), max_depth_(max_depth), ids_(oracle_->catalog().ids()) {}

bool Problem::admissible(const ConceptSet& set) const {
  const std::string key = set.key();
  if (auto it = admissible_.find(key); it != admissible_.end()) return it->second;
  std::optional<Anchor> anchor;
  bool ok = check_validity(catalog(), set, max_depth_, anchor).valid();
  if (ok) {
    try {
      oracle_->ground_truth(set, *anchor);
    } catch (const UnmatchableError&) {
      ok = false;
    }
  }
  admissible_.emplace(key, ok);
  return ok;
}

const std::vector<ConceptSet>& Problem::expansions(const ConceptSet& set) const {
  const std::string key = set.key();
  if (auto it = expansions_.find(key); it != expansions_.end()) return it->second;
  std::vector<ConceptSet> out;
  if (static_cast<int>(set.size()) < max_depth_) {
    for (const auto& id : catalog().ids()) {
      if (set.contains(id)) continue;
      ConceptSet next = set.with(id);
      if (admissible(next)) out.push_back(std::move(next));
    }
    std::sort(out.begin(), out.end());
  }
  return expansions_.emplace(key, std::move(out)).first->second;
}

std::optional<ConceptSet> Problem::sample_set(Rng& rng) const {
  std::uniform_int_distribution<int> size_dist(1, max_depth_);
  const int target = size_dist(rng);
  // First admissible id of a uniform shuffle: a uniform pick among admissible expansions.
  const auto& ids = ids_;
  ConceptSet cur;
  while (static_cast<int>(cur.size()) < target) {
    std::vector<const std::string*> order;
    for (const auto& id : ids) {
      if (!cur.contains(id)) order.push_back(&id);
    }
    std::shuffle(order.begin(), order.end(), rng);
    bool grown = false;
    for (const auto* id : order) {
      ConceptSet next = cur.with(*id);
      if (admissible(next)) {
        cur = std::move(next);
        grown = true;
        break;
      }
    }
    if (!grown) return std::nullopt;
  }
  return cur;
}

std::uint64_t set_seed(std::uint64_t root, const ConceptSet& set) {
  return derive_seed(derive_seed(root, "target"), hash_string(set.key()), 0);
}

// ---- MMR -------------------------------------------------------------------

double mmr_value(double fr, const std::vector<ConceptSet>& frontier, const ConceptSet& candidate, double lambda) {
  double max_sim = 0.0;
  for (const auto& f : frontier) max_sim = std::max(max_sim, jaccard(candidate, f));
  return fr - lambda * max_sim;
}

std::vector<ConceptSet> mmr_select(std::vector<ScoredCandidate> candidates, int k, double lambda) {
  std::vector<ConceptSet> frontier;
  while (static_cast<int>(frontier.size()) < k && !candidates.empty()) {
    std::size_t best = 0;
    double best_v = mmr_value(candidates[0].fr, frontier, candidates[0].set, lambda);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      const double v = mmr_value(candidates[i].fr, frontier, candidates[i].set, lambda);
      const auto& c = candidates[i];
      const auto& b = candidates[best];
      if (v > best_v || (v == best_v && (c.fr > b.fr || (c.fr == b.fr && c.set.key() < b.set.key())))) {
        best = i;
        best_v = v;
      }
    }
    frontier.push_back(candidates[best].set);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return frontier;
}

std::vector<ConceptSet> classify_failure_modes(const std::vector<EvalRecord>& records, double tau) {
  std::set<ConceptSet> out;
  for (const auto& r : records) {
    if (r.fr() >= tau) out.insert(r.set);
  }
  return {out.begin(), out.end()};
}

// ---- runs ------------------------------------------------------------------

namespace {

class Run {
 public:
  Run(const SearchConfig& cfg, const Evaluator& evaluator) : cfg_(cfg), evaluator_(evaluator), ledger_(cfg.budget) {
    cfg.validate();
  }

  bool can_afford() const { return ledger_.can_afford(cfg_.m); }
  bool seen(const ConceptSet& s) const { return index_.count(s.key()) != 0; }
  const std::set<std::string>& evaluated() const { return evaluated_; }
  const std::vector<EvalRecord>& records() const { return result_.all_candidates; }

  double fr_of(const ConceptSet& s) const { return result_.all_candidates[index_.at(s.key())].fr(); }

  const EvalRecord& evaluate(const ConceptSet& set, const std::string& phase, int step) {
    EvalRecord rec = evaluator_.evaluate(set, cfg_.m, ledger_, set_seed(cfg_.seed, set), phase);
    result_.trace.push_back(TraceEntry{phase, step, set, rec.failures, rec.m, ledger_.spent()});
    index_[set.key()] = result_.all_candidates.size();
    evaluated_.insert(set.key());
    result_.all_candidates.push_back(std::move(rec));
    return result_.all_candidates.back();
  }

  void warn(std::string w) { result_.warnings.push_back(std::move(w)); }

  SearchResult finish() {
    result_.failure_modes = classify_failure_modes(result_.all_candidates, cfg_.tau);
    result_.spent = ledger_.spent();
    result_.unspent = ledger_.remaining();
    if (result_.unspent >= cfg_.m) {
      warn(std::to_string(result_.unspent) + " inferences left unspent");
    } else if (result_.unspent > 0) {
      warn("budget " + std::to_string(cfg_.budget) + " is not a multiple of m; remainder left unspent");
    }
    return std::move(result_);
  }

 private:
  const SearchConfig& cfg_;
  const Evaluator& evaluator_;
  BudgetLedger ledger_;
  SearchResult result_;
  std::map<std::string, std::size_t> index_;
  std::set<std::string> evaluated_;
};

constexpr int kMaxFailedDraws = 10000;

void beam_phase(const SearchConfig& cfg, const Problem& problem, Run& run, long max_sets) {
  long done = 0;
  if (max_sets <= 0) return;
  std::vector<ConceptSet> frontier{ConceptSet{}};
  for (int level = 1; level <= cfg.max_depth; ++level) {
    std::vector<ScoredCandidate> candidates;
    std::set<std::string> in_level;
    for (const auto& parent : frontier) {
      for (const auto& child : problem.expansions(parent)) {
        if (!in_level.insert(child.key()).second) continue;
        if (!run.seen(child)) {
          if (!run.can_afford()) return;
          run.evaluate(child, "beam", level);
          ++done;
        }
        candidates.push_back({child, run.fr_of(child)});
        if (done >= max_sets) return;
      }
    }
    if (candidates.empty()) return;
    frontier = mmr_select(std::move(candidates), cfg.beam_width, cfg.lambda);
  }
}

void thompson_phase(const SearchConfig& cfg, const Problem& problem, Run& run, long max_iterations) {
  const Encoder encoder(problem.catalog());
  Rng pool_rng(derive_seed(cfg.seed, "ts_pool"));
  Rng draw_rng(derive_seed(cfg.seed, "ts_draw"));
  int iteration = 0;
  while (iteration < max_iterations && run.can_afford()) {
    ++iteration;
    const auto& recs = run.records();
    std::optional<GpModel> model;
    if (recs.empty()) {
      model = GpModel::prior(encoder.dim(), cfg.kernel);
    } else {
      std::vector<ConceptSet> sets;
      Eigen::VectorXd y(static_cast<Eigen::Index>(recs.size()));
      for (std::size_t i = 0; i < recs.size(); ++i) {
        sets.push_back(recs[i].set);
        y[static_cast<Eigen::Index>(i)] = recs[i].fr();
      }
      Eigen::MatrixXd x = encoder.encode_rows(sets);
      model = cfg.noise_grid ? fit_with_noise_grid(x, y, cfg.kernel) : GpModel::fit(std::move(x), std::move(y), cfg.kernel);
    }
    ConceptSet next;
    try {
      next = propose_thompson(*model, encoder, problem, run.evaluated(), cfg.pool_size, pool_rng, draw_rng);
    } catch (const SpaceExhausted& e) {
      run.warn(std::string(e.what()) + "; remaining budget unused");
      return;
    }
    run.evaluate(next, "thompson", iteration);
  }
}

}  // namespace

ConceptSet propose_thompson(const GpModel& model, const Encoder& encoder, const Problem& problem,
                            const std::set<std::string>& evaluated, int pool_size, Rng& pool_rng, Rng& draw_rng) {
  std::vector<ConceptSet> pool;
  std::set<std::string> keys;
  const int max_attempts = 20 * pool_size + 1000;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(pool.size()) < pool_size; ++attempt) {
    auto s = problem.sample_set(pool_rng);
    if (!s) continue;
    const std::string key = s->key();
    if (evaluated.count(key) || keys.count(key)) continue;
    keys.insert(key);
    pool.push_back(std::move(*s));
  }
  if (pool.empty()) throw SpaceExhausted("search space exhausted: no unexplored admissible set");

  const Eigen::VectorXd draw = model.sample_posterior(encoder.encode_rows(pool), draw_rng);
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    const auto v = draw[static_cast<Eigen::Index>(i)];
    const auto b = draw[static_cast<Eigen::Index>(best)];
    if (v > b || (v == b && pool[i].key() < pool[best].key())) best = i;
  }
  return pool[best];
}

SearchResult run_random(const SearchConfig& cfg, const Problem& problem, const Evaluator& evaluator) {
  Run run(cfg, evaluator);
  Rng rng(derive_seed(cfg.seed, "random"));
  int pick = 0;
  int failed = 0;
  while (run.can_afford()) {
    auto s = problem.sample_set(rng);
    if (!s || run.seen(*s)) {
      if (++failed >= kMaxFailedDraws) {
        run.warn("search space exhausted after " + std::to_string(pick) + " sets; remaining budget unused");
        break;
      }
      continue;
    }
    failed = 0;
    run.evaluate(*s, "random", ++pick);
  }
  return run.finish();
}

SearchResult run_beam(const SearchConfig& cfg, const Problem& problem, const Evaluator& evaluator) {
  Run run(cfg, evaluator);
  beam_phase(cfg, problem, run, cfg.budget / cfg.m);
  return run.finish();
}

SearchResult run_gpts(const SearchConfig& cfg, const Problem& problem, const Evaluator& evaluator) {
  Run run(cfg, evaluator);
  beam_phase(cfg, problem, run, cfg.beam_budget / cfg.m);
  thompson_phase(cfg, problem, run, (cfg.budget - cfg.beam_budget) / cfg.m);
  return run.finish();
}

SearchResult run_search(const SearchConfig& cfg, const Problem& problem, const Evaluator& evaluator) {
  switch (cfg.algo) {
    case Algo::Random: return run_random(cfg, problem, evaluator);
    case Algo::Beam: return run_beam(cfg, problem, evaluator);
    case Algo::Gpts: return run_gpts(cfg, problem, evaluator);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace fmd
