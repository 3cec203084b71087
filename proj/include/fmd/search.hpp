#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fmd/catalog.hpp"
#include "fmd/evaluator.hpp"
#include "fmd/gp.hpp"
#include "fmd/oracle.hpp"
#include "fmd/rng.hpp"

namespace fmd {

enum class Algo { Random, Beam, Gpts };

std::string to_string(Algo a);
Algo algo_from_string(const std::string& s);

struct SearchConfig {
  Algo algo = Algo::Gpts;
  long budget = 1000;
  int m = 5;
  int beam_width = 5;
  int max_depth = 5;
  double lambda = 0.25;
  double tau = 0.6;
  long beam_budget = 500;
  int pool_size = 256;
  KernelSpec kernel;
  bool noise_grid = false;
  std::uint64_t seed = 0;

  /// Throws ConfigError on any violated bound.
  void validate() const;
  nlohmann::json to_json() const;
  static SearchConfig from_json(const nlohmann::json& j);
};

/// One evaluated set, in evaluation order.
struct TraceEntry {
  std::string phase;  // "random" | "beam" | "thompson"
  int step = 0;       // pick index, beam level, or TS iteration
  ConceptSet set;
  int failures = 0;
  int m = 0;
  long spent = 0;  // cumulative after this entry

  nlohmann::json to_json() const;
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct SearchResult {
  std::vector<EvalRecord> all_candidates;
  std::vector<ConceptSet> failure_modes;  // canonical order
  long spent = 0;
  long unspent = 0;
  std::vector<TraceEntry> trace;
  std::vector<std::string> warnings;

  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

/// The searchable space: valid sets the oracle can label. Memoized per set key.
class Problem {
 public:
  Problem(std::shared_ptr<const Oracle> oracle, int max_depth);

  const Oracle& oracle() const { return *oracle_; }
  const Catalog& catalog() const { return oracle_->catalog(); }
  int max_depth() const { return max_depth_; }

  /// check_validity passes and ground_truth does not raise.
  bool admissible(const ConceptSet& set) const;
  /// Admissible one-concept extensions in canonical order.
  const std::vector<ConceptSet>& expansions(const ConceptSet& set) const;

  /// Uniform size in 1..D, grown by uniform admissible expansions; nullopt on dead end.
  std::optional<ConceptSet> sample_set(Rng& rng) const;

 private:
  std::shared_ptr<const Oracle> oracle_;
  int max_depth_;
  std::vector<std::string> ids_;
  mutable std::unordered_map<std::string, bool> admissible_;
  mutable std::unordered_map<std::string, std::vector<ConceptSet>> expansions_;
};

/// Evaluation seed of a set; independent of the strategy that reaches it.
std::uint64_t set_seed(std::uint64_t root, const ConceptSet& set);

/// V(S) = fr - lambda * max_{F} Jaccard(S, F); zero penalty for an empty frontier.
double mmr_value(double fr, const std::vector<ConceptSet>& frontier, const ConceptSet& candidate, double lambda);

struct ScoredCandidate {
  ConceptSet set;
  double fr = 0.0;
};

/// k greedy MMR picks. Ties: higher fr, then smaller canonical key.
std::vector<ConceptSet> mmr_select(std::vector<ScoredCandidate> candidates, int k, double lambda);

std::vector<ConceptSet> classify_failure_modes(const std::vector<EvalRecord>& records, double tau);

SearchResult run_random(const SearchConfig& cfg, const Problem& problem, const Evaluator& evaluator);
SearchResult run_beam(const SearchConfig& cfg, const Problem& problem, const Evaluator& evaluator);
SearchResult run_gpts(const SearchConfig& cfg, const Problem& problem, const Evaluator& evaluator);
SearchResult run_search(const SearchConfig& cfg, const Problem& problem, const Evaluator& evaluator);

/// Pool of distinct admissible unexplored sets, one joint posterior draw, argmax.
/// Throws SpaceExhausted when no unexplored set can be drawn.
ConceptSet propose_thompson(const GpModel& model, const Encoder& encoder, const Problem& problem,
                            const std::set<std::string>& evaluated, int pool_size, Rng& pool_rng, Rng& draw_rng);

}  // namespace fmd
