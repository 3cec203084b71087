#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fmd/concept_set.hpp"
#include "fmd/oracle.hpp"

namespace fmd {

/// Parsed value for answers that name none of the offered options.
inline const std::string kRefusal = "REFUSAL";

/// One request to the model under test.
struct Query {
  ConceptSet set;
  std::string question;  // full prompt including the option lines
  std::vector<AnswerOption> options;
  std::string scene_description;
  nlohmann::json scene_graph;
  std::uint64_t seed = 0;
  std::size_t sample_index = 0;
};

/// Outcome of one true/false statement pair about a concept.
struct RecognitionProbe {
  bool positive_correct = false;
  bool negative_correct = false;
};

struct RecognitionCounts {
  long pos_correct = 0;
  long pos_total = 0;
  long neg_correct = 0;
  long neg_total = 0;
  RecognitionCounts& operator+=(const RecognitionCounts& o);
  friend bool operator==(const RecognitionCounts&, const RecognitionCounts&) = default;
};

using RecognitionLog = std::map<std::string, RecognitionCounts>;

/// The decision model under test. Implementations return the raw answer text and
/// throw TransportError when the model could not be reached.
class TargetModel {
 public:
  virtual ~TargetModel() = default;
  virtual std::string ask(const Query& query) = 0;
  /// Statement-pair perception probe; targets without one return nullopt.
  virtual std::optional<RecognitionProbe> probe(const std::string& concept_id, const Query& query);
};

/// Case-insensitive match of a leading option letter, or of the full option text.
std::string parse_choice(const std::string& raw, const std::vector<AnswerOption>& options);

struct EvalRecord {
  ConceptSet set;
  int m = 0;
  int failures = 0;
  std::vector<std::string> answers;  // raw text as returned
  std::vector<std::string> parsed;   // option label or kRefusal
  std::vector<bool> errors;          // transport failure after retries
  std::string expected;
  std::uint64_t seed = 0;
  int budget_cost = 0;
  std::string phase;
  RecognitionLog recognition;

  Rational fr_exact() const { return Rational(failures, m); }
  double fr() const { return static_cast<double>(failures) / static_cast<double>(m); }

  nlohmann::json to_json() const;
  static EvalRecord from_json(const nlohmann::json& j);

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// Global inference budget. reserve() is the single synchronization point.
class BudgetLedger {
 public:
  explicit BudgetLedger(long total);

  /// Reserves m inferences or throws BudgetExhausted without changing state.
  void reserve(long m, const std::string& phase);
  bool can_afford(long m) const;

  long total() const { return total_; }
  long spent() const;
  long remaining() const;
  std::map<std::string, long> by_phase() const;

 private:
  long total_;
  mutable std::mutex mu_;
  long spent_ = 0;
  std::map<std::string, long> phases_;
};

struct EvalOptions {
  int transport_retries = 2;
  bool probe_recognition = false;
};

/// Draws m answers for one concept set and scores them against the oracle.
class Evaluator {
 public:
  Evaluator(std::shared_ptr<const Oracle> oracle, TargetModel& target, EvalOptions options = {});

  const Oracle& oracle() const { return *oracle_; }

  /// Samples use seeds seed+0 .. seed+m-1. Refusals and transport failures count as failures.
  /// Oracle errors are raised before any budget is reserved.
  EvalRecord evaluate(const ConceptSet& set, int m, BudgetLedger& ledger, std::uint64_t seed,
                      const std::string& phase = "eval") const;

 private:
  std::shared_ptr<const Oracle> oracle_;
  TargetModel* target_;
  EvalOptions options_;
};

// ---- synthetic target -------------------------------------------------------

struct SyntheticScenario {
  double base = 0.05;
  std::map<std::string, double> atom_weights;
  std::map<std::pair<std::string, std::string>, double> pair_weights;  // key ordered (a < b)
  std::map<std::string, double> visibility;  // P(correct statement); default 1
  std::uint64_t seed = 0;

  void set_pair(const std::string& a, const std::string& b, double w);
  nlohmann::json to_json() const;
  static SyntheticScenario from_json(const nlohmann::json& j);
};

SyntheticScenario load_scenario_file(const std::filesystem::path& path);

/// clamp(base + atom terms + pair terms, 0, 1).
double planted_probability(const SyntheticScenario& scenario, const ConceptSet& set);

/// Answers the expected option with probability 1-p and a uniformly chosen wrong
/// option with probability p, where p is the planted probability of the set.
class SyntheticTarget : public TargetModel {
 public:
  SyntheticTarget(SyntheticScenario scenario, std::shared_ptr<const Oracle> oracle);
  std::string ask(const Query& query) override;
  std::optional<RecognitionProbe> probe(const std::string& concept_id, const Query& query) override;
  const SyntheticScenario& scenario() const { return scenario_; }

 private:
  SyntheticScenario scenario_;
  std::shared_ptr<const Oracle> oracle_;
};

/// Answers keyed by (set, sample index), read from EvalRecord log lines.
class ReplayTarget : public TargetModel {
 public:
  explicit ReplayTarget(const std::vector<EvalRecord>& records);
  static ReplayTarget from_file(const std::filesystem::path& path);
  std::string ask(const Query& query) override;

 private:
  std::map<std::string, std::vector<std::string>> answers_;
};

std::vector<EvalRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records);

}  // namespace fmd
