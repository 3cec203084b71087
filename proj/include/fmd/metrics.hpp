#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fmd/concept_set.hpp"
#include "fmd/evaluator.hpp"

namespace fmd {

double to_double(const Rational& r);
/// "+13.6%" style rendering, rounded half away from zero.
std::string format_percent(const Rational& r, int decimals = 1, bool sign = false);

struct RunSummary {
  long records = 0;
  long failure_modes = 0;
  Rational pfm;
  Rational mfr;
  std::optional<Rational> div;  // needs at least two failure modes

  nlohmann::json to_json() const;
};

/// Mean pairwise 1 - Jaccard; nullopt for fewer than two sets.
std::optional<Rational> diversity(const std::vector<ConceptSet>& sets);

/// Failure modes are counted per record, so a set repeated across pooled runs counts per occurrence.
RunSummary summarize(const std::vector<EvalRecord>& records, double tau);

enum class Regime { Reasoning, Recognition, Mixed };
std::string to_string(Regime r);

/// R >= 0.7 Reasoning, R <= 0.3 Recognition, otherwise Mixed.
Regime classify_regime(const Rational& r);

Rational recognition_rate(const RecognitionCounts& c);

struct ConceptProfile {
  std::string id;
  long n = 0;
  Rational F;
  std::optional<Rational> R;
  std::optional<Regime> regime;
};

/// Recognition counts summed over every record's log.
RecognitionLog pooled_recognition(const std::vector<EvalRecord>& records);

/// Profiles for concepts with support >= n_min, in canonical id order.
std::vector<ConceptProfile> concept_profiles(const std::vector<EvalRecord>& records,
                                             const std::optional<RecognitionLog>& recognition, long n_min = 10);

enum class LiftBaseline { Independence, Max };

Rational independence_baseline(const Rational& fa, const Rational& fb);
Rational lift_value(const Rational& observed, const Rational& baseline);

struct LiftEntry {
  std::string a;
  std::string b;
  long n = 0;
  Rational observed;
  Rational baseline;
  Rational lift;
};

/// Pairs with joint support >= pair_n_min whose atoms both reach atom_n_min; sorted by |lift| descending.
std::vector<LiftEntry> lift_table(const std::vector<EvalRecord>& records, long atom_n_min = 10, long pair_n_min = 1,
                                  LiftBaseline baseline = LiftBaseline::Independence);

/// Average ranks for ties; nullopt when either side is constant or n < 2.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

struct TransferBucket {
  double low = 0.0;
  double high = 0.0;
  long n = 0;
  std::optional<double> mean_target_fr;
};

struct TransferReport {
  long n = 0;
  double mean_target_fr = 0.0;
  double baseline_mfr = 0.0;
  std::optional<double> multiplier;
  std::vector<TransferBucket> buckets;
  std::optional<double> spearman;

  nlohmann::json to_json() const;
};

/// source_top: source records of the transferred sets. target_records: their re-evaluation on the target.
TransferReport transfer_report(const std::vector<EvalRecord>& source_top, const std::vector<EvalRecord>& target_records,
                               double target_baseline_mfr, int bucket_count = 5);

std::string records_table(const std::vector<EvalRecord>& records);
std::string profiles_table(const std::vector<ConceptProfile>& profiles);
std::string lift_table_text(const std::vector<LiftEntry>& entries);

}  // namespace fmd
