#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmd/evaluator.hpp"
#include "fmd/metrics.hpp"
#include "fmd/oracle.hpp"
#include "fmd/search.hpp"

namespace fmd {

struct RunConfig {
  std::string domain = "driving";
  std::filesystem::path catalog;  // empty: bundled catalog for domain
  std::filesystem::path rules;    // empty: bundled rules for domain
  /// "synthetic:<scenario file>", "replay:<records log>" or "subprocess:<command>".
  std::string target;
  SearchConfig search;
  bool probe_recognition = false;
  int transport_retries = 2;
  std::filesystem::path out;

  std::filesystem::path catalog_path() const;
  std::filesystem::path rules_path() const;
  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_snapshot(const std::filesystem::path& path);
};

/// Everything one run needs, wired together. Not copyable.
struct Session {
  std::shared_ptr<const Oracle> oracle;
  std::unique_ptr<TargetModel> target;
  std::unique_ptr<Problem> problem;
  std::unique_ptr<Evaluator> evaluator;
};

std::unique_ptr<TargetModel> make_target(const std::string& spec, std::shared_ptr<const Oracle> oracle,
                                         std::uint64_t root_seed);
std::unique_ptr<Session> make_session(const RunConfig& cfg, const std::string& target_spec);
inline std::unique_ptr<Session> make_session(const RunConfig& cfg) { return make_session(cfg, cfg.target); }

/// Writes config.snapshot, trace.log, records.log, summary.*, failure_modes.*, profiles.tsv, lift.tsv.
void write_run(const std::filesystem::path& dir, const RunConfig& cfg, const SearchResult& result);

SearchResult cmd_search(const RunConfig& cfg, std::ostream& log);

/// Top records by fr; ties among equal fr shuffled with a seeded stream.
std::vector<EvalRecord> select_top(const std::vector<EvalRecord>& records, std::size_t top_n, std::uint64_t seed);

struct ValidateReport {
  std::vector<EvalRecord> source;     // selected phase-1 records
  std::vector<EvalRecord> validated;  // fresh m-sample records, same order
  double mean_fr = 0.0;
  double std_fr = 0.0;  // population
  long at_least_80 = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Re-evaluates on the recorded target unless target_override is given.
ValidateReport cmd_validate(const std::filesystem::path& run_dir, std::size_t top_n, int m, std::ostream& log,
                            const std::string& target_override = "");

struct TransferOptions {
  std::size_t top_n = 10;
  int m = 20;
  bool random_baseline = true;
  double baseline_mfr = 0.0;  // used when random_baseline is false
  std::filesystem::path out;  // empty: no files written
};

struct TransferResult {
  ValidateReport evaluated;
  RunSummary baseline;
  TransferReport report;
};

TransferResult cmd_transfer(const std::filesystem::path& source_dir, const std::string& target_spec,
                            const TransferOptions& options, std::ostream& log);

/// name -> values, e.g. {"beam_width": ["1","5","10"]}. Sub-runs form the cartesian product.
using SweepGrid = std::vector<std::pair<std::string, std::vector<std::string>>>;
SweepGrid parse_grid(const std::string& text);

struct SweepRow {
  std::map<std::string, std::string> point;
  RunSummary summary;
  long evaluated = 0;
};

std::vector<SweepRow> cmd_sweep(const RunConfig& base, const SweepGrid& grid, std::ostream& log);

}  // namespace fmd
