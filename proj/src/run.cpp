#include "fmd/run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "fmd/error.hpp"
#include "fmd/subprocess.hpp"

namespace fmd {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<std::string, std::string> split_target(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("target spec must be kind:value, got '" + spec + "'");
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

}  // namespace

// ---- RunConfig -------------------------------------------------------------

fs::path RunConfig::catalog_path() const {
  return catalog.empty() ? bundled_data_dir() / (domain + "_catalog.json") : catalog;
}

fs::path RunConfig::rules_path() const { return rules.empty() ? bundled_data_dir() / (domain + "_rules.json") : rules; }

void RunConfig::validate() const {
  search.validate();
  if (!fs::exists(catalog_path())) throw ConfigError("catalog not found: " + catalog_path().string());
  if (!fs::exists(rules_path())) throw ConfigError("rules not found: " + rules_path().string());
  if (target.empty()) throw ConfigError("no target given");
  const auto [kind, value] = split_target(target);
  if ((kind == "synthetic" || kind == "replay") && !fs::exists(value)) {
    throw ConfigError(kind + " file not found: " + value);
  }
  if (transport_retries < 0) throw ConfigError("transport retries must be >= 0");
}

nlohmann::json RunConfig::to_json() const {
  return {{"domain", domain},
          {"catalog", fs::absolute(catalog_path()).string()},
          {"rules", fs::absolute(rules_path()).string()},
          {"target", target},
          {"search", search.to_json()},
          {"probe_recognition", probe_recognition},
          {"transport_retries", transport_retries},
          {"seed_streams",
           {"random", "ts_pool", "ts_draw", "target", "synthetic", "recognition", "validate"}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.domain = j.value("domain", c.domain);
  c.catalog = j.value("catalog", std::string{});
  c.rules = j.value("rules", std::string{});
  c.target = j.value("target", std::string{});
  if (j.contains("search")) c.search = SearchConfig::from_json(j["search"]);
  c.probe_recognition = j.value("probe_recognition", false);
  c.transport_retries = j.value("transport_retries", 2);
  return c;
}

RunConfig RunConfig::from_snapshot(const fs::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config snapshot " + path.string() + ": " + e.what());
  }
}

// ---- sessions --------------------------------------------------------------

std::unique_ptr<TargetModel> make_target(const std::string& spec, std::shared_ptr<const Oracle> oracle,
                                         std::uint64_t root_seed) {
  const auto [kind, value] = split_target(spec);
  if (kind == "synthetic") {
    SyntheticScenario scenario = load_scenario_file(value);
    scenario.seed = derive_seed(derive_seed(root_seed, "synthetic"), scenario.seed, 0);
    return std::make_unique<SyntheticTarget>(std::move(scenario), std::move(oracle));
  }
  if (kind == "replay") return std::make_unique<ReplayTarget>(ReplayTarget::from_file(value));
  if (kind == "subprocess") return std::make_unique<SubprocessTarget>(value);
  throw ConfigError("unknown target kind: " + kind);
}

std::unique_ptr<Session> make_session(const RunConfig& cfg, const std::string& target_spec) {
  if (!fs::exists(cfg.catalog_path())) throw ConfigError("catalog not found: " + cfg.catalog_path().string());
  auto catalog = std::make_shared<const Catalog>(load_catalog_file(cfg.catalog_path()));
  auto oracle = std::make_shared<const Oracle>(catalog, load_rules_file(cfg.rules_path()));
  auto s = std::make_unique<Session>();
  s->oracle = oracle;
  s->target = make_target(target_spec, oracle, cfg.search.seed);
  s->problem = std::make_unique<Problem>(oracle, cfg.search.max_depth);
  EvalOptions eo;
  eo.transport_retries = cfg.transport_retries;
  eo.probe_recognition = cfg.probe_recognition;
  s->evaluator = std::make_unique<Evaluator>(oracle, *s->target, eo);
  return s;
}

// ---- search ----------------------------------------------------------------

void write_run(const fs::path& dir, const RunConfig& cfg, const SearchResult& result) {
  fs::create_directories(dir);
  write_text(dir / "config.snapshot", cfg.to_json().dump(2) + "\n");

  std::ostringstream trace;
  for (const auto& t : result.trace) trace << t.to_json().dump() << '\n';
  write_text(dir / "trace.log", trace.str());
  write_records(dir / "records.log", result.all_candidates);

  const RunSummary summary = summarize(result.all_candidates, cfg.search.tau);
  nlohmann::json sj = summary.to_json();
  sj["spent"] = result.spent;
  sj["unspent"] = result.unspent;
  sj["warnings"] = result.warnings;
  write_text(dir / "summary.json", sj.dump(2) + "\n");
  std::ostringstream st;
  st << "records\tfailure_modes\tpfm\tmfr\tdiv\tspent\n"
     << summary.records << '\t' << summary.failure_modes << '\t' << to_double(summary.pfm) << '\t'
     << to_double(summary.mfr) << '\t';
  if (summary.div) st << to_double(*summary.div);
  st << '\t' << result.spent << '\n';
  write_text(dir / "summary.tsv", st.str());

  std::map<std::string, double> fr_by_key;
  for (const auto& r : result.all_candidates) fr_by_key[r.set.key()] = r.fr();
  nlohmann::json fj = nlohmann::json::array();
  std::ostringstream ft;
  ft << "set\tfr\n";
  for (const auto& s : result.failure_modes) {
    fj.push_back({{"set", s.ids()}, {"fr", fr_by_key[s.key()]}});
    ft << s.key() << '\t' << fr_by_key[s.key()] << '\n';
  }
  write_text(dir / "failure_modes.json", fj.dump(2) + "\n");
  write_text(dir / "failure_modes.tsv", ft.str());

  std::optional<RecognitionLog> rec;
  if (cfg.probe_recognition) rec = pooled_recognition(result.all_candidates);
  write_text(dir / "profiles.tsv", profiles_table(concept_profiles(result.all_candidates, rec)));
  write_text(dir / "lift.tsv", lift_table_text(lift_table(result.all_candidates)));
}

SearchResult cmd_search(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  auto session = make_session(cfg);
  SearchResult result = run_search(cfg.search, *session->problem, *session->evaluator);
  for (const auto& w : result.warnings) log << "warning: " << w << '\n';
  if (!cfg.out.empty()) write_run(cfg.out, cfg, result);
  const RunSummary s = summarize(result.all_candidates, cfg.search.tau);
  log << to_string(cfg.search.algo) << ": " << result.all_candidates.size() << " sets, " << s.failure_modes
      << " failure modes, spent " << result.spent << "/" << cfg.search.budget << '\n';
  return result;
}

// ---- validate --------------------------------------------------------------

std::vector<EvalRecord> select_top(const std::vector<EvalRecord>& records, std::size_t top_n, std::uint64_t seed) {
  std::vector<EvalRecord> sorted = records;
  std::sort(sorted.begin(), sorted.end(), [](const EvalRecord& a, const EvalRecord& b) {
    if (a.fr_exact() != b.fr_exact()) return a.fr_exact() > b.fr_exact();
    return a.set.key() < b.set.key();
  });
  Rng rng(derive_seed(seed, "validate"));
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].fr_exact() == sorted[i].fr_exact()) ++j;
    std::shuffle(sorted.begin() + static_cast<std::ptrdiff_t>(i), sorted.begin() + static_cast<std::ptrdiff_t>(j), rng);
    i = j;
  }
  if (sorted.size() > top_n) sorted.resize(top_n);
  return sorted;
}

nlohmann::json ValidateReport::to_json() const {
  nlohmann::json sets = nlohmann::json::array();
  for (std::size_t i = 0; i < validated.size(); ++i) {
    sets.push_back({{"set", validated[i].set.ids()}, {"source_fr", source[i].fr()}, {"validated_fr", validated[i].fr()}});
  }
  return {{"n", validated.size()}, {"mean_fr", mean_fr},   {"std_fr", std_fr},
          {"at_least_80", at_least_80}, {"sets", sets}, {"warnings", warnings}};
}

namespace {

ValidateReport revalidate(const RunConfig& cfg, Session& session, const std::vector<EvalRecord>& records,
                          std::size_t top_n, int m, std::ostream& log) {
  ValidateReport rep;
  if (records.size() < top_n) {
    rep.warnings.push_back("only " + std::to_string(records.size()) + " candidates; validating all");
    log << "warning: " << rep.warnings.back() << '\n';
  }
  rep.source = select_top(records, top_n, cfg.search.seed);
  BudgetLedger ledger(static_cast<long>(rep.source.size()) * m);
  const std::uint64_t root = derive_seed(cfg.search.seed, "validate");
  for (const auto& r : rep.source) {
    rep.validated.push_back(session.evaluator->evaluate(r.set, m, ledger, set_seed(root, r.set), "validate"));
  }
  if (!rep.validated.empty()) {
    double sum = 0.0;
    for (const auto& v : rep.validated) {
      sum += v.fr();
      if (v.fr_exact() >= Rational(4, 5)) ++rep.at_least_80;
    }
    rep.mean_fr = sum / static_cast<double>(rep.validated.size());
    double ss = 0.0;
    for (const auto& v : rep.validated) ss += (v.fr() - rep.mean_fr) * (v.fr() - rep.mean_fr);
    rep.std_fr = std::sqrt(ss / static_cast<double>(rep.validated.size()));
  }
  return rep;
}

}  // namespace

ValidateReport cmd_validate(const fs::path& run_dir, std::size_t top_n, int m, std::ostream& log,
                            const std::string& target_override) {
  if (m < 1) throw ConfigError("samples per set must be >= 1");
  const RunConfig cfg = RunConfig::from_snapshot(run_dir / "config.snapshot");
  const auto records = read_records(run_dir / "records.log");
  auto session = make_session(cfg, target_override.empty() ? cfg.target : target_override);
  ValidateReport rep = revalidate(cfg, *session, records, top_n, m, log);

  write_text(run_dir / "validate.json", rep.to_json().dump(2) + "\n");
  write_records(run_dir / "validate_records.log", rep.validated);
  std::ostringstream t;
  t << "n\tmean_fr\tstd_fr\tat_least_80\n"
    << rep.validated.size() << '\t' << rep.mean_fr << '\t' << rep.std_fr << '\t' << rep.at_least_80 << '\n';
  write_text(run_dir / "validate.tsv", t.str());
  log << "validated " << rep.validated.size() << " sets: mean fr " << rep.mean_fr * 100 << "% +- "
      << rep.std_fr * 100 << "%, " << rep.at_least_80 << "/" << rep.validated.size() << " at >= 80%\n";
  return rep;
}

// ---- transfer --------------------------------------------------------------

TransferResult cmd_transfer(const fs::path& source_dir, const std::string& target_spec, const TransferOptions& options,
                            std::ostream& log) {
  if (options.m < 1) throw ConfigError("samples per set must be >= 1");
  const RunConfig cfg = RunConfig::from_snapshot(source_dir / "config.snapshot");
  const auto records = read_records(source_dir / "records.log");
  auto session = make_session(cfg, target_spec);

  TransferResult out;
  out.evaluated = revalidate(cfg, *session, records, options.top_n, options.m, log);

  double baseline_mfr = options.baseline_mfr;
  if (options.random_baseline) {
    SearchConfig rc = cfg.search;
    rc.algo = Algo::Random;
    rc.budget = 200L * rc.m;
    rc.beam_budget = 0;
    const SearchResult base = run_random(rc, *session->problem, *session->evaluator);
    out.baseline = summarize(base.all_candidates, rc.tau);
    baseline_mfr = to_double(out.baseline.mfr);
  }
  out.report = transfer_report(out.evaluated.source, out.evaluated.validated, baseline_mfr);

  if (!options.out.empty()) {
    fs::create_directories(options.out);
    nlohmann::json j = out.report.to_json();
    j["source"] = fs::absolute(source_dir).string();
    j["target"] = target_spec;
    j["sets"] = out.evaluated.to_json()["sets"];
    write_text(options.out / "transfer.json", j.dump(2) + "\n");
    write_records(options.out / "transfer_records.log", out.evaluated.validated);
  }
  log << "transfer: mean target fr " << out.report.mean_target_fr * 100 << "%, baseline mfr " << baseline_mfr * 100
      << "%";
  if (out.report.multiplier) log << ", multiplier " << *out.report.multiplier << "x";
  log << '\n';
  return out;
}

// ---- sweep -----------------------------------------------------------------

SweepGrid parse_grid(const std::string& text) {
  SweepGrid grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("grid entry must be name=v1,v2: " + item);
    std::vector<std::string> values;
    std::stringstream vs(item.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw ConfigError("grid entry without values: " + item);
    grid.emplace_back(item.substr(0, eq), std::move(values));
  }
  if (grid.empty()) throw ConfigError("empty parameter grid");
  return grid;
}

namespace {

void apply_param(SearchConfig& c, const std::string& name, const std::string& value) {
  try {
    if (name == "beam_width") c.beam_width = std::stoi(value);
    else if (name == "beam_budget") c.beam_budget = std::stol(value);
    else if (name == "samples" || name == "m") c.m = std::stoi(value);
    else if (name == "tau") c.tau = std::stod(value);
    else if (name == "lambda") c.lambda = std::stod(value);
    else if (name == "max_depth") c.max_depth = std::stoi(value);
    else if (name == "pool_size") c.pool_size = std::stoi(value);
    else if (name == "budget") c.budget = std::stol(value);
    else if (name == "noise") c.kernel.noise_variance = std::stod(value);
    else if (name == "kernel") c.kernel.family = kernel_family_from_string(value);
    else if (name == "algo") c.algo = algo_from_string(value);
    else if (name == "seed") c.seed = std::stoull(value);
    else throw ConfigError("unknown sweep parameter: " + name);
  } catch (const std::logic_error&) {
    throw ConfigError("bad value for " + name + ": " + value);
  }
}

bool next_point(const SweepGrid& grid, std::vector<std::size_t>& idx) {
  for (std::size_t g = grid.size(); g-- > 0;) {
    if (++idx[g] < grid[g].second.size()) return true;
    idx[g] = 0;
  }
  return false;
}

}  // namespace

std::vector<SweepRow> cmd_sweep(const RunConfig& base, const SweepGrid& grid, std::ostream& log) {
  if (grid.empty()) throw ConfigError("empty parameter grid");
  std::vector<SweepRow> rows;
  std::vector<std::size_t> idx(grid.size(), 0);
  while (true) {
    RunConfig cfg = base;
    SweepRow row;
    std::string name;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto& value = grid[g].second[idx[g]];
      apply_param(cfg.search, grid[g].first, value);
      row.point[grid[g].first] = value;
      name += (name.empty() ? "" : "_") + grid[g].first + "-" + value;
    }
    cfg.out = base.out.empty() ? fs::path{} : base.out / name;
    cfg.validate();
    auto session = make_session(cfg);
    const SearchResult result = run_search(cfg.search, *session->problem, *session->evaluator);
    if (!cfg.out.empty()) write_run(cfg.out, cfg, result);
    row.summary = summarize(result.all_candidates, cfg.search.tau);
    row.evaluated = static_cast<long>(result.all_candidates.size());
    log << name << ": " << row.evaluated << " sets, " << row.summary.failure_modes << " failure modes\n";
    rows.push_back(std::move(row));

    if (!next_point(grid, idx)) break;
  }

  if (!base.out.empty()) {
    fs::create_directories(base.out);
    std::ostringstream t;
    for (const auto& [k, _] : grid) t << k << '\t';
    t << "evaluated\tfailure_modes\tpfm\tmfr\tdiv\n";
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
      for (const auto& [k, _] : grid) t << r.point.at(k) << '\t';
      t << r.evaluated << '\t' << r.summary.failure_modes << '\t' << to_double(r.summary.pfm) << '\t'
        << to_double(r.summary.mfr) << '\t';
      if (r.summary.div) t << to_double(*r.summary.div);
      t << '\n';
      nlohmann::json e = r.summary.to_json();
      e["point"] = r.point;
      e["evaluated"] = r.evaluated;
      j.push_back(e);
    }
    write_text(base.out / "sweep.tsv", t.str());
    write_text(base.out / "sweep.json", j.dump(2) + "\n");
  }
  return rows;
}

}  // namespace fmd
