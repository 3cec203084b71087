#include "fmd/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>

#include "fmd/error.hpp"
#include "fmd/rng.hpp"
#include "fmd/scene.hpp"

namespace fmd {

RecognitionCounts& RecognitionCounts::operator+=(const RecognitionCounts& o) {
  pos_correct += o.pos_correct;
  pos_total += o.pos_total;
  neg_correct += o.neg_correct;
  neg_total += o.neg_total;
  return *this;
}

std::optional<RecognitionProbe> TargetModel::probe(const std::string&, const Query&) {
  return std::nullopt;
}

namespace {

std::string lower_trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
  return out;
}

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string parse_choice(const std::string& raw, const std::vector<AnswerOption>& options) {
  const std::string text = lower_trim(raw);
  if (text.empty()) return kRefusal;

  // Leading letter: "b", "b.", "(b) ...", "b) ...", "b: ...".
  std::size_t i = 0;
  if (text[i] == '(' || text[i] == '[') ++i;
  if (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
    const bool boundary = i + 1 == text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 1]));
    if (boundary) {
      for (const auto& o : options) {
        if (lower(o.label) == std::string(1, text[i])) return o.label;
      }
    }
  }
  for (const auto& o : options) {
    if (!o.text.empty() && text == lower_trim(o.text)) return o.label;
  }
  return kRefusal;
}

// ---- EvalRecord ------------------------------------------------------------

nlohmann::json EvalRecord::to_json() const {
  nlohmann::json j;
  j["set"] = set.ids();
  j["m"] = m;
  j["failures"] = failures;
  j["fr"] = fr();
  j["answers"] = answers;
  j["parsed"] = parsed;
  j["errors"] = errors;
  j["expected"] = expected;
  j["seed"] = seed;
  j["budget_cost"] = budget_cost;
  j["phase"] = phase;
  if (!recognition.empty()) {
    nlohmann::json rec = nlohmann::json::object();
    for (const auto& [id, c] : recognition) {
      rec[id] = {{"pos_correct", c.pos_correct}, {"pos_total", c.pos_total},
                 {"neg_correct", c.neg_correct}, {"neg_total", c.neg_total}};
    }
    j["recognition"] = rec;
  }
  return j;
}

EvalRecord EvalRecord::from_json(const nlohmann::json& j) {
  EvalRecord r;
  r.set = ConceptSet(j.at("set").get<std::vector<std::string>>());
  r.m = j.at("m").get<int>();
  r.failures = j.at("failures").get<int>();
  r.answers = j.value("answers", std::vector<std::string>{});
  r.parsed = j.value("parsed", std::vector<std::string>{});
  r.errors = j.value("errors", std::vector<bool>{});
  r.expected = j.value("expected", std::string{});
  r.seed = j.value("seed", std::uint64_t{0});
  r.budget_cost = j.value("budget_cost", r.m);
  r.phase = j.value("phase", std::string{});
  if (j.contains("recognition")) {
    for (const auto& [id, c] : j["recognition"].items()) {
      r.recognition[id] = RecognitionCounts{c.at("pos_correct").get<long>(), c.at("pos_total").get<long>(),
                                            c.at("neg_correct").get<long>(), c.at("neg_total").get<long>()};
    }
  }
  if (r.m < 1 || r.failures < 0 || r.failures > r.m) throw Error("malformed record for " + r.set.key());
  return r;
}

std::vector<EvalRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read records: " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(EvalRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("bad record line in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write records: " + path.string());
  for (const auto& r : records) out << r.to_json().dump() << '\n';
}

// ---- BudgetLedger ----------------------------------------------------------

BudgetLedger::BudgetLedger(long total) : total_(total) {
  if (total < 0) throw ConfigError("negative budget");
}

void BudgetLedger::reserve(long m, const std::string& phase) {
  std::lock_guard lock(mu_);
  if (m < 0) throw ConfigError("negative reservation");
  if (spent_ + m > total_) {
    throw BudgetExhausted("budget exhausted: " + std::to_string(total_ - spent_) + " remaining, " +
                          std::to_string(m) + " requested");
  }
  spent_ += m;
  phases_[phase] += m;
}

bool BudgetLedger::can_afford(long m) const {
  std::lock_guard lock(mu_);
  return spent_ + m <= total_;
}

long BudgetLedger::spent() const {
  std::lock_guard lock(mu_);
  return spent_;
}

long BudgetLedger::remaining() const {
  std::lock_guard lock(mu_);
  return total_ - spent_;
}

std::map<std::string, long> BudgetLedger::by_phase() const {
  std::lock_guard lock(mu_);
  return phases_;
}

// ---- Evaluator -------------------------------------------------------------

Evaluator::Evaluator(std::shared_ptr<const Oracle> oracle, TargetModel& target, EvalOptions options)
    : oracle_(std::move(oracle)), target_(&target), options_(options) {}

EvalRecord Evaluator::evaluate(const ConceptSet& set, int m, BudgetLedger& ledger, std::uint64_t seed,
                               const std::string& phase) const {
  if (m < 1) throw ConfigError("samples per set must be >= 1");
  const ExpectedAnswer expected = oracle_->ground_truth(set);
  const Anchor anchor = build_anchor(oracle_->catalog(), set);

  ledger.reserve(m, phase);

  Query q;
  q.set = set;
  q.question = expected.question_text;
  q.options = expected.options;
  q.scene_description = describe(oracle_->catalog(), anchor.composition);
  q.scene_graph = anchor.graph.to_json();

  EvalRecord rec;
  rec.set = set;
  rec.m = m;
  rec.expected = expected.label;
  rec.seed = seed;
  rec.budget_cost = m;
  rec.phase = phase;

  for (int i = 0; i < m; ++i) {
    q.seed = seed + static_cast<std::uint64_t>(i);
    q.sample_index = static_cast<std::size_t>(i);
    std::string raw;
    bool ok = false;
    for (int attempt = 0; attempt <= options_.transport_retries && !ok; ++attempt) {
      try {
        raw = target_->ask(q);
        ok = true;
      } catch (const TransportError&) {
      }
    }
    const std::string parsed = ok ? parse_choice(raw, q.options) : kRefusal;
    rec.answers.push_back(ok ? raw : std::string{});
    rec.parsed.push_back(parsed);
    rec.errors.push_back(!ok);
    if (parsed != expected.label) ++rec.failures;

    if (options_.probe_recognition) {
      for (const auto& id : set) {
        if (auto p = target_->probe(id, q)) {
          auto& c = rec.recognition[id];
          c.pos_total += 1;
          c.neg_total += 1;
          c.pos_correct += p->positive_correct ? 1 : 0;
          c.neg_correct += p->negative_correct ? 1 : 0;
        }
      }
    }
  }
  return rec;
}

// ---- synthetic target ------------------------------------------------------

void SyntheticScenario::set_pair(const std::string& a, const std::string& b, double w) {
  pair_weights[a < b ? std::pair{a, b} : std::pair{b, a}] = w;
}

nlohmann::json SyntheticScenario::to_json() const {
  nlohmann::json j;
  j["base"] = base;
  j["atoms"] = atom_weights;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [p, w] : pair_weights) pairs.push_back({{"a", p.first}, {"b", p.second}, {"w", w}});
  j["pairs"] = pairs;
  j["visibility"] = visibility;
  j["seed"] = seed;
  return j;
}

SyntheticScenario SyntheticScenario::from_json(const nlohmann::json& j) {
  SyntheticScenario s;
  s.base = j.value("base", 0.05);
  if (j.contains("atoms")) s.atom_weights = j["atoms"].get<std::map<std::string, double>>();
  if (j.contains("pairs")) {
    for (const auto& p : j["pairs"]) {
      s.set_pair(p.at("a").get<std::string>(), p.at("b").get<std::string>(), p.at("w").get<double>());
    }
  }
  if (j.contains("visibility")) s.visibility = j["visibility"].get<std::map<std::string, double>>();
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

SyntheticScenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario not found: " + path.string());
  try {
    return SyntheticScenario::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario parse error: " + std::string(e.what()));
  }
}

double planted_probability(const SyntheticScenario& scenario, const ConceptSet& set) {
  double p = scenario.base;
  const auto& ids = set.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (auto it = scenario.atom_weights.find(ids[i]); it != scenario.atom_weights.end()) p += it->second;
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      if (auto it = scenario.pair_weights.find({ids[i], ids[j]}); it != scenario.pair_weights.end()) p += it->second;
    }
  }
  return std::clamp(p, 0.0, 1.0);
}

SyntheticTarget::SyntheticTarget(SyntheticScenario scenario, std::shared_ptr<const Oracle> oracle)
    : scenario_(std::move(scenario)), oracle_(std::move(oracle)) {}

std::string SyntheticTarget::ask(const Query& query) {
  const ExpectedAnswer expected = oracle_->ground_truth(query.set);
  const double p = planted_probability(scenario_, query.set);
  Rng rng(derive_seed(scenario_.seed, hash_string(query.set.key()), query.seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  const AnswerOption* pick = nullptr;
  if (u(rng) < p) {
    std::vector<const AnswerOption*> wrong;
    for (const auto& o : query.options) {
      if (o.label != expected.label) wrong.push_back(&o);
    }
    if (!wrong.empty()) {
      std::uniform_int_distribution<std::size_t> d(0, wrong.size() - 1);
      pick = wrong[d(rng)];
    } else {
      return "I cannot tell";
    }
  } else {
    for (const auto& o : query.options) {
      if (o.label == expected.label) pick = &o;
    }
  }
  if (pick == nullptr) return "I cannot tell";
  return "(" + pick->label + ") " + pick->text;
}

std::optional<RecognitionProbe> SyntheticTarget::probe(const std::string& concept_id, const Query& query) {
  auto it = scenario_.visibility.find(concept_id);
  const double v = it == scenario_.visibility.end() ? 1.0 : it->second;
  Rng rng(derive_seed(derive_seed(scenario_.seed, "recognition"), hash_string(concept_id + "|" + query.set.key()),
                      query.seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RecognitionProbe p;
  p.positive_correct = u(rng) < v;
  p.negative_correct = u(rng) < v;
  return p;
}

// ---- replay target ---------------------------------------------------------

ReplayTarget::ReplayTarget(const std::vector<EvalRecord>& records) {
  for (const auto& r : records) {
    auto& slot = answers_[r.set.key()];
    // Later records for the same set extend the sample sequence.
    slot.insert(slot.end(), r.answers.begin(), r.answers.end());
  }
}

ReplayTarget ReplayTarget::from_file(const std::filesystem::path& path) { return ReplayTarget(read_records(path)); }

std::string ReplayTarget::ask(const Query& query) {
  auto it = answers_.find(query.set.key());
  if (it == answers_.end() || query.sample_index >= it->second.size()) {
    throw TransportError("no replay answer for " + query.set.key() + " sample " + std::to_string(query.sample_index));
  }
  return it->second[query.sample_index];
}

}  // namespace fmd
