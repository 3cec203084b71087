#include "fmd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fmd/error.hpp"

namespace fmd {

double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

std::string format_percent(const Rational& r, int decimals, bool sign) {
  long long scale = 100;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  const Rational scaled = r * scale;
  const long long num = scaled.numerator();
  const long long den = scaled.denominator();
  const long long mag = (std::llabs(num) * 2 + den) / (2 * den);
  const bool negative = num < 0 && mag != 0;
  long long unit = 1;
  for (int i = 0; i < decimals; ++i) unit *= 10;
  std::ostringstream out;
  if (negative) {
    out << '-';
  } else if (sign) {
    out << '+';
  }
  out << mag / unit;
  if (decimals > 0) {
    std::string frac = std::to_string(mag % unit);
    out << '.' << std::string(static_cast<std::size_t>(decimals) - frac.size(), '0') << frac;
  }
  out << '%';
  return out.str();
}

// ---- run summary -----------------------------------------------------------

nlohmann::json RunSummary::to_json() const {
  nlohmann::json j{{"records", records},
                   {"failure_modes", failure_modes},
                   {"pfm", to_double(pfm)},
                   {"mfr", to_double(mfr)}};
  j["div"] = div ? nlohmann::json(to_double(*div)) : nlohmann::json(nullptr);
  return j;
}

std::optional<Rational> diversity(const std::vector<ConceptSet>& sets) {
  if (sets.size() < 2) return std::nullopt;
  Rational total(0);
  long pairs = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      total += Rational(1) - jaccard_exact(sets[i], sets[j]);
      ++pairs;
    }
  }
  return total / pairs;
}

RunSummary summarize(const std::vector<EvalRecord>& records, double tau) {
  RunSummary s;
  s.records = static_cast<long>(records.size());
  std::vector<ConceptSet> fms;
  long failures = 0;
  long inferences = 0;
  for (const auto& r : records) {
    failures += r.failures;
    inferences += r.m;
    if (r.fr() >= tau) fms.push_back(r.set);
  }
  s.failure_modes = static_cast<long>(fms.size());
  s.pfm = records.empty() ? Rational(0) : Rational(s.failure_modes, s.records);
  s.mfr = inferences == 0 ? Rational(0) : Rational(failures, inferences);
  s.div = diversity(fms);
  return s;
}

// ---- concept profiles ------------------------------------------------------

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Reasoning: return "Reasoning";
    case Regime::Recognition: return "Recognition";
    case Regime::Mixed: return "Mixed";
  }
  return "?";
}

Regime classify_regime(const Rational& r) {
  if (r >= Rational(7, 10)) return Regime::Reasoning;
  if (r <= Rational(3, 10)) return Regime::Recognition;
  return Regime::Mixed;
}

Rational recognition_rate(const RecognitionCounts& c) {
  const long total = c.pos_total + c.neg_total;
  if (total == 0) throw Error("recognition rate with no statements");
  return Rational(c.pos_correct + c.neg_correct, total);
}

RecognitionLog pooled_recognition(const std::vector<EvalRecord>& records) {
  RecognitionLog out;
  for (const auto& r : records) {
    for (const auto& [id, c] : r.recognition) out[id] += c;
  }
  return out;
}

namespace {

struct Support {
  long n = 0;
  Rational sum{0};
  Rational mean() const { return sum / n; }
};

std::map<std::string, Support> atom_support(const std::vector<EvalRecord>& records) {
  std::map<std::string, Support> out;
  for (const auto& r : records) {
    for (const auto& id : r.set) {
      auto& s = out[id];
      s.n += 1;
      s.sum += r.fr_exact();
    }
  }
  return out;
}

}  // namespace

std::vector<ConceptProfile> concept_profiles(const std::vector<EvalRecord>& records,
                                             const std::optional<RecognitionLog>& recognition, long n_min) {
  std::vector<ConceptProfile> out;
  for (const auto& [id, s] : atom_support(records)) {
    if (s.n < n_min) continue;
    ConceptProfile p;
    p.id = id;
    p.n = s.n;
    p.F = s.mean();
    if (recognition) {
      auto it = recognition->find(id);
      if (it != recognition->end() && it->second.pos_total + it->second.neg_total > 0) {
        p.R = recognition_rate(it->second);
        p.regime = classify_regime(*p.R);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---- lift ------------------------------------------------------------------

Rational independence_baseline(const Rational& fa, const Rational& fb) { return fa + fb - fa * fb; }

Rational lift_value(const Rational& observed, const Rational& baseline) { return observed - baseline; }

std::vector<LiftEntry> lift_table(const std::vector<EvalRecord>& records, long atom_n_min, long pair_n_min,
                                  LiftBaseline baseline) {
  const auto atoms = atom_support(records);
  std::map<std::pair<std::string, std::string>, Support> pairs;
  for (const auto& r : records) {
    const auto& ids = r.set.ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        auto& s = pairs[{ids[i], ids[j]}];
        s.n += 1;
        s.sum += r.fr_exact();
      }
    }
  }
  std::vector<LiftEntry> out;
  for (const auto& [key, s] : pairs) {
    if (s.n < pair_n_min) continue;
    const auto& a = atoms.at(key.first);
    const auto& b = atoms.at(key.second);
    if (a.n < atom_n_min || b.n < atom_n_min) continue;
    LiftEntry e;
    e.a = key.first;
    e.b = key.second;
    e.n = s.n;
    e.observed = s.mean();
    e.baseline = baseline == LiftBaseline::Independence ? independence_baseline(a.mean(), b.mean())
                                                        : std::max(a.mean(), b.mean());
    e.lift = lift_value(e.observed, e.baseline);
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const LiftEntry& x, const LiftEntry& y) {
    return boost::abs(x.lift) > boost::abs(y.lift);
  });
  return out;
}

// ---- transfer --------------------------------------------------------------

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("spearman: length mismatch");
  if (a.size() < 2) return std::nullopt;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

nlohmann::json TransferReport::to_json() const {
  nlohmann::json j{{"n", n}, {"mean_target_fr", mean_target_fr}, {"baseline_mfr", baseline_mfr}};
  j["multiplier"] = multiplier ? nlohmann::json(*multiplier) : nlohmann::json(nullptr);
  j["spearman"] = spearman ? nlohmann::json(*spearman) : nlohmann::json(nullptr);
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& b : buckets) {
    bs.push_back({{"low", b.low},
                  {"high", b.high},
                  {"n", b.n},
                  {"mean_target_fr", b.mean_target_fr ? nlohmann::json(*b.mean_target_fr) : nlohmann::json(nullptr)}});
  }
  j["buckets"] = bs;
  return j;
}

TransferReport transfer_report(const std::vector<EvalRecord>& source_top, const std::vector<EvalRecord>& target_records,
                               double target_baseline_mfr, int bucket_count) {
  if (source_top.empty() || target_records.empty()) throw Error("transfer report: empty inputs");
  if (bucket_count < 1) throw ConfigError("bucket count must be >= 1");
  std::map<std::string, double> target_fr;
  for (const auto& r : target_records) target_fr[r.set.key()] = r.fr();

  std::vector<double> src, tgt;
  for (const auto& r : source_top) {
    auto it = target_fr.find(r.set.key());
    if (it == target_fr.end()) throw Error("transfer report: no target record for " + r.set.key());
    src.push_back(r.fr());
    tgt.push_back(it->second);
  }

  TransferReport rep;
  rep.n = static_cast<long>(src.size());
  rep.mean_target_fr = std::accumulate(tgt.begin(), tgt.end(), 0.0) / static_cast<double>(tgt.size());
  rep.baseline_mfr = target_baseline_mfr;
  if (target_baseline_mfr > 0.0) rep.multiplier = rep.mean_target_fr / target_baseline_mfr;
  rep.spearman = spearman(src, tgt);

  for (int b = 0; b < bucket_count; ++b) {
    TransferBucket bucket;
    bucket.low = static_cast<double>(b) / bucket_count;
    bucket.high = static_cast<double>(b + 1) / bucket_count;
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const bool last = b == bucket_count - 1;
      if (src[i] >= bucket.low && (src[i] < bucket.high || (last && src[i] <= bucket.high))) {
        ++bucket.n;
        sum += tgt[i];
      }
    }
    if (bucket.n > 0) bucket.mean_target_fr = sum / static_cast<double>(bucket.n);
    rep.buckets.push_back(bucket);
  }
  return rep;
}

// ---- tables ----------------------------------------------------------------

std::string records_table(const std::vector<EvalRecord>& records) {
  std::ostringstream out;
  out << "set\tfr\tfailures\tm\tphase\n";
  for (const auto& r : records) {
    out << r.set.key() << '\t' << r.fr() << '\t' << r.failures << '\t' << r.m << '\t' << r.phase << '\n';
  }
  return out.str();
}

std::string profiles_table(const std::vector<ConceptProfile>& profiles) {
  std::ostringstream out;
  out << "concept\tn\tF\tR\tregime\n";
  for (const auto& p : profiles) {
    out << p.id << '\t' << p.n << '\t' << to_double(p.F) << '\t';
    if (p.R) out << to_double(*p.R);
    out << '\t' << (p.regime ? to_string(*p.regime) : "") << '\n';
  }
  return out.str();
}

std::string lift_table_text(const std::vector<LiftEntry>& entries) {
  std::ostringstream out;
  out << "a\tb\tn\tobserved\tbaseline\tlift\n";
  for (const auto& e : entries) {
    out << e.a << '\t' << e.b << '\t' << e.n << '\t' << to_double(e.observed) << '\t' << to_double(e.baseline) << '\t'
        << to_double(e.lift) << '\n';
  }
  return out.str();
}

}  // namespace fmd
