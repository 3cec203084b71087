#pragma once

// Straight double-loop reference versions of the metrics, written without the library helpers.

#include <algorithm>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fmd/evaluator.hpp"

namespace fmdtest::naive {

using fmd::Rational;

inline Rational jaccard(const fmd::ConceptSet& a, const fmd::ConceptSet& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end()), both, either;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(both, both.end()));
  std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(either, either.end()));
  if (either.empty()) return Rational(1);
  return Rational(static_cast<long long>(both.size()), static_cast<long long>(either.size()));
}

inline bool is_failure(const fmd::EvalRecord& r, const Rational& tau) { return Rational(r.failures, r.m) >= tau; }

inline Rational pfm(const std::vector<fmd::EvalRecord>& rs, const Rational& tau) {
  long long k = 0;
  for (const auto& r : rs) k += is_failure(r, tau) ? 1 : 0;
  return Rational(k, static_cast<long long>(rs.size()));
}

inline Rational mfr(const std::vector<fmd::EvalRecord>& rs) {
  long long f = 0, n = 0;
  for (const auto& r : rs) {
    f += r.failures;
    n += r.m;
  }
  return Rational(f, n);
}

inline std::optional<Rational> div(const std::vector<fmd::EvalRecord>& rs, const Rational& tau) {
  Rational total(0);
  long long pairs = 0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    for (std::size_t j = 0; j < rs.size(); ++j) {
      if (j <= i || !is_failure(rs[i], tau) || !is_failure(rs[j], tau)) continue;
      total += Rational(1) - naive::jaccard(rs[i].set, rs[j].set);
      ++pairs;
    }
  }
  if (pairs == 0) return std::nullopt;
  return total / pairs;
}

/// Mean fr over records containing every listed concept; nullopt with no support.
inline std::optional<std::pair<long, Rational>> conditional(const std::vector<fmd::EvalRecord>& rs,
                                                            const std::vector<std::string>& ids) {
  long n = 0;
  Rational sum(0);
  for (const auto& r : rs) {
    bool all = true;
    for (const auto& id : ids) all = all && r.set.contains(id);
    if (!all) continue;
    ++n;
    sum += Rational(r.failures, r.m);
  }
  if (n == 0) return std::nullopt;
  return std::make_pair(n, sum / n);
}

inline Rational recognition(const std::vector<fmd::EvalRecord>& rs, const std::string& id) {
  long long correct = 0, total = 0;
  for (const auto& r : rs) {
    auto it = r.recognition.find(id);
    if (it == r.recognition.end()) continue;
    correct += it->second.pos_correct + it->second.neg_correct;
    total += it->second.pos_total + it->second.neg_total;
  }
  return Rational(correct, total);
}

/// Random records over a small alphabet with small m, optional recognition counts.
inline std::vector<fmd::EvalRecord> random_fixture(std::mt19937_64& rng, std::size_t count, bool with_recognition) {
  const std::vector<std::string> ids{"a", "b", "c", "d", "e", "f", "g"};
  std::vector<fmd::EvalRecord> out;
  std::set<std::string> seen;
  for (std::size_t attempt = 0; out.size() < count && attempt < 10 * count; ++attempt) {
    std::vector<std::string> pick;
    std::sample(ids.begin(), ids.end(), std::back_inserter(pick), 1 + rng() % 4, rng);
    fmd::ConceptSet s(pick);
    if (!seen.insert(s.key()).second) continue;
    fmd::EvalRecord r;
    r.set = s;
    r.m = 5;
    r.failures = static_cast<int>(rng() % 6);
    r.budget_cost = r.m;
    if (with_recognition) {
      for (const auto& id : s) {
        fmd::RecognitionCounts c;
        c.pos_total = 1 + static_cast<long>(rng() % 3);
        c.neg_total = 1 + static_cast<long>(rng() % 3);
        c.pos_correct = static_cast<long>(rng() % static_cast<std::uint64_t>(c.pos_total + 1));
        c.neg_correct = static_cast<long>(rng() % static_cast<std::uint64_t>(c.neg_total + 1));
        r.recognition[id] = c;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fmdtest::naive
