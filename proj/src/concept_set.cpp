#include "fmd/concept_set.hpp"

#include <algorithm>
#include <sstream>

namespace fmd {

ConceptSet::ConceptSet(std::initializer_list<std::string> ids) : ConceptSet(std::vector<std::string>(ids)) {}

ConceptSet::ConceptSet(std::vector<std::string> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool ConceptSet::contains(const std::string& id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

ConceptSet ConceptSet::with(const std::string& id) const {
  ConceptSet out = *this;
  auto it = std::lower_bound(out.ids_.begin(), out.ids_.end(), id);
  if (it == out.ids_.end() || *it != id) out.ids_.insert(it, id);
  return out;
}

ConceptSet ConceptSet::without(const std::string& id) const {
  ConceptSet out = *this;
  auto it = std::lower_bound(out.ids_.begin(), out.ids_.end(), id);
  if (it != out.ids_.end() && *it == id) out.ids_.erase(it);
  return out;
}

std::size_t ConceptSet::intersection_size(const ConceptSet& other) const {
  std::size_t n = 0;
  auto a = ids_.begin();
  auto b = other.ids_.begin();
  while (a != ids_.end() && b != other.ids_.end()) {
    if (*a < *b) {
      ++a;
    } else if (*b < *a) {
      ++b;
    } else {
      ++n;
      ++a;
      ++b;
    }
  }
  return n;
}

std::string ConceptSet::key() const {
  std::string out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (i) out += '+';
    out += ids_[i];
  }
  return out;
}

ConceptSet ConceptSet::from_key(const std::string& key) {
  std::vector<std::string> ids;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '+')) {
    if (!part.empty()) ids.push_back(part);
  }
  return ConceptSet(std::move(ids));
}

Rational jaccard_exact(const ConceptSet& a, const ConceptSet& b) {
  const auto inter = static_cast<long long>(a.intersection_size(b));
  const auto uni = static_cast<long long>(a.size() + b.size()) - inter;
  if (uni == 0) return Rational(1);
  return Rational(inter, uni);
}

double jaccard(const ConceptSet& a, const ConceptSet& b) {
  return boost::rational_cast<double>(jaccard_exact(a, b));
}

}  // namespace fmd
