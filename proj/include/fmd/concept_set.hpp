#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace fmd {

using Rational = boost::rational<long long>;

/// Unordered, duplicate-free set of concept ids, stored sorted.
class ConceptSet {
 public:
  ConceptSet() = default;
  ConceptSet(std::initializer_list<std::string> ids);
  explicit ConceptSet(std::vector<std::string> ids);

  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool contains(const std::string& id) const;

  ConceptSet with(const std::string& id) const;
  ConceptSet without(const std::string& id) const;

  std::size_t intersection_size(const ConceptSet& other) const;

  /// Stable "a+b+c" form; the canonical key for maps and tie-breaks.
  std::string key() const;
  static ConceptSet from_key(const std::string& key);

  auto begin() const { return ids_.begin(); }
  auto end() const { return ids_.end(); }

  friend bool operator==(const ConceptSet&, const ConceptSet&) = default;
  friend auto operator<=>(const ConceptSet& a, const ConceptSet& b) { return a.key() <=> b.key(); }

 private:
  std::vector<std::string> ids_;
};

/// |A ∩ B| / |A ∪ B|; two empty sets are defined to have similarity 1.
Rational jaccard_exact(const ConceptSet& a, const ConceptSet& b);
double jaccard(const ConceptSet& a, const ConceptSet& b);

}  // namespace fmd
