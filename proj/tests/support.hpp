#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fmd/catalog.hpp"
#include "fmd/oracle.hpp"

namespace fmdtest {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(FMD_TEST_DATA) / name; }

inline std::shared_ptr<const fmd::Catalog> load(const std::filesystem::path& p) {
  return std::make_shared<const fmd::Catalog>(fmd::load_catalog_file(p));
}

inline std::shared_ptr<const fmd::Oracle> oracle_for(const std::string& catalog, const std::string& rules) {
  return std::make_shared<const fmd::Oracle>(load(catalog), fmd::load_rules_file(rules));
}

inline std::shared_ptr<const fmd::Oracle> driving_oracle() {
  static auto o = oracle_for(fmd::bundled_data_dir() / "driving_catalog.json", fmd::bundled_data_dir() / "driving_rules.json");
  return o;
}

inline std::shared_ptr<const fmd::Oracle> indoor_oracle() {
  static auto o = oracle_for(fmd::bundled_data_dir() / "indoor_catalog.json", fmd::bundled_data_dir() / "indoor_rules.json");
  return o;
}

inline std::shared_ptr<const fmd::Oracle> synth_oracle() {
  static auto o = oracle_for(data("synth_catalog.json"), fmd::bundled_data_dir() / "driving_rules.json");
  return o;
}

/// Every subset of size 1..max_size, by index combinations rather than by growth.
inline std::vector<fmd::ConceptSet> all_subsets(const std::vector<std::string>& ids, int max_size) {
  std::vector<fmd::ConceptSet> out;
  std::vector<std::string> cur;
  auto rec = [&](auto&& self, std::size_t start) -> void {
    if (!cur.empty()) out.emplace_back(cur);
    if (static_cast<int>(cur.size()) == max_size) return;
    for (std::size_t i = start; i < ids.size(); ++i) {
      cur.push_back(ids[i]);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

inline std::vector<fmd::ConceptSet> valid_subsets(const fmd::Catalog& c, int max_size) {
  std::vector<fmd::ConceptSet> out;
  for (auto& s : all_subsets(c.ids(), max_size)) {
    if (fmd::check_validity(c, s, max_size).valid()) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fmdtest
