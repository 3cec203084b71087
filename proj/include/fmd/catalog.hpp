#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmd/concept_set.hpp"
#include "fmd/scene.hpp"

namespace fmd {

enum class ConceptKind { Entity, Modifier };

/// One graph operation of a concept fragment.
///
/// Node references inside a fragment are symbolic:
///   "self"   the node named after the concept id
///   "root"   the domain root node (ego, kitchen)
///   "bound"  the node a modifier is bound to
///   other    a local name, expanded to "<concept id>.<name>"
struct FragmentOp {
  enum class Type { AddNode, AddEdge, SetAttr, AddTag };
  Type type = Type::AddNode;
  std::string node;  // AddNode: which node; SetAttr/AddTag: target
  std::string cls;
  std::vector<std::string> tags;
  AttrMap attrs;
  std::string from;
  std::string to;
  std::string relation;
  std::string key;
  std::optional<AttrValue> value;
  std::string tag;
};

struct ConceptDef {
  std::string id;
  ConceptKind kind = ConceptKind::Entity;
  std::string category;
  std::string description;
  std::vector<FragmentOp> fragment;
  std::vector<std::string> requires_tags;
  std::optional<std::string> excludes_group;
  std::map<std::string, Range> params;

  bool is_modifier() const { return kind == ConceptKind::Modifier; }
};

struct Catalog {
  std::string domain;
  std::string root_class;
  std::vector<std::string> root_tags;
  std::map<std::string, ConceptDef> concepts;
  std::map<std::string, std::vector<std::string>> exclusion_groups;
  int max_depth_default = 5;
  /// Categories that configure the fixed scene rather than a hazard family.
  std::set<std::string> scene_categories;

  const ConceptDef& at(const std::string& id) const;
  bool contains(const std::string& id) const { return concepts.count(id) != 0; }
  /// All ids in canonical (lexicographic) order.
  std::vector<std::string> ids() const;
  std::set<std::string> categories() const;
  /// Categories excluding scene_categories.
  std::set<std::string> hazard_categories() const;
};

using CatalogPtr = std::shared_ptr<const Catalog>;

Catalog load_catalog(const std::string& source);
Catalog load_catalog_file(const std::filesystem::path& path);
nlohmann::json catalog_to_json(const Catalog& catalog);

struct ValidityVerdict {
  std::vector<std::string> violations;
  bool valid() const { return violations.empty(); }
};

/// Static validity gate shared by every search strategy.
/// max_depth overrides catalog.max_depth_default when given.
ValidityVerdict check_validity(const Catalog& catalog, const ConceptSet& set,
                               std::optional<int> max_depth = std::nullopt);
/// As above; on success with an entity present, the replayed anchor is stored in anchor_out.
ValidityVerdict check_validity(const Catalog& catalog, const ConceptSet& set, std::optional<int> max_depth,
                               std::optional<Anchor>& anchor_out);

/// Every valid one-concept extension of set, sorted by canonical key.
std::vector<ConceptSet> enumerate_expansions(const Catalog& catalog, const ConceptSet& set,
                                             std::optional<int> max_depth = std::nullopt);

std::filesystem::path bundled_data_dir();

}  // namespace fmd
