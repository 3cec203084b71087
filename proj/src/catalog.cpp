#include "fmd/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fmd/error.hpp"

namespace fmd {

const ConceptDef& Catalog::at(const std::string& id) const {
  auto it = concepts.find(id);
  if (it == concepts.end()) throw CatalogError("unknown concept id: " + id);
  return it->second;
}

std::vector<std::string> Catalog::ids() const {
  std::vector<std::string> out;
  out.reserve(concepts.size());
  for (const auto& [id, _] : concepts) out.push_back(id);
  return out;
}

std::set<std::string> Catalog::categories() const {
  std::set<std::string> out;
  for (const auto& [_, c] : concepts) out.insert(c.category);
  return out;
}

std::set<std::string> Catalog::hazard_categories() const {
  auto out = categories();
  for (const auto& s : scene_categories) out.erase(s);
  return out;
}

namespace {

bool valid_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

AttrMap parse_attrs(const nlohmann::json& j) {
  AttrMap out;
  if (!j.is_object()) throw CatalogError("attrs must be an object");
  for (const auto& [k, v] : j.items()) out[k] = attr_from_json(v);
  return out;
}

FragmentOp parse_op(const nlohmann::json& j, const std::string& concept_id) {
  FragmentOp op;
  const auto type = j.at("op").get<std::string>();
  if (type == "add_node") {
    op.type = FragmentOp::Type::AddNode;
    op.node = j.value("node", "self");
    op.cls = j.at("class").get<std::string>();
    op.tags = string_list(j, "tags");
    if (j.contains("attrs")) op.attrs = parse_attrs(j.at("attrs"));
  } else if (type == "add_edge") {
    op.type = FragmentOp::Type::AddEdge;
    op.from = j.at("from").get<std::string>();
    op.to = j.at("to").get<std::string>();
    op.relation = j.at("relation").get<std::string>();
    if (j.contains("attrs")) op.attrs = parse_attrs(j.at("attrs"));
  } else if (type == "set_attr") {
    op.type = FragmentOp::Type::SetAttr;
    op.node = j.value("target", "bound");
    op.key = j.at("key").get<std::string>();
    op.value = attr_from_json(j.at("value"));
  } else if (type == "add_tag") {
    op.type = FragmentOp::Type::AddTag;
    op.node = j.value("target", "bound");
    op.tag = j.at("tag").get<std::string>();
  } else {
    throw CatalogError(concept_id + ": unknown fragment op '" + type + "'");
  }
  return op;
}

ConceptDef parse_concept(const nlohmann::json& j) {
  ConceptDef c;
  c.id = j.at("id").get<std::string>();
  if (!valid_id(c.id)) throw CatalogError("invalid concept id '" + c.id + "'");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "entity") {
    c.kind = ConceptKind::Entity;
  } else if (kind == "modifier") {
    c.kind = ConceptKind::Modifier;
  } else {
    throw CatalogError(c.id + ": kind must be entity or modifier");
  }
  c.category = j.value("category", "");
  c.description = j.value("description", "");
  for (const auto& op : j.value("fragment", nlohmann::json::array())) c.fragment.push_back(parse_op(op, c.id));
  c.requires_tags = string_list(j, "requires");
  if (j.contains("excludes_group") && !j.at("excludes_group").is_null()) {
    c.excludes_group = j.at("excludes_group").get<std::string>();
  }
  if (j.contains("params")) {
    for (const auto& [k, v] : j.at("params").items()) {
      c.params[k] = Range{v.at(0).get<double>(), v.at(1).get<double>()};
    }
  }

  const bool adds_node = std::any_of(c.fragment.begin(), c.fragment.end(),
                                     [](const FragmentOp& op) { return op.type == FragmentOp::Type::AddNode; });
  if (c.is_modifier() && adds_node) throw CatalogError(c.id + ": modifier fragments cannot add nodes");
  if (!c.is_modifier() && !adds_node) throw CatalogError(c.id + ": entity fragments must add a node");
  return c;
}

}  // namespace

Catalog load_catalog(const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(source);
  } catch (const nlohmann::json::parse_error& e) {
    throw CatalogError(std::string("parse error: ") + e.what());
  }

  Catalog cat;
  try {
    cat.domain = j.at("domain").get<std::string>();
    if (j.contains("root")) {
      cat.root_class = j.at("root").at("class").get<std::string>();
      cat.root_tags = string_list(j.at("root"), "tags");
    } else if (cat.domain == "driving") {
      cat.root_class = "ego";
      cat.root_tags = {"ego"};
    } else if (cat.domain == "indoor") {
      cat.root_class = "kitchen";
      cat.root_tags = {"kitchen"};
    } else {
      throw CatalogError("catalog for domain '" + cat.domain + "' must declare a root node");
    }
    cat.max_depth_default = j.value("max_depth_default", 5);
    if (cat.max_depth_default < 1) throw CatalogError("max_depth_default must be positive");
    for (const auto& s : string_list(j, "scene_categories")) cat.scene_categories.insert(s);

    const auto& concepts = j.at("concepts");
    if (!concepts.is_array() || concepts.empty()) throw CatalogError("empty catalog");
    for (const auto& cj : concepts) {
      auto c = parse_concept(cj);
      if (cat.concepts.count(c.id)) throw CatalogError("duplicate id: " + c.id);
      cat.concepts.emplace(c.id, std::move(c));
    }
    if (j.contains("exclusion_groups")) {
      for (const auto& [g, members] : j.at("exclusion_groups").items()) {
        cat.exclusion_groups[g] = members.get<std::vector<std::string>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CatalogError(std::string("malformed catalog: ") + e.what());
  }

  for (const auto& [g, members] : cat.exclusion_groups) {
    for (const auto& m : members) {
      auto it = cat.concepts.find(m);
      if (it == cat.concepts.end()) throw CatalogError("exclusion group " + g + " lists unknown concept " + m);
      if (it->second.excludes_group != g) {
        throw CatalogError("exclusion group " + g + " lists " + m + " which does not declare it");
      }
    }
  }

  std::set<std::string> producible(cat.root_tags.begin(), cat.root_tags.end());
  for (const auto& [id, c] : cat.concepts) {
    if (c.excludes_group && !cat.exclusion_groups.count(*c.excludes_group)) {
      throw CatalogError(id + ": unknown exclusion group " + *c.excludes_group);
    }
    if (c.excludes_group) {
      const auto& members = cat.exclusion_groups.at(*c.excludes_group);
      if (std::find(members.begin(), members.end(), id) == members.end()) {
        throw CatalogError(id + ": not listed in exclusion group " + *c.excludes_group);
      }
    }
    if (c.is_modifier()) continue;
    for (const auto& op : c.fragment) {
      if (op.type == FragmentOp::Type::AddNode) producible.insert(op.tags.begin(), op.tags.end());
    }
  }
  for (const auto& [id, c] : cat.concepts) {
    for (const auto& t : c.requires_tags) {
      if (!producible.count(t)) throw CatalogError(id + ": dangling requires tag '" + t + "'");
    }
  }
  return cat;
}

Catalog load_catalog_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError("catalog not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_catalog(ss.str());
}

namespace {

nlohmann::json attrs_to_json(const AttrMap& attrs) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : attrs) j[k] = attr_to_json(v);
  return j;
}

nlohmann::json op_to_json(const FragmentOp& op) {
  switch (op.type) {
    case FragmentOp::Type::AddNode:
      return {{"op", "add_node"}, {"node", op.node}, {"class", op.cls}, {"tags", op.tags}, {"attrs", attrs_to_json(op.attrs)}};
    case FragmentOp::Type::AddEdge:
      return {{"op", "add_edge"}, {"from", op.from}, {"to", op.to}, {"relation", op.relation},
              {"attrs", attrs_to_json(op.attrs)}};
    case FragmentOp::Type::SetAttr:
      return {{"op", "set_attr"}, {"target", op.node}, {"key", op.key}, {"value", attr_to_json(*op.value)}};
    case FragmentOp::Type::AddTag:
      return {{"op", "add_tag"}, {"target", op.node}, {"tag", op.tag}};
  }
  return {};
}

}  // namespace

nlohmann::json catalog_to_json(const Catalog& catalog) {
  nlohmann::json concepts = nlohmann::json::array();
  for (const auto& [id, c] : catalog.concepts) {
    nlohmann::json fragment = nlohmann::json::array();
    for (const auto& op : c.fragment) fragment.push_back(op_to_json(op));
    nlohmann::json cj{{"id", id},
                      {"kind", c.is_modifier() ? "modifier" : "entity"},
                      {"category", c.category},
                      {"description", c.description},
                      {"fragment", fragment},
                      {"requires", c.requires_tags},
                      {"excludes_group", c.excludes_group ? nlohmann::json(*c.excludes_group) : nlohmann::json()}};
    if (!c.params.empty()) {
      nlohmann::json params = nlohmann::json::object();
      for (const auto& [k, r] : c.params) params[k] = {r.low, r.high};
      cj["params"] = params;
    }
    concepts.push_back(std::move(cj));
  }
  return {{"domain", catalog.domain},
          {"root", {{"class", catalog.root_class}, {"tags", catalog.root_tags}}},
          {"max_depth_default", catalog.max_depth_default},
          {"scene_categories", catalog.scene_categories},
          {"exclusion_groups", catalog.exclusion_groups},
          {"concepts", concepts}};
}

ValidityVerdict check_validity(const Catalog& catalog, const ConceptSet& set, std::optional<int> max_depth) {
  std::optional<Anchor> unused;
  return check_validity(catalog, set, max_depth, unused);
}

ValidityVerdict check_validity(const Catalog& catalog, const ConceptSet& set, std::optional<int> max_depth,
                               std::optional<Anchor>& anchor_out) {
  anchor_out.reset();
  ValidityVerdict v;
  std::map<std::string, int> group_counts;
  bool any_entity = false;
  for (const auto& id : set) {
    const auto& def = catalog.at(id);
    if (!def.is_modifier()) any_entity = true;
    if (def.excludes_group) ++group_counts[*def.excludes_group];
  }
  if (set.empty()) {
    v.violations.push_back("empty set");
    return v;
  }
  if (!any_entity) v.violations.push_back("modifier-only set");
  for (const auto& [g, n] : group_counts) {
    if (n > 1) v.violations.push_back("exclusion group " + g);
  }
  const int depth = max_depth.value_or(catalog.max_depth_default);
  if (static_cast<int>(set.size()) > depth) {
    v.violations.push_back("exceeds max depth " + std::to_string(depth));
  }
  if (any_entity) {
    try {
      anchor_out = build_anchor(catalog, set);
    } catch (const BindingError& e) {
      v.violations.push_back(std::string("binding: ") + e.what());
    }
  }
  return v;
}

std::vector<ConceptSet> enumerate_expansions(const Catalog& catalog, const ConceptSet& set,
                                             std::optional<int> max_depth) {
  std::vector<ConceptSet> out;
  const int depth = max_depth.value_or(catalog.max_depth_default);
  if (static_cast<int>(set.size()) >= depth) return out;
  for (const auto& id : catalog.ids()) {
    if (set.contains(id)) continue;
    auto next = set.with(id);
    if (check_validity(catalog, next, depth).valid()) out.push_back(std::move(next));
  }
  std::sort(out.begin(), out.end(), [](const ConceptSet& a, const ConceptSet& b) { return a.key() < b.key(); });
  return out;
}

std::filesystem::path bundled_data_dir() {
#ifdef FMD_DATA_DIR
  return FMD_DATA_DIR;
#else
  return "data";
#endif
}

}  // namespace fmd
