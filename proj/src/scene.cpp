#include "fmd/scene.hpp"

#include <algorithm>

#include "fmd/catalog.hpp"
#include "fmd/error.hpp"

namespace fmd {

nlohmann::json attr_to_json(const AttrValue& v) {
  return std::visit(
      [](const auto& x) -> nlohmann::json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Range>) {
          return nlohmann::json{{"range", {x.low, x.high}}};
        } else {
          return x;
        }
      },
      v);
}

AttrValue attr_from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object() && j.contains("range")) {
    const auto& r = j.at("range");
    if (!r.is_array() || r.size() != 2) throw CatalogError("range must be [low, high]");
    Range out{r[0].get<double>(), r[1].get<double>()};
    if (out.low > out.high) throw CatalogError("range low exceeds high");
    return out;
  }
  throw CatalogError("unsupported attribute value: " + j.dump());
}

namespace {

nlohmann::json attrs_to_json(const AttrMap& attrs) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [k, v] : attrs) out[k] = attr_to_json(v);
  return out;
}

std::string edge_key(const Edge& e) { return e.src + "->" + e.dst + ":" + e.relation; }

}  // namespace

SceneGraph SceneGraph::with_root(const Catalog& catalog) {
  SceneGraph g;
  Node root;
  root.id = catalog.root_class;
  root.cls = catalog.root_class;
  root.tags.insert(catalog.root_tags.begin(), catalog.root_tags.end());
  g.nodes_.push_back(std::move(root));
  return g;
}

const Node* SceneGraph::find(const std::string& id) const {
  auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.id == id; });
  return it == nodes_.end() ? nullptr : &*it;
}

Node* SceneGraph::find(const std::string& id) {
  auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.id == id; });
  return it == nodes_.end() ? nullptr : &*it;
}

std::size_t SceneGraph::count_class(const std::string& cls) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.cls == cls; }));
}

std::set<std::string> SceneGraph::element_tags() const {
  std::set<std::string> out;
  for (const auto& n : nodes_) out.insert(n.tags.begin(), n.tags.end());
  return out;
}

bool SceneGraph::has_tags(const Node& node, const std::vector<std::string>& tags) const {
  return std::all_of(tags.begin(), tags.end(), [&](const std::string& t) { return node.tags.count(t) != 0; });
}

void SceneGraph::add_node(Node node) { nodes_.push_back(std::move(node)); }

void SceneGraph::add_edge(Edge edge) {
  if (!find(edge.src) || !find(edge.dst)) {
    throw BindingError("edge " + edge_key(edge) + " references a missing node");
  }
  edges_.push_back(std::move(edge));
}

void SceneGraph::record_binding(std::string concept_id, std::string node_id) {
  bindings_.emplace_back(std::move(concept_id), std::move(node_id));
}

nlohmann::json SceneGraph::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json edges = nlohmann::json::array();
  nlohmann::json provenance = nlohmann::json::object();
  for (const auto& n : nodes_) {
    nodes.push_back({{"id", n.id}, {"class", n.cls}, {"tags", n.tags}, {"attrs", attrs_to_json(n.attrs)}});
    if (!n.origin.empty()) provenance[n.id] = n.origin;
  }
  for (const auto& e : edges_) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"relation", e.relation}, {"attrs", attrs_to_json(e.attrs)}});
    provenance[edge_key(e)] = e.origin;
  }
  nlohmann::json bindings = nlohmann::json::array();
  for (const auto& [c, n] : bindings_) bindings.push_back({{"concept", c}, {"node", n}});
  return {{"nodes", nodes}, {"edges", edges}, {"provenance", provenance}, {"bindings", bindings}};
}

namespace {

std::string resolve_ref(const std::string& ref, const ConceptDef& def, const SceneGraph& graph,
                        const std::optional<std::string>& binding) {
  if (ref.empty() || ref == "self") return def.id;
  if (ref == "root") return graph.root().id;
  if (ref == "bound") {
    if (!binding) throw BindingError(def.id + ": fragment refers to a bound node but none was given");
    return *binding;
  }
  return def.id + "." + ref;
}

}  // namespace

SceneGraph apply_concept(const SceneGraph& graph, const Catalog& catalog, const ConceptDef& def,
                         const std::optional<std::string>& binding) {
  (void)catalog;
  if (def.is_modifier()) {
    if (!binding) throw BindingError("unbound modifier " + def.id);
    if (!graph.find(*binding)) throw BindingError(def.id + ": bound node " + *binding + " does not exist");
  } else {
    if (binding) throw BindingError("entity " + def.id + " does not take a binding");
    const auto present = graph.element_tags();
    for (const auto& tag : def.requires_tags) {
      if (!present.count(tag)) throw BindingError(def.id + " requires '" + tag + "' which is not in the scene");
    }
  }

  SceneGraph out = graph;
  // (node, key) -> value written by this fragment, to reject self-contradictions.
  std::map<std::pair<std::string, std::string>, AttrValue> written;
  auto write = [&](Node& node, const std::string& key, const AttrValue& value) {
    auto [it, fresh] = written.try_emplace({node.id, key}, value);
    if (!fresh && !(it->second == value)) {
      throw BindingError(def.id + ": attribute conflict on " + node.id + "." + key);
    }
    node.attrs[key] = value;
  };

  for (const auto& op : def.fragment) {
    switch (op.type) {
      case FragmentOp::Type::AddNode: {
        const auto id = resolve_ref(op.node, def, out, binding);
        if (Node* existing = out.find(id)) {
          if (id != out.root().id) throw BindingError(def.id + ": node " + id + " already exists");
          // Union with the root: tags and attributes merge into the existing node.
          existing->tags.insert(op.tags.begin(), op.tags.end());
          for (const auto& [k, v] : op.attrs) write(*existing, k, v);
        } else {
          Node n;
          n.id = id;
          n.cls = op.cls;
          n.tags.insert(op.tags.begin(), op.tags.end());
          n.origin = def.id;
          out.add_node(std::move(n));
          Node& added = *out.find(id);
          for (const auto& [k, v] : op.attrs) write(added, k, v);
        }
        break;
      }
      case FragmentOp::Type::AddEdge: {
        Edge e;
        e.src = resolve_ref(op.from, def, out, binding);
        e.dst = resolve_ref(op.to, def, out, binding);
        e.relation = op.relation;
        e.attrs = op.attrs;
        e.origin = def.id;
        out.add_edge(std::move(e));
        break;
      }
      case FragmentOp::Type::SetAttr: {
        const auto id = resolve_ref(op.node, def, out, binding);
        Node* n = out.find(id);
        if (!n) throw BindingError(def.id + ": set_attr target " + id + " does not exist");
        write(*n, op.key, *op.value);
        break;
      }
      case FragmentOp::Type::AddTag: {
        const auto id = resolve_ref(op.node, def, out, binding);
        Node* n = out.find(id);
        if (!n) throw BindingError(def.id + ": add_tag target " + id + " does not exist");
        n->tags.insert(op.tag);
        break;
      }
    }
  }
  if (def.is_modifier()) out.record_binding(def.id, *binding);
  return out;
}

std::string bind_modifier(const SceneGraph& graph, const ConceptDef& def, const Composition& steps_so_far) {
  std::set<std::string> contributed;
  for (const auto& s : steps_so_far.steps) contributed.insert(s.concept_id);
  const auto& nodes = graph.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    const bool eligible = it->origin.empty() || contributed.count(it->origin);
    if (eligible && graph.has_tags(*it, def.requires_tags)) return it->id;
  }
  std::string need;
  for (const auto& t : def.requires_tags) need += (need.empty() ? "" : ",") + t;
  throw BindingError("no node compatible with modifier " + def.id + " (needs " + need + ")");
}

Anchor build_anchor(const Catalog& catalog, const ConceptSet& set) {
  std::vector<const ConceptDef*> entities;
  std::vector<const ConceptDef*> modifiers;
  for (const auto& id : set) {
    const auto& def = catalog.at(id);
    (def.is_modifier() ? modifiers : entities).push_back(&def);
  }

  Anchor a;
  a.graph = SceneGraph::with_root(catalog);
  while (!entities.empty()) {
    const auto present = a.graph.element_tags();
    auto ready = std::find_if(entities.begin(), entities.end(), [&](const ConceptDef* d) {
      return std::all_of(d->requires_tags.begin(), d->requires_tags.end(),
                         [&](const std::string& t) { return present.count(t) != 0; });
    });
    if (ready == entities.end()) {
      const ConceptDef* d = entities.front();
      std::string missing;
      for (const auto& t : d->requires_tags) {
        if (!present.count(t)) missing += (missing.empty() ? "" : ",") + t;
      }
      throw BindingError("requirement of " + d->id + " not produced by any entity (" + missing + ")");
    }
    a.graph = apply_concept(a.graph, catalog, **ready, std::nullopt);
    a.composition.steps.push_back({(*ready)->id, std::nullopt});
    entities.erase(ready);
  }
  for (const ConceptDef* m : modifiers) {
    auto node = bind_modifier(a.graph, *m, a.composition);
    a.graph = apply_concept(a.graph, catalog, *m, node);
    a.composition.steps.push_back({m->id, node});
  }
  return a;
}

ConceptSet canonical_set(const Composition& comp) {
  std::vector<std::string> ids;
  ids.reserve(comp.steps.size());
  for (const auto& s : comp.steps) ids.push_back(s.concept_id);
  return ConceptSet(std::move(ids));
}

std::string describe(const Catalog& catalog, const Composition& comp) {
  std::string out;
  for (const auto& s : comp.steps) {
    const auto& d = catalog.at(s.concept_id).description;
    if (d.empty()) continue;
    if (!out.empty()) out += ' ';
    out += d;
  }
  return out;
}

}  // namespace fmd
