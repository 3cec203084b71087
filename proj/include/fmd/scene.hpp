#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fmd/concept_set.hpp"

namespace fmd {

struct Catalog;
struct ConceptDef;

/// Symbolic interval in meters. Sampling a concrete value is the renderer's job.
struct Range {
  double low = 0.0;
  double high = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

using AttrValue = std::variant<bool, double, std::string, Range>;
using AttrMap = std::map<std::string, AttrValue>;

nlohmann::json attr_to_json(const AttrValue& v);
AttrValue attr_from_json(const nlohmann::json& j);

struct Node {
  std::string id;
  std::string cls;
  std::set<std::string> tags;
  AttrMap attrs;
  std::string origin;  // concept that introduced the node; empty for the root
  friend bool operator==(const Node&, const Node&) = default;
};

struct Edge {
  std::string src;
  std::string dst;
  std::string relation;
  AttrMap attrs;
  std::string origin;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Anchor scene graph. Nodes keep insertion order, which the binding rule relies on.
class SceneGraph {
 public:
  SceneGraph() = default;

  /// Graph holding only the domain root (ego / kitchen).
  static SceneGraph with_root(const Catalog& catalog);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Modifier applications as (modifier concept id, bound node id).
  const std::vector<std::pair<std::string, std::string>>& bindings() const { return bindings_; }

  const Node* find(const std::string& id) const;
  Node* find(const std::string& id);
  const Node& root() const { return nodes_.front(); }

  std::size_t count_class(const std::string& cls) const;
  /// Union of all node tags.
  std::set<std::string> element_tags() const;
  bool has_tags(const Node& node, const std::vector<std::string>& tags) const;

  void add_node(Node node);
  void add_edge(Edge edge);
  void record_binding(std::string concept_id, std::string node_id);

  nlohmann::json to_json() const;

  friend bool operator==(const SceneGraph&, const SceneGraph&) = default;

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::pair<std::string, std::string>> bindings_;
};

struct CompositionStep {
  std::string concept_id;
  std::optional<std::string> binding;
  friend bool operator==(const CompositionStep&, const CompositionStep&) = default;
};

struct Composition {
  std::vector<CompositionStep> steps;
  friend bool operator==(const Composition&, const Composition&) = default;
};

/// Applies one concept fragment. Entities must be unbound; modifiers need a binding.
SceneGraph apply_concept(const SceneGraph& graph, const Catalog& catalog, const ConceptDef& def,
                         const std::optional<std::string>& binding);

/// Most recently added node carrying every tag in def.requires.
/// Throws BindingError when no such node exists.
std::string bind_modifier(const SceneGraph& graph, const ConceptDef& def, const Composition& steps_so_far);

struct Anchor {
  Composition composition;
  SceneGraph graph;
};

/// Canonical replay: entities in id order (an entity waits until its requirements
/// exist), then modifiers in id order, each bound to the most recent compatible node.
/// Binding failures surface as BindingError.
Anchor build_anchor(const Catalog& catalog, const ConceptSet& set);

ConceptSet canonical_set(const Composition& comp);

/// Plain-text scene description assembled from concept descriptions in replay order.
std::string describe(const Catalog& catalog, const Composition& comp);

}  // namespace fmd
