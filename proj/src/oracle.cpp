#include "fmd/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fmd/error.hpp"

namespace fmd {

std::string to_string(DrivingAction a) {
  switch (a) {
    case DrivingAction::EmergencyStop: return "EmergencyStop";
    case DrivingAction::SlowDown: return "SlowDown";
    case DrivingAction::Continue: return "Continue";
  }
  return "Continue";
}

DrivingAction driving_action_from_string(const std::string& s) {
  if (s == "EmergencyStop") return DrivingAction::EmergencyStop;
  if (s == "SlowDown") return DrivingAction::SlowDown;
  if (s == "Continue") return DrivingAction::Continue;
  throw OracleError("unknown driving action: " + s);
}

namespace {

LogicPattern pattern_from_string(const std::string& s) {
  if (s == "modus_ponens") return LogicPattern::ModusPonens;
  if (s == "modus_tollens") return LogicPattern::ModusTollens;
  if (s == "disjunctive_syllogism") return LogicPattern::DisjunctiveSyllogism;
  throw OracleError("unknown logic pattern: " + s);
}

std::vector<AnswerOption> parse_options(const nlohmann::json& j) {
  std::vector<AnswerOption> out;
  for (const auto& o : j) out.push_back({o.at("label").get<std::string>(), o.at("text").get<std::string>()});
  if (out.empty()) throw OracleError("rule has no answer options");
  return out;
}

DrivingRuleBook parse_driving(const nlohmann::json& j) {
  DrivingRuleBook book;
  book.preamble = j.at("prompt").get<std::string>();
  for (const auto& o : j.at("options")) {
    AnswerOption opt{o.at("label").get<std::string>(), o.at("text").get<std::string>()};
    book.action_labels[driving_action_from_string(o.at("action").get<std::string>())] = opt.label;
    book.options.push_back(std::move(opt));
  }
  for (const auto& [name, r] : j.at("distance_buckets").items()) {
    book.distance_buckets[name] = Range{r.at(0).get<double>(), r.at(1).get<double>()};
  }
  book.default_action = driving_action_from_string(j.value("default_action", "Continue"));
  std::set<int> priorities;
  for (const auto& rj : j.at("rules")) {
    DrivingRule r;
    r.name = rj.at("name").get<std::string>();
    r.priority = rj.at("priority").get<int>();
    r.action = driving_action_from_string(rj.at("action").get<std::string>());
    const auto& m = rj.at("match");
    if (m.contains("tags")) r.predicate.tags = m.at("tags").get<std::vector<std::string>>();
    if (m.contains("location")) r.predicate.location = m.at("location").get<std::string>();
    if (m.contains("distance")) {
      r.predicate.distance = m.at("distance").get<std::string>();
      if (!book.distance_buckets.count(*r.predicate.distance)) {
        throw OracleError(r.name + ": unknown distance bucket " + *r.predicate.distance);
      }
    }
    if (m.contains("attrs")) {
      for (const auto& [k, v] : m.at("attrs").items()) r.predicate.attrs[k] = attr_from_json(v);
    }
    if (!priorities.insert(r.priority).second) {
      throw OracleError("duplicate driving rule priority " + std::to_string(r.priority));
    }
    if (!book.action_labels.count(r.action)) throw OracleError(r.name + ": action has no answer option");
    book.rules.push_back(std::move(r));
  }
  if (!book.action_labels.count(book.default_action)) throw OracleError("default action has no answer option");
  std::sort(book.rules.begin(), book.rules.end(),
            [](const DrivingRule& a, const DrivingRule& b) { return a.priority > b.priority; });
  return book;
}

IndoorRuleBook parse_indoor(const nlohmann::json& j) {
  IndoorRuleBook book;
  std::set<std::string> ids;
  for (const auto& rj : j.at("rules")) {
    IndoorRule r;
    r.id = rj.at("id").get<std::string>();
    r.pattern = pattern_from_string(rj.at("pattern").get<std::string>());
    for (const auto& e : rj.at("required_elements")) r.required_elements.insert(e.get<std::string>());
    r.question = rj.at("question").get<std::string>();
    r.options = parse_options(rj.at("options"));
    r.expected = rj.at("expected").get<std::string>();
    if (r.required_elements.empty()) throw OracleError(r.id + ": required_elements must be nonempty");
    if (r.expected != "A" && r.expected != "B") throw OracleError(r.id + ": expected must be A or B");
    if (!ids.insert(r.id).second) throw OracleError("duplicate indoor rule id " + r.id);
    book.rules.push_back(std::move(r));
  }
  std::sort(book.rules.begin(), book.rules.end(), [](const IndoorRule& a, const IndoorRule& b) { return a.id < b.id; });
  return book;
}

bool range_within(const Range& inner, const Range& outer) {
  return outer.low <= inner.low && inner.high <= outer.high;
}

bool node_matches(const DrivingRuleBook& book, const NodePredicate& p, const Node& n) {
  for (const auto& t : p.tags) {
    if (!n.tags.count(t)) return false;
  }
  if (p.location) {
    auto it = n.attrs.find("location");
    const std::string* loc = it == n.attrs.end() ? nullptr : std::get_if<std::string>(&it->second);
    if (!loc) return false;
    if (*p.location == "lane") {
      if (*loc != "lane") return false;
    } else if (*p.location == "offlane") {
      if (*loc == "lane") return false;
    } else if (*loc != *p.location) {
      return false;
    }
  }
  if (p.distance) {
    auto it = n.attrs.find("distance");
    const Range* r = it == n.attrs.end() ? nullptr : std::get_if<Range>(&it->second);
    if (!r) return false;
    if (!range_within(*r, book.distance_buckets.at(*p.distance))) return false;
  }
  for (const auto& [k, v] : p.attrs) {
    auto it = n.attrs.find(k);
    if (it == n.attrs.end() || !(it->second == v)) return false;
  }
  return true;
}

}  // namespace

RuleBook load_rules(const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(source);
  } catch (const nlohmann::json::parse_error& e) {
    throw OracleError(std::string("rules parse error: ") + e.what());
  }
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "priority") return parse_driving(j);
    if (kind == "best_fit") return parse_indoor(j);
    throw OracleError("unknown rule book kind: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw OracleError(std::string("malformed rule book: ") + e.what());
  }
}

RuleBook load_rules_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw OracleError("rules not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_rules(ss.str());
}

std::string render_prompt(const std::string& question, const std::vector<AnswerOption>& options) {
  std::string out = question;
  for (const auto& o : options) out += "\n(" + o.label + ") " + o.text;
  return out;
}

std::optional<std::string> distance_bucket(const DrivingRuleBook& book, const Range& r) {
  for (const auto& [name, b] : book.distance_buckets) {
    if (range_within(r, b)) return name;
  }
  return std::nullopt;
}

ExpectedAnswer label_driving(const DrivingRuleBook& book, const SceneGraph& graph) {
  if (graph.nodes().empty() || graph.count_class("ego") != 1) {
    throw OracleError("driving scene must contain exactly one ego node");
  }
  ExpectedAnswer out;
  out.domain = "driving";
  out.options = book.options;
  out.question_text = render_prompt(book.preamble, book.options);
  out.action = book.default_action;
  for (const auto& rule : book.rules) {
    const auto& nodes = graph.nodes();
    const bool fires = std::any_of(nodes.begin(), nodes.end(), [&](const Node& n) {
      return n.cls != "ego" && node_matches(book, rule.predicate, n);
    });
    if (fires) {
      out.action = rule.action;
      out.rule = rule.name;
      break;
    }
  }
  out.label = book.action_labels.at(*out.action);
  return out;
}

std::set<std::string> scene_elements(const ConceptSet& set, const SceneGraph& graph) {
  auto out = graph.element_tags();
  out.insert(set.begin(), set.end());
  return out;
}

const IndoorRule& match_indoor_rule(const IndoorRuleBook& book, const ConceptSet& set, const SceneGraph& graph) {
  const auto elements = scene_elements(set, graph);
  const IndoorRule* best = nullptr;
  std::size_t best_fit = 0;
  for (const auto& rule : book.rules) {
    const bool covered = std::all_of(rule.required_elements.begin(), rule.required_elements.end(),
                                     [&](const std::string& e) { return elements.count(e) != 0; });
    if (!covered) continue;
    const std::size_t fit = rule.required_elements.size();
    // rules are id-sorted, so strict > keeps the smallest id among equal fits
    if (!best || fit > best_fit) {
      best = &rule;
      best_fit = fit;
    }
  }
  if (!best) throw UnmatchableError("unmatchable composition: " + set.key());
  return *best;
}

Oracle::Oracle(CatalogPtr catalog, RuleBook rules) : catalog_(std::move(catalog)), rules_(std::move(rules)) {}

std::string Oracle::domain() const {
  return std::holds_alternative<DrivingRuleBook>(rules_) ? "driving" : "indoor";
}

ExpectedAnswer Oracle::ground_truth(const ConceptSet& set) const {
  return ground_truth(set, build_anchor(*catalog_, set));
}

ExpectedAnswer Oracle::ground_truth(const ConceptSet& set, const Anchor& anchor) const {
  if (const auto* driving = std::get_if<DrivingRuleBook>(&rules_)) return label_driving(*driving, anchor.graph);
  const auto& book = std::get<IndoorRuleBook>(rules_);
  const auto& rule = match_indoor_rule(book, set, anchor.graph);
  ExpectedAnswer out;
  out.domain = "indoor";
  out.label = rule.expected;
  out.rule = rule.id;
  out.options = rule.options;
  out.question_text = render_prompt(rule.question, rule.options);
  return out;
}

}  // namespace fmd
