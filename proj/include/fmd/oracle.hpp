#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "fmd/catalog.hpp"
#include "fmd/scene.hpp"

namespace fmd {

enum class DrivingAction { EmergencyStop, SlowDown, Continue };

std::string to_string(DrivingAction a);
DrivingAction driving_action_from_string(const std::string& s);

struct AnswerOption {
  std::string label;  // "A", "B", ...
  std::string text;
  friend bool operator==(const AnswerOption&, const AnswerOption&) = default;
};

/// Query over non-root nodes. A rule fires when at least one node satisfies every field.
struct NodePredicate {
  std::vector<std::string> tags;
  std::optional<std::string> location;  // "lane", "offlane", or a literal location value
  std::optional<std::string> distance;  // bucket name
  AttrMap attrs;                        // equality constraints
};

struct DrivingRule {
  std::string name;
  int priority = 0;  // higher wins
  NodePredicate predicate;
  DrivingAction action = DrivingAction::Continue;
};

struct DrivingRuleBook {
  std::string preamble;
  std::vector<AnswerOption> options;
  std::map<DrivingAction, std::string> action_labels;
  std::map<std::string, Range> distance_buckets;
  std::vector<DrivingRule> rules;  // priority descending
  DrivingAction default_action = DrivingAction::Continue;
};

enum class LogicPattern { ModusPonens, ModusTollens, DisjunctiveSyllogism };

struct IndoorRule {
  std::string id;
  LogicPattern pattern = LogicPattern::ModusPonens;
  std::set<std::string> required_elements;
  std::string question;
  std::vector<AnswerOption> options;
  std::string expected;
};

struct IndoorRuleBook {
  std::vector<IndoorRule> rules;  // sorted by id
};

using RuleBook = std::variant<DrivingRuleBook, IndoorRuleBook>;

RuleBook load_rules(const std::string& source);
RuleBook load_rules_file(const std::filesystem::path& path);

struct ExpectedAnswer {
  std::string domain;  // "driving" | "indoor"
  std::string label;   // expected option label
  std::optional<DrivingAction> action;
  std::string rule;  // fired rule name / matched rule id; empty for the driving default
  std::string question_text;
  std::vector<AnswerOption> options;
};

/// Full prompt: question line followed by one "(X) text" line per option.
std::string render_prompt(const std::string& question, const std::vector<AnswerOption>& options);

/// Bucket containing the whole range, if any.
std::optional<std::string> distance_bucket(const DrivingRuleBook& book, const Range& r);

ExpectedAnswer label_driving(const DrivingRuleBook& book, const SceneGraph& graph);

/// Scene elements are node tags plus the concept ids themselves.
std::set<std::string> scene_elements(const ConceptSet& set, const SceneGraph& graph);

/// Highest element-fit matching rule; ties go to the smaller rule id.
/// Throws UnmatchableError when nothing matches.
const IndoorRule& match_indoor_rule(const IndoorRuleBook& book, const ConceptSet& set, const SceneGraph& graph);

class Oracle {
 public:
  Oracle(CatalogPtr catalog, RuleBook rules);

  const Catalog& catalog() const { return *catalog_; }
  const CatalogPtr& catalog_ptr() const { return catalog_; }
  const RuleBook& rules() const { return rules_; }
  std::string domain() const;

  /// Builds the anchor graph and dispatches to the domain's rule engine.
  ExpectedAnswer ground_truth(const ConceptSet& set) const;
  /// Same, reusing an anchor already built for set.
  ExpectedAnswer ground_truth(const ConceptSet& set, const Anchor& anchor) const;

 private:
  CatalogPtr catalog_;
  RuleBook rules_;
};

}  // namespace fmd
