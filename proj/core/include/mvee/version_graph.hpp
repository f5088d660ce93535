#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvee/equivalence.hpp"
#include "mvee/region.hpp"

namespace mvee {

struct VersionId {
  std::string method;
  std::size_t ordinal = 0;

  /// `B0.V1`
  std::string label() const;
  static VersionId parse(std::string_view label);
  auto operator<=>(const VersionId&) const = default;
};

enum class VersionOrigin { Initial, SourceModification, AnomalyFork };

std::string_view to_string(VersionOrigin origin);

struct VersionNode {
  VersionId id;
  std::string created_build;
  MarkedRegion region_snapshot;
  VersionOrigin origin = VersionOrigin::Initial;
  std::vector<std::size_t> parents;  // ordinals: fork source, or every merged branch tip

  bool operator==(const VersionNode&) const = default;
};

enum class OutcomeKind { Initial, Unchanged, Modified, Fork, Reverted };

std::string_view to_string(OutcomeKind kind);

struct StepOutcome {
  OutcomeKind kind = OutcomeKind::Initial;
  std::size_t version = 0;           // ordinal the build resolved to
  std::optional<std::size_t> from;   // Fork: the branch tip it was compared against first

  bool operator==(const StepOutcome&) const = default;
};

struct MethodStep {
  std::string build_id;
  StepOutcome outcome;
  bool operator==(const MethodStep&) const = default;
};

struct MethodHistory {
  std::vector<VersionNode> nodes;
  std::vector<MethodStep> steps;
  std::vector<std::size_t> open_branches;  // ordinals, ascending

  /// Open branches in matching order: most recently referenced first, then newest.
  std::vector<std::size_t> matching_order() const;
  const VersionNode& node(std::size_t ordinal) const { return nodes.at(ordinal); }
  bool operator==(const MethodHistory&) const = default;
};

class GraphError : public Error {
 public:
  enum class Kind { UnknownMethod, MissingMethod, DuplicateBuild };
  GraphError(Kind kind, std::string method);

  Kind kind() const { return kind_; }
  const std::string& method() const { return method_; }

 private:
  Kind kind_;
  std::string method_;
};

class PersistError : public Error {
 public:
  using Error::Error;
};

struct MethodInput {
  bool source_modified = false;
  MarkedRegion region;
};

struct MethodResult {
  StepOutcome outcome;
  /// Fork: comparison against the first branch tried; otherwise the matching comparison.
  std::optional<Verdict> verdict;
};

class VersionGraph {
 public:
  VersionGraph() = default;

  /// Adds methods that are not monitored yet; existing histories are kept.
  void configure(const std::vector<std::string>& methods);

  std::map<std::string, MethodResult> record_build(const std::string& build_id,
                                                   const std::map<std::string, MethodInput>& inputs);

  std::vector<VersionId> relevant_versions(const std::string& method) const;

  const MethodHistory& history(const std::string& method) const;
  const std::map<std::string, MethodHistory>& methods() const { return methods_; }
  bool has_method(const std::string& method) const { return methods_.count(method) > 0; }
  bool empty() const;

  /// Build ids that have a step recorded, in recording order.
  std::vector<std::string> builds() const;

  nlohmann::json to_json() const;
  static VersionGraph from_json(const nlohmann::json& j);

  bool operator==(const VersionGraph&) const = default;

 private:
  std::map<std::string, MethodHistory> methods_;
};

nlohmann::json to_json(const MarkedRegion& region);
MarkedRegion marked_region_from_json(const nlohmann::json& j);

/// Git-style text rendering, one block per method.
std::string render_graph_text(const VersionGraph& graph);

}  // namespace mvee
