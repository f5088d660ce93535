#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvee/region.hpp"
#include "mvee/tree_diff.hpp"

namespace mvee {

enum class EditCategory {
  StructuralViolation,
  ImmediateChanged,
  MemoryRefChanged,
  LabelRenameConsistent,
  LabelRenameInconsistent,
  RegisterRenamed,
  GroupReorder,
  IntraGroupReorder,
};

std::string_view to_string(EditCategory category);
EditCategory edit_category_from_string(std::string_view s);
bool is_violating(EditCategory category);

struct ClassifiedEdit {
  std::size_t edit_index = 0;  // position in the edit script
  Edit edit;
  EditCategory category = EditCategory::StructuralViolation;
  bool violating = true;
  NodeKind kind = NodeKind::Region;
  std::vector<std::size_t> source_lines;  // lines of the edited subtree in the source build's .s
  std::vector<std::size_t> target_lines;
  std::string detail;

  std::string_view display_color_key() const { return to_string(category); }
};

enum class VerdictResult { Equivalent, Anomaly };

std::string_view to_string(VerdictResult result);

struct Verdict {
  VerdictResult result = VerdictResult::Equivalent;
  std::vector<ClassifiedEdit> classified_edits;
  std::string section_id;
  std::string source_build_id;
  std::string target_build_id;

  bool equivalent() const { return result == VerdictResult::Equivalent; }
  std::size_t violation_count() const;
};

nlohmann::json to_json(const ClassifiedEdit& edit);
nlohmann::json to_json(const Verdict& verdict);

/// Inserts, deletes and mnemonic updates.
std::vector<ClassifiedEdit> check_structural(const EditScript& script, const Tree& source, const Tree& target);

/// Literal updates on operands and labels.
std::vector<ClassifiedEdit> check_updates(const EditScript& script, const Tree& source, const Tree& target);

/// Moves. A group move is control-flow neutral unless it changes one of the
/// positional links: begin mark to entry group, fallthrough into the next
/// group, or fallthrough into the end mark.
std::vector<ClassifiedEdit> check_reorders(const EditScript& script, const Tree& source, const Tree& target);

/// Every edit of `script` classified once, in script order.
std::vector<ClassifiedEdit> classify(const EditScript& script, const Tree& source, const Tree& target);

Verdict compare_regions(const MarkedRegion& a, const MarkedRegion& b);

}  // namespace mvee
