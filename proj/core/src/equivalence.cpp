#include "mvee/equivalence.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

namespace mvee {

std::string_view to_string(EditCategory category) {
  switch (category) {
    case EditCategory::StructuralViolation: return "StructuralViolation";
    case EditCategory::ImmediateChanged: return "ImmediateChanged";
    case EditCategory::MemoryRefChanged: return "MemoryRefChanged";
    case EditCategory::LabelRenameConsistent: return "LabelRenameConsistent";
    case EditCategory::LabelRenameInconsistent: return "LabelRenameInconsistent";
    case EditCategory::RegisterRenamed: return "RegisterRenamed";
    case EditCategory::GroupReorder: return "GroupReorder";
    case EditCategory::IntraGroupReorder: return "IntraGroupReorder";
  }
  return "?";
}

EditCategory edit_category_from_string(std::string_view s) {
  for (auto c : {EditCategory::StructuralViolation, EditCategory::ImmediateChanged, EditCategory::MemoryRefChanged,
                 EditCategory::LabelRenameConsistent, EditCategory::LabelRenameInconsistent,
                 EditCategory::RegisterRenamed, EditCategory::GroupReorder, EditCategory::IntraGroupReorder}) {
    if (to_string(c) == s) return c;
  }
  throw Error("unknown edit category '" + std::string(s) + "'");
}

bool is_violating(EditCategory category) {
  switch (category) {
    case EditCategory::LabelRenameConsistent:
    case EditCategory::RegisterRenamed:
    case EditCategory::GroupReorder:
      return false;
    default:
      return true;
  }
}

std::string_view to_string(VerdictResult result) {
  return result == VerdictResult::Equivalent ? "Equivalent" : "Anomaly";
}

std::size_t Verdict::violation_count() const {
  return static_cast<std::size_t>(
      std::count_if(classified_edits.begin(), classified_edits.end(), [](const auto& e) { return e.violating; }));
}

nlohmann::json to_json(const ClassifiedEdit& edit) {
  nlohmann::json j{
      {"index", edit.edit_index},
      {"op", edit_op(edit.edit)},
      {"nodeId", edit_node(edit.edit)},
      {"kind", to_string(edit.kind)},
      {"category", to_string(edit.category)},
      {"colorKey", edit.display_color_key()},
      {"violating", edit.violating},
      {"sourceLines", edit.source_lines},
      {"targetLines", edit.target_lines},
      {"detail", edit.detail},
  };
  if (!edit.source_lines.empty()) j["sourceLine"] = edit.source_lines.front();
  if (!edit.target_lines.empty()) j["targetLine"] = edit.target_lines.front();
  return j;
}

nlohmann::json to_json(const Verdict& verdict) {
  auto edits = nlohmann::json::array();
  for (const auto& e : verdict.classified_edits) edits.push_back(to_json(e));
  return nlohmann::json{
      {"section", verdict.section_id},
      {"sourceBuild", verdict.source_build_id},
      {"targetBuild", verdict.target_build_id},
      {"result", to_string(verdict.result)},
      {"edits", std::move(edits)},
  };
}

namespace {

std::string strip_star(const std::string& s) { return !s.empty() && s.front() == '*' ? s.substr(1) : s; }

std::vector<std::size_t> subtree_lines(const Tree& tree, NodeId id) {
  std::set<std::size_t> lines;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const auto& n = tree.node(stack.back());
    stack.pop_back();
    if (n.source_line != 0) lines.insert(n.source_line);
    for (auto c : n.children) stack.push_back(c);
  }
  return {lines.begin(), lines.end()};
}

std::string describe(const Tree& tree, NodeId id) {
  const auto& n = tree.node(id);
  if (n.literal) return *n.literal;
  if (n.kind == NodeKind::Instruction) {
    std::string out;
    for (auto c : n.children) {
      if (!out.empty()) out += ' ';
      out += tree.node(c).literal.value_or("");
    }
    return out;
  }
  if (n.kind == NodeKind::Group) {
    std::string out = "group";
    for (auto c : n.children) {
      const auto& ch = tree.node(c);
      if (ch.kind == NodeKind::LabelDef) out += " " + ch.literal.value_or("") + ":";
    }
    return out + " (" + std::to_string(n.children.size()) + " children)";
  }
  return std::string(to_string(n.kind));
}

// The applied tree mirrors the target node for node in pre-order, which
// links every working id to its target counterpart.
class Context {
 public:
  Context(const EditScript& script, const Tree& source, const Tree& target)
      : script_(script), source_(source), target_(target) {}

  const Tree& source() const { return source_; }
  const Tree& target() const { return target_; }

  std::optional<NodeId> target_of(NodeId working) {
    ensure();
    auto it = to_target_.find(working);
    if (it == to_target_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<NodeId> working_of(NodeId target) {
    ensure();
    auto it = to_working_.find(target);
    if (it == to_working_.end()) return std::nullopt;
    return it->second;
  }

  ClassifiedEdit make(std::size_t index, EditCategory category) {
    const auto& edit = script_.edits[index];
    ClassifiedEdit out;
    out.edit_index = index;
    out.edit = edit;
    out.category = category;
    out.violating = is_violating(category);
    const NodeId id = edit_node(edit);
    if (const auto* ins = std::get_if<InsertEdit>(&edit)) {
      out.kind = ins->node.kind;
    } else {
      out.kind = source_.node(id).kind;
      out.source_lines = subtree_lines(source_, id);
    }
    if (!std::holds_alternative<DeleteEdit>(edit)) {
      if (auto t = target_of(id)) out.target_lines = subtree_lines(target_, *t);
    }
    const std::string kind(to_string(out.kind));
    if (const auto* ins = std::get_if<InsertEdit>(&edit)) {
      auto t = target_of(ins->node.id);
      out.detail = "insert " + kind + (t ? " `" + describe(target_, *t) + "`" : "");
    } else if (std::holds_alternative<DeleteEdit>(edit)) {
      out.detail = "delete " + kind + " `" + describe(source_, id) + "`";
    } else if (const auto* up = std::get_if<UpdateEdit>(&edit)) {
      out.detail = "update " + kind + " `" + up->old_literal + "` -> `" + up->new_literal + "`";
    } else {
      out.detail = "move " + kind + " `" + describe(source_, id) + "`";
    }
    return out;
  }

 private:
  void ensure() {
    if (ready_) return;
    ready_ = true;
    const Tree applied = apply(source_, script_);
    const auto a = applied.preorder();
    const auto t = target_.preorder();
    if (a.size() != t.size()) throw Error("edit script does not reproduce the target tree");
    for (std::size_t k = 0; k < a.size(); ++k) {
      to_target_.emplace(a[k], t[k]);
      to_working_.emplace(t[k], a[k]);
    }
  }

  const EditScript& script_;
  const Tree& source_;
  const Tree& target_;
  bool ready_ = false;
  std::unordered_map<NodeId, NodeId> to_target_;
  std::unordered_map<NodeId, NodeId> to_working_;
};

std::optional<EditCategory> structural_category(const EditScript& script, const Tree& source, std::size_t i) {
  const auto& edit = script.edits[i];
  if (std::holds_alternative<InsertEdit>(edit) || std::holds_alternative<DeleteEdit>(edit)) {
    return EditCategory::StructuralViolation;
  }
  if (const auto* up = std::get_if<UpdateEdit>(&edit)) {
    if (source.node(up->node).kind == NodeKind::Mnemonic) return EditCategory::StructuralViolation;
  }
  return std::nullopt;
}

bool is_label_kind(NodeKind kind) { return kind == NodeKind::LabelDef || kind == NodeKind::OperandLabelRef; }

class LabelRenames {
 public:
  LabelRenames(const EditScript& script, const Tree& source) {
    for (auto id : source.preorder()) {
      const auto& n = source.node(id);
      if (is_label_kind(n.kind) && n.literal) ++occurrences_[strip_star(*n.literal)];
    }
    for (const auto& edit : script.edits) {
      const auto* up = std::get_if<UpdateEdit>(&edit);
      if (up == nullptr || !is_label_kind(source.node(up->node).kind)) continue;
      const auto from = strip_star(up->old_literal);
      targets_[from].insert(strip_star(up->new_literal));
      ++updated_[from];
    }
    // Injectivity of the induced mapping over every source label.
    std::map<std::string, std::set<std::string>> preimage;
    for (const auto& [name, _] : occurrences_) {
      auto it = targets_.find(name);
      if (it == targets_.end()) {
        preimage[name].insert(name);
      } else {
        for (const auto& to : it->second) preimage[to].insert(name);
      }
    }
    for (const auto& [to, froms] : preimage) {
      if (froms.size() > 1) colliding_.insert(froms.begin(), froms.end());
    }
  }

  bool consistent(const std::string& old_literal, const std::string& new_literal) const {
    const auto from = strip_star(old_literal);
    const auto to = strip_star(new_literal);
    if (!is_local_label(from) || !is_local_label(to)) return false;
    if (targets_.at(from).size() != 1) return false;
    if (updated_.at(from) != occurrences_.at(from)) return false;
    return colliding_.count(from) == 0;
  }

 private:
  std::map<std::string, std::size_t> occurrences_;
  std::map<std::string, std::set<std::string>> targets_;
  std::map<std::string, std::size_t> updated_;
  std::set<std::string> colliding_;
};

std::optional<EditCategory> update_category(const EditScript& script, const Tree& source, std::size_t i,
                                            const std::optional<LabelRenames>& labels) {
  const auto* up = std::get_if<UpdateEdit>(&script.edits[i]);
  if (up == nullptr) return std::nullopt;
  const auto& n = source.node(up->node);
  switch (n.kind) {
    case NodeKind::OperandImmediate:
      return EditCategory::ImmediateChanged;
    case NodeKind::OperandRegister:
      return EditCategory::RegisterRenamed;
    case NodeKind::OperandMemoryPart:
      return n.part == MemoryPart::Base || n.part == MemoryPart::Index ? EditCategory::RegisterRenamed
                                                                         : EditCategory::MemoryRefChanged;
    case NodeKind::LabelDef:
    case NodeKind::OperandLabelRef:
      return labels->consistent(up->old_literal, up->new_literal) ? EditCategory::LabelRenameConsistent
                                                                  : EditCategory::LabelRenameInconsistent;
    default:
      return std::nullopt;
  }
}

constexpr std::int64_t kBegin = -1;
constexpr std::int64_t kEnd = -2;
using Link = std::pair<std::int64_t, std::int64_t>;

// Positional links of a region tree, with group ids translated by `id_of`.
template <typename IdOf>
std::set<Link> positional_links(const Tree& tree, IdOf id_of) {
  std::set<Link> links;
  const auto& groups = tree.node(tree.root()).children;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = tree.node(groups[i]);
    if (g.kind != NodeKind::Group) continue;
    const auto self = id_of(groups[i]);
    if (g.entry) links.emplace(kBegin, self);
    if (g.successor == GroupSuccessor::NextGroup && i + 1 < groups.size()) links.emplace(self, id_of(groups[i + 1]));
    if (g.successor == GroupSuccessor::RegionEnd) links.emplace(self, kEnd);
  }
  return links;
}

class GroupLinks {
 public:
  explicit GroupLinks(Context& ctx) {
    auto source_links = positional_links(ctx.source(), [](NodeId id) { return static_cast<std::int64_t>(id); });
    auto target_links = positional_links(ctx.target(), [&](NodeId id) {
      auto w = ctx.working_of(id);
      return w ? static_cast<std::int64_t>(*w) : kEnd - 1 - static_cast<std::int64_t>(id);
    });
    std::vector<Link> changed;
    std::set_symmetric_difference(source_links.begin(), source_links.end(), target_links.begin(), target_links.end(),
                                  std::back_inserter(changed));
    for (const auto& [a, b] : changed) {
      touched_.insert(a);
      touched_.insert(b);
    }
  }

  bool changed(NodeId group) const { return touched_.count(static_cast<std::int64_t>(group)) > 0; }

 private:
  std::set<std::int64_t> touched_;
};

std::optional<EditCategory> reorder_category(const EditScript& script, const Tree& source, std::size_t i,
                                             Context& ctx, std::optional<GroupLinks>& links) {
  const auto* mv = std::get_if<MoveEdit>(&script.edits[i]);
  if (mv == nullptr) return std::nullopt;
  if (source.node(mv->node).kind != NodeKind::Group) return EditCategory::IntraGroupReorder;
  if (!links) links.emplace(ctx);
  return links->changed(mv->node) ? EditCategory::IntraGroupReorder : EditCategory::GroupReorder;
}

bool has_label_updates(const EditScript& script, const Tree& source) {
  return std::any_of(script.edits.begin(), script.edits.end(), [&](const Edit& e) {
    const auto* up = std::get_if<UpdateEdit>(&e);
    return up != nullptr && is_label_kind(source.node(up->node).kind);
  });
}

}  // namespace

std::vector<ClassifiedEdit> check_structural(const EditScript& script, const Tree& source, const Tree& target) {
  Context ctx(script, source, target);
  std::vector<ClassifiedEdit> out;
  for (std::size_t i = 0; i < script.edits.size(); ++i) {
    if (auto c = structural_category(script, source, i)) out.push_back(ctx.make(i, *c));
  }
  return out;
}

std::vector<ClassifiedEdit> check_updates(const EditScript& script, const Tree& source, const Tree& target) {
  Context ctx(script, source, target);
  std::optional<LabelRenames> labels;
  if (has_label_updates(script, source)) labels.emplace(script, source);
  std::vector<ClassifiedEdit> out;
  for (std::size_t i = 0; i < script.edits.size(); ++i) {
    if (auto c = update_category(script, source, i, labels)) out.push_back(ctx.make(i, *c));
  }
  return out;
}

std::vector<ClassifiedEdit> check_reorders(const EditScript& script, const Tree& source, const Tree& target) {
  Context ctx(script, source, target);
  std::optional<GroupLinks> links;
  std::vector<ClassifiedEdit> out;
  for (std::size_t i = 0; i < script.edits.size(); ++i) {
    if (auto c = reorder_category(script, source, i, ctx, links)) out.push_back(ctx.make(i, *c));
  }
  return out;
}

std::vector<ClassifiedEdit> classify(const EditScript& script, const Tree& source, const Tree& target) {
  Context ctx(script, source, target);
  std::optional<LabelRenames> labels;
  if (has_label_updates(script, source)) labels.emplace(script, source);
  std::optional<GroupLinks> links;
  std::vector<ClassifiedEdit> out;
  out.reserve(script.edits.size());
  for (std::size_t i = 0; i < script.edits.size(); ++i) {
    auto c = structural_category(script, source, i);
    if (!c) c = update_category(script, source, i, labels);
    if (!c) c = reorder_category(script, source, i, ctx, links);
    if (!c) throw Error("unclassifiable edit at index " + std::to_string(i));
    out.push_back(ctx.make(i, *c));
  }
  return out;
}

Verdict compare_regions(const MarkedRegion& a, const MarkedRegion& b) {
  if (a.section_id != b.section_id) {
    throw Error("cannot compare section '" + a.section_id + "' with section '" + b.section_id + "'");
  }
  const Tree source = build_tree(a);
  const Tree target = build_tree(b);
  const EditScript script = diff(source, target);

  Verdict v;
  v.section_id = a.section_id;
  v.source_build_id = a.build_id;
  v.target_build_id = b.build_id;
  v.classified_edits = classify(script, source, target);
  v.result = v.violation_count() == 0 ? VerdictResult::Equivalent : VerdictResult::Anomaly;
  return v;
}

}  // namespace mvee
