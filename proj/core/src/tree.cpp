#include <algorithm>
#include <unordered_set>

#include "digest.hpp"
#include "mvee/tree_diff.hpp"
#include "tree_ops.hpp"

namespace mvee {

namespace {

constexpr NodeKind kAllKinds[] = {
    NodeKind::Region,           NodeKind::Group,           NodeKind::Instruction,
    NodeKind::Mnemonic,         NodeKind::OperandRegister, NodeKind::OperandImmediate,
    NodeKind::OperandMemoryPart, NodeKind::OperandLabelRef, NodeKind::LabelDef,
};

constexpr MemoryPart kAllParts[] = {MemoryPart::None,  MemoryPart::Segment, MemoryPart::Displacement,
                                    MemoryPart::Base,  MemoryPart::Index,   MemoryPart::Scale};

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Region: return "Region";
    case NodeKind::Group: return "Group";
    case NodeKind::Instruction: return "Instruction";
    case NodeKind::Mnemonic: return "Mnemonic";
    case NodeKind::OperandRegister: return "OperandRegister";
    case NodeKind::OperandImmediate: return "OperandImmediate";
    case NodeKind::OperandMemoryPart: return "OperandMemoryPart";
    case NodeKind::OperandLabelRef: return "OperandLabelRef";
    case NodeKind::LabelDef: return "LabelDef";
  }
  return "?";
}

NodeKind node_kind_from_string(std::string_view s) {
  for (auto k : kAllKinds) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown node kind '" + std::string(s) + "'");
}

bool is_leaf_kind(NodeKind kind) {
  return kind != NodeKind::Region && kind != NodeKind::Group && kind != NodeKind::Instruction;
}

bool is_operand_kind(NodeKind kind) {
  return kind == NodeKind::OperandRegister || kind == NodeKind::OperandImmediate ||
         kind == NodeKind::OperandMemoryPart || kind == NodeKind::OperandLabelRef;
}

std::string_view to_string(MemoryPart part) {
  switch (part) {
    case MemoryPart::None: return "none";
    case MemoryPart::Segment: return "segment";
    case MemoryPart::Displacement: return "displacement";
    case MemoryPart::Base: return "base";
    case MemoryPart::Index: return "index";
    case MemoryPart::Scale: return "scale";
  }
  return "?";
}

MemoryPart memory_part_from_string(std::string_view s) {
  for (auto p : kAllParts) {
    if (to_string(p) == s) return p;
  }
  throw Error("unknown memory part '" + std::string(s) + "'");
}

const TreeNode& Tree::node(NodeId id) const {
  auto it = slot_.find(id);
  if (it == slot_.end()) throw Error("no node with id " + std::to_string(id));
  return nodes_[it->second];
}

TreeNode& Tree::node(NodeId id) {
  return const_cast<TreeNode&>(static_cast<const Tree&>(*this).node(id));
}

TreeNode& Tree::add(TreeNode node) {
  if (contains(node.id)) throw Error("duplicate node id " + std::to_string(node.id));
  if (slot_.empty()) root_ = node.id;
  slot_.emplace(node.id, nodes_.size());
  nodes_.push_back(std::move(node));
  live_.push_back(true);
  return nodes_.back();
}

void Tree::erase_subtree(NodeId id) {
  auto& n = node(id);
  if (n.parent) {
    auto& siblings = node(*n.parent).children;
    siblings.erase(std::find(siblings.begin(), siblings.end(), id));
  }
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const auto cur = stack.back();
    stack.pop_back();
    const auto s = slot_.at(cur);
    for (auto c : nodes_[s].children) stack.push_back(c);
    live_[s] = false;
    slot_.erase(cur);
  }
}

std::vector<NodeId> Tree::preorder() const {
  std::vector<NodeId> out;
  if (empty()) return out;
  out.reserve(size());
  std::vector<NodeId> stack{root_};
  while (!stack.empty()) {
    const auto id = stack.back();
    stack.pop_back();
    out.push_back(id);
    const auto& ch = node(id).children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

NodeId Tree::max_id() const {
  NodeId m = 0;
  for (const auto& [id, _] : slot_) m = std::max(m, id);
  return m;
}

std::unordered_map<NodeId, SubtreeHash> compute_hashes(const Tree& tree) {
  std::unordered_map<NodeId, SubtreeHash> out;
  const auto order = tree.preorder();
  out.reserve(order.size());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto& n = tree.node(*it);
    const char tag[2] = {static_cast<char>(n.kind), static_cast<char>(n.part)};
    detail::Blake2b<16> structure;
    detail::Blake2b<16> full;
    structure.update(std::string_view(tag, 2));
    full.update(std::string_view(tag, 2));
    full.field(n.literal ? "1" : "0").field(n.literal.value_or(""));
    for (auto c : n.children) {
      const auto& ch = out.at(c);
      structure.update(ch.structure);
      full.update(ch.full);
    }
    out.emplace(*it, SubtreeHash{structure.finish(), full.finish()});
  }
  return out;
}

namespace {

class TreeBuilder {
 public:
  Tree build(const MarkedRegion& region) {
    add(NodeKind::Region, MemoryPart::None, std::nullopt, std::nullopt, 0);
    for (std::size_t gi = 0; gi < region.groups.size(); ++gi) {
      const auto& g = region.groups[gi];
      const std::size_t line = g.label_line != 0 ? g.label_line
                               : g.instructions.empty() ? 0
                                                        : g.instructions.front().line;
      auto& group = add(NodeKind::Group, MemoryPart::None, std::nullopt, 0, line);
      group.entry = gi == region.entry_group;
      group.terminator = g.terminator;
      group.successor = g.successor;
      const NodeId gid = group.id;
      for (const auto& label : g.leading_labels) add(NodeKind::LabelDef, MemoryPart::None, label, gid, line);
      for (const auto& ri : g.instructions) add_instruction(ri, gid);
    }
    return std::move(tree_);
  }

 private:
  TreeNode& add(NodeKind kind, MemoryPart part, std::optional<std::string> literal, std::optional<NodeId> parent,
                std::size_t line) {
    TreeNode n;
    n.id = next_++;
    n.kind = kind;
    n.part = part;
    n.literal = std::move(literal);
    n.parent = parent;
    n.source_line = line;
    if (parent) tree_.node(*parent).children.push_back(n.id);
    return tree_.add(std::move(n));
  }

  void add_instruction(const RegionInstruction& ri, NodeId group) {
    const auto line = ri.line;
    const NodeId id = add(NodeKind::Instruction, MemoryPart::None, std::nullopt, group, line).id;
    add(NodeKind::Mnemonic, MemoryPart::None, ri.instruction.full_mnemonic(), id, line);
    for (const auto& op : ri.instruction.operands) {
      const std::string star = op.indirect ? "*" : "";
      if (const auto* r = std::get_if<RegisterOperand>(&op.kind)) {
        add(NodeKind::OperandRegister, MemoryPart::None, star + r->name, id, line);
      } else if (const auto* imm = std::get_if<ImmediateOperand>(&op.kind)) {
        add(NodeKind::OperandImmediate, MemoryPart::None, star + imm->text, id, line);
      } else if (const auto* l = std::get_if<LabelRefOperand>(&op.kind)) {
        add(NodeKind::OperandLabelRef, MemoryPart::None, star + l->name, id, line);
      } else {
        const auto& m = std::get<MemoryOperand>(op.kind);
        std::string prefix = star;
        auto part = [&](MemoryPart p, const std::optional<std::string>& value) {
          if (!value) return;
          add(NodeKind::OperandMemoryPart, p, prefix + *value, id, line);
          prefix.clear();
        };
        part(MemoryPart::Segment, m.segment);
        part(MemoryPart::Displacement, m.displacement);
        part(MemoryPart::Base, m.base);
        part(MemoryPart::Index, m.index);
        part(MemoryPart::Scale, m.scale ? std::optional<std::string>(std::to_string(*m.scale)) : std::nullopt);
      }
    }
  }

  Tree tree_;
  NodeId next_ = 0;
};

}  // namespace

Tree build_tree(const MarkedRegion& region) { return TreeBuilder().build(region); }

bool isomorphic(const Tree& a, const Tree& b) {
  if (a.empty() || b.empty()) return a.empty() == b.empty();
  if (a.size() != b.size()) return false;
  std::vector<std::pair<NodeId, NodeId>> stack{{a.root(), b.root()}};
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    const auto& nx = a.node(x);
    const auto& ny = b.node(y);
    if (nx.kind != ny.kind || nx.part != ny.part || nx.literal != ny.literal ||
        nx.children.size() != ny.children.size()) {
      return false;
    }
    for (std::size_t i = 0; i < nx.children.size(); ++i) stack.emplace_back(nx.children[i], ny.children[i]);
  }
  return true;
}

std::size_t NewNode::size() const {
  std::size_t n = 1;
  for (const auto& c : children) n += c.size();
  return n;
}

std::string_view edit_op(const Edit& edit) {
  switch (edit.index()) {
    case 0: return "insert";
    case 1: return "delete";
    case 2: return "update";
    default: return "move";
  }
}

NodeId edit_node(const Edit& edit) {
  return std::visit(
      [](const auto& e) -> NodeId {
        if constexpr (std::is_same_v<std::decay_t<decltype(e)>, InsertEdit>) {
          return e.node.id;
        } else {
          return e.node;
        }
      },
      edit);
}

namespace {

nlohmann::json new_node_json(const NewNode& n) {
  nlohmann::json j{{"nodeId", n.id}, {"kind", to_string(n.kind)}};
  if (n.part != MemoryPart::None) j["part"] = to_string(n.part);
  if (n.literal) j["literal"] = *n.literal;
  auto children = nlohmann::json::array();
  for (const auto& c : n.children) children.push_back(new_node_json(c));
  j["children"] = std::move(children);
  return j;
}

}  // namespace

nlohmann::json to_json(const EditScript& script, const Tree* source) {
  auto edits = nlohmann::json::array();
  for (const auto& edit : script.edits) {
    nlohmann::json j{{"op", edit_op(edit)}, {"nodeId", edit_node(edit)}};
    if (const auto* ins = std::get_if<InsertEdit>(&edit)) {
      j["parentId"] = ins->parent;
      j["position"] = ins->position;
      j["kind"] = to_string(ins->node.kind);
      if (ins->node.literal) j["literal"] = *ins->node.literal;
      j["subtree"] = new_node_json(ins->node);
    } else {
      if (source != nullptr && source->contains(edit_node(edit))) {
        const auto& n = source->node(edit_node(edit));
        j["kind"] = to_string(n.kind);
        if (n.part != MemoryPart::None) j["part"] = to_string(n.part);
        if (n.literal && !std::holds_alternative<UpdateEdit>(edit)) j["literal"] = *n.literal;
      }
      if (const auto* up = std::get_if<UpdateEdit>(&edit)) {
        j["oldLiteral"] = up->old_literal;
        j["newLiteral"] = up->new_literal;
      } else if (const auto* mv = std::get_if<MoveEdit>(&edit)) {
        j["parentId"] = mv->parent;
        j["position"] = mv->position;
      }
    }
    edits.push_back(std::move(j));
  }
  return nlohmann::json{{"edits", std::move(edits)}};
}

ApplyError::ApplyError(Kind kind, std::size_t edit_index, std::string detail)
    : Error("edit " + std::to_string(edit_index) + ": " + detail), kind_(kind), edit_index_(edit_index) {}

namespace detail {

namespace {

void collect_ids(const NewNode& n, std::unordered_set<NodeId>& seen, const Tree& tree, std::size_t index) {
  if (tree.contains(n.id) || !seen.insert(n.id).second) {
    throw ApplyError(ApplyError::Kind::DuplicateNodeId, index, "node id " + std::to_string(n.id) + " already in use");
  }
  for (const auto& c : n.children) collect_ids(c, seen, tree, index);
}

void add_new(Tree& tree, const NewNode& n, NodeId parent) {
  TreeNode t;
  t.id = n.id;
  t.kind = n.kind;
  t.part = n.part;
  t.literal = n.literal;
  t.parent = parent;
  t.source_line = n.source_line;
  for (const auto& c : n.children) t.children.push_back(c.id);
  tree.add(std::move(t));
  for (const auto& c : n.children) add_new(tree, c, n.id);
}

const TreeNode& existing(const Tree& tree, NodeId id, std::size_t index) {
  if (!tree.contains(id)) {
    throw ApplyError(ApplyError::Kind::DanglingNodeId, index, "unknown node id " + std::to_string(id));
  }
  return tree.node(id);
}

}  // namespace

void apply_edit(Tree& tree, const Edit& edit, std::size_t index) {
  if (const auto* ins = std::get_if<InsertEdit>(&edit)) {
    const auto& parent = existing(tree, ins->parent, index);
    if (ins->position > parent.children.size()) {
      throw ApplyError(ApplyError::Kind::InvalidPosition, index, "position out of range");
    }
    std::unordered_set<NodeId> seen;
    collect_ids(ins->node, seen, tree, index);
    add_new(tree, ins->node, ins->parent);
    auto& ch = tree.node(ins->parent).children;
    ch.insert(ch.begin() + static_cast<std::ptrdiff_t>(ins->position), ins->node.id);
  } else if (const auto* del = std::get_if<DeleteEdit>(&edit)) {
    existing(tree, del->node, index);
    if (del->node == tree.root()) throw ApplyError(ApplyError::Kind::InvalidTarget, index, "cannot delete the root");
    tree.erase_subtree(del->node);
  } else if (const auto* up = std::get_if<UpdateEdit>(&edit)) {
    existing(tree, up->node, index);
    auto& n = tree.node(up->node);
    if (!n.literal) throw ApplyError(ApplyError::Kind::InvalidTarget, index, "node has no literal");
    if (*n.literal != up->old_literal) {
      throw ApplyError(ApplyError::Kind::LiteralMismatch, index,
                       "expected literal '" + up->old_literal + "', found '" + *n.literal + "'");
    }
    n.literal = up->new_literal;
  } else {
    const auto& mv = std::get<MoveEdit>(edit);
    existing(tree, mv.node, index);
    existing(tree, mv.parent, index);
    if (mv.node == tree.root()) throw ApplyError(ApplyError::Kind::InvalidTarget, index, "cannot move the root");
    for (std::optional<NodeId> p = mv.parent; p; p = tree.node(*p).parent) {
      if (*p == mv.node) throw ApplyError(ApplyError::Kind::InvalidTarget, index, "move into own subtree");
    }
    auto& n = tree.node(mv.node);
    auto& old_siblings = tree.node(*n.parent).children;
    old_siblings.erase(std::find(old_siblings.begin(), old_siblings.end(), mv.node));
    auto& ch = tree.node(mv.parent).children;
    if (mv.position > ch.size()) {
      // Restore is unnecessary: apply() works on a copy and rethrows.
      throw ApplyError(ApplyError::Kind::InvalidPosition, index, "position out of range");
    }
    ch.insert(ch.begin() + static_cast<std::ptrdiff_t>(mv.position), mv.node);
    n.parent = mv.parent;
  }
}

}  // namespace detail

Tree apply(const Tree& source, const EditScript& script) {
  Tree out = source;
  for (std::size_t i = 0; i < script.edits.size(); ++i) detail::apply_edit(out, script.edits[i], i);
  return out;
}

}  // namespace mvee
