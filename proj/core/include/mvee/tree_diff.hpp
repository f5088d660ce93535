#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvee/error.hpp"
#include "mvee/region.hpp"

// Typed trees over marked regions and a linear-time edit-script differ
// in the style of truediff.

namespace mvee {

enum class NodeKind {
  Region,
  Group,
  Instruction,
  Mnemonic,
  OperandRegister,
  OperandImmediate,
  OperandMemoryPart,
  OperandLabelRef,
  LabelDef,
};

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view s);
bool is_leaf_kind(NodeKind kind);
bool is_operand_kind(NodeKind kind);

enum class MemoryPart { None, Segment, Displacement, Base, Index, Scale };

std::string_view to_string(MemoryPart part);
MemoryPart memory_part_from_string(std::string_view s);

using NodeId = std::uint32_t;
using Digest128 = std::array<std::uint8_t, 16>;

struct TreeNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::Region;
  MemoryPart part = MemoryPart::None;
  std::optional<std::string> literal;
  std::vector<NodeId> children;
  std::optional<NodeId> parent;

  // Annotations. Never hashed and never compared by `isomorphic`.
  std::size_t source_line = 0;
  bool entry = false;  // groups: contains the first region instruction
  Terminator terminator = Terminator::RegionEnd;
  GroupSuccessor successor = GroupSuccessor::None;
};

/// Arena of nodes addressed by id. Ids produced by `build_tree` equal
/// pre-order indices; edit application may add fresh ids.
class Tree {
 public:
  Tree() = default;

  NodeId root() const { return root_; }
  bool empty() const { return slot_.empty(); }
  std::size_t size() const { return slot_.size(); }
  bool contains(NodeId id) const { return slot_.count(id) > 0; }

  const TreeNode& node(NodeId id) const;
  TreeNode& node(NodeId id);

  /// Adds a detached node; the first node added becomes the root.
  TreeNode& add(TreeNode node);
  /// Removes `id` and its whole subtree.
  void erase_subtree(NodeId id);

  std::vector<NodeId> preorder() const;
  NodeId max_id() const;

 private:
  NodeId root_ = 0;
  std::vector<TreeNode> nodes_;
  std::vector<bool> live_;
  std::unordered_map<NodeId, std::size_t> slot_;
};

struct SubtreeHash {
  Digest128 structure{};  // kind, part and child structure hashes
  Digest128 full{};       // additionally the literal and child full hashes
  bool operator==(const SubtreeHash&) const = default;
};

/// Hashes of every node, keyed by id.
std::unordered_map<NodeId, SubtreeHash> compute_hashes(const Tree& tree);

/// Region -> Groups -> (LabelDefs, Instructions) -> (Mnemonic, operand leaves).
/// Memory operands expand to one OperandMemoryPart leaf per present part.
Tree build_tree(const MarkedRegion& region);

/// Kind, part, literal and child order equality.
bool isomorphic(const Tree& a, const Tree& b);

/// Payload of an Insert: a fresh node together with its fresh descendants.
struct NewNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::Region;
  MemoryPart part = MemoryPart::None;
  std::optional<std::string> literal;
  std::size_t source_line = 0;
  std::vector<NewNode> children;

  std::size_t size() const;
  bool operator==(const NewNode&) const = default;
};

struct InsertEdit {
  NewNode node;
  NodeId parent = 0;
  std::size_t position = 0;
  bool operator==(const InsertEdit&) const = default;
};

struct DeleteEdit {
  NodeId node = 0;
  bool operator==(const DeleteEdit&) const = default;
};

struct UpdateEdit {
  NodeId node = 0;
  std::string old_literal;
  std::string new_literal;
  bool operator==(const UpdateEdit&) const = default;
};

/// The node is detached first; `position` indexes the new parent's
/// child list without it.
struct MoveEdit {
  NodeId node = 0;
  NodeId parent = 0;
  std::size_t position = 0;
  bool operator==(const MoveEdit&) const = default;
};

using Edit = std::variant<InsertEdit, DeleteEdit, UpdateEdit, MoveEdit>;

std::string_view edit_op(const Edit& edit);
/// Id of the node an edit acts on (the inserted root for inserts).
NodeId edit_node(const Edit& edit);

struct EditScript {
  std::vector<Edit> edits;

  bool empty() const { return edits.empty(); }
  std::size_t size() const { return edits.size(); }
  bool operator==(const EditScript&) const = default;
};

/// `{"edits":[{"op", "nodeId", "parentId"?, "position"?, "kind"?, ...}]}`.
/// `kind` is only known for inserts unless `source` is given.
nlohmann::json to_json(const EditScript& script, const Tree* source = nullptr);

/// Edit script turning `source` into a tree isomorphic to `target`. Every
/// source node is kept, moved or deleted at most once.
EditScript diff(const Tree& source, const Tree& target);

class ApplyError : public Error {
 public:
  enum class Kind { DanglingNodeId, DuplicateNodeId, InvalidPosition, LiteralMismatch, InvalidTarget };
  ApplyError(Kind kind, std::size_t edit_index, std::string detail);

  Kind kind() const { return kind_; }
  std::size_t edit_index() const { return edit_index_; }

 private:
  Kind kind_;
  std::size_t edit_index_;
};

/// Applies `script` to a copy of `source`, edit by edit.
Tree apply(const Tree& source, const EditScript& script);

}  // namespace mvee
