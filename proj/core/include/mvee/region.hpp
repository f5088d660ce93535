#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvee/asm_model.hpp"

namespace mvee {

/// Assembly-side footprint of the `gen_begin_mark` / `gen_end_mark` macros:
/// calls to `<begin_prefix><ID>` and `<end_prefix><ID>`.
struct MarkerConvention {
  std::string begin_prefix = "mvee_begin_";
  std::string end_prefix = "mvee_end_";

  void validate() const;
  bool operator==(const MarkerConvention&) const = default;
};

class MarkerError : public Error {
 public:
  enum class Kind { Unmatched, Duplicate, Missing };
  MarkerError(Kind kind, std::string section_id);

  Kind kind() const { return kind_; }
  const std::string& section_id() const { return section_id_; }

 private:
  Kind kind_;
  std::string section_id_;
};

class CfgError : public Error {
 public:
  CfgError(std::string label, std::size_t line);
  const std::string& label() const { return label_; }
  std::size_t line() const { return line_; }

 private:
  std::string label_;
  std::size_t line_;
};

struct MarkerPair {
  std::string section_id;
  std::size_t begin_line = 0;  // AsmLine::index of the begin call
  std::size_t end_line = 0;    // AsmLine::index of the end call
  bool operator==(const MarkerPair&) const = default;
};

/// Every begin/end pair in the file, ordered by begin line.
std::vector<MarkerPair> find_markers(const AsmFile& file, const MarkerConvention& convention = {});

struct BasicBlock {
  std::vector<std::size_t> lines;       // AsmLine indices of the block's instructions
  std::vector<std::size_t> successors;  // block indices; conditional jumps list target then fallthrough
};

struct Cfg {
  std::vector<BasicBlock> blocks;
  std::vector<std::optional<std::size_t>> block_of_line;  // indexed by AsmLine::index
  /// Physically next instruction in the same section, per AsmLine index.
  std::vector<std::optional<std::size_t>> next_instruction;
  /// For label lines: the instruction line the label lands on.
  std::vector<std::optional<std::size_t>> label_instruction;
  std::map<std::string, std::size_t> labels;  // name -> defining AsmLine index
  std::map<std::string, std::vector<std::size_t>> numeric_labels;

  /// Defining line of `name` as referenced from `from_line` (handles `1f`/`1b`).
  std::optional<std::size_t> resolve(const std::string& name, std::size_t from_line) const;
};

Cfg build_cfg(const AsmFile& file);

enum class Terminator {
  UnconditionalJump,
  Return,
  Call,
  IndirectJump,
  IndirectCall,
  Fallthrough,  // falls into the following group
  RegionEnd,    // falls into the end mark
};

std::string_view to_string(Terminator t);
Terminator terminator_from_string(std::string_view s);

/// Where control goes when a group's last instruction falls through.
enum class GroupSuccessor {
  None,       // ends in a jump or return
  NextGroup,  // positional: the group that follows it
  RegionEnd,  // positional: the end mark
};

std::string_view to_string(GroupSuccessor s);
GroupSuccessor group_successor_from_string(std::string_view s);

struct RegionInstruction {
  Instruction instruction;
  std::size_t line = 0;  // 1-based line in the build's .s file
  bool operator==(const RegionInstruction&) const = default;
};

struct FallthroughGroup {
  std::vector<std::string> leading_labels;
  std::vector<RegionInstruction> instructions;
  Terminator terminator = Terminator::RegionEnd;
  GroupSuccessor successor = GroupSuccessor::RegionEnd;
  std::size_t label_line = 0;  // line of the first leading label, 0 if none

  /// BLAKE2b-128 over the rendered instructions and labels, hex encoded.
  std::string fingerprint() const;
  bool operator==(const FallthroughGroup&) const = default;
};

struct MarkedRegion {
  std::string section_id;
  std::string build_id;
  std::vector<FallthroughGroup> groups;
  std::size_t entry_group = 0;
  bool end_reachable = true;

  std::size_t instruction_count() const;
  bool operator==(const MarkedRegion&) const = default;
};

class RegionError : public Error {
 public:
  enum class Kind { EndUnreachable };
  RegionError(Kind kind, std::string section_id);
  Kind kind() const { return kind_; }
  const std::string& section_id() const { return section_id_; }

 private:
  Kind kind_;
  std::string section_id_;
};

/// Warning-grade error for a region whose end mark was never reached.
std::optional<RegionError> region_warning(const MarkedRegion& region);

/// Extracts the section delimited by the `section_id` marks. When no path
/// reaches the end mark the region is still returned with
/// `end_reachable == false`.
MarkedRegion extract_region(const AsmFile& file, const std::string& section_id,
                            const MarkerConvention& convention = {});
MarkedRegion extract_region(const AsmFile& file, const Cfg& cfg, const MarkerPair& markers,
                            const MarkerConvention& convention = {});

}  // namespace mvee
