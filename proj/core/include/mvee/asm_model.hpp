#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mvee/error.hpp"

// Typed model of GNU-as x86-64 assembly in AT&T syntax, as emitted by `gcc -S`.

namespace mvee {

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string reason);

  /// 1-based line in the assembly text.
  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

struct RegisterOperand {
  std::string name;  // lowercase, with the leading '%'
  bool operator==(const RegisterOperand&) const = default;
};

struct ImmediateOperand {
  std::optional<std::int64_t> value;  // empty for symbolic immediates such as `$.LC0`
  std::string text;                   // verbatim token, including '$'
  bool operator==(const ImmediateOperand&) const = default;
};

struct MemoryOperand {
  std::optional<std::string> segment;
  std::optional<std::string> displacement;
  std::optional<std::string> base;
  std::optional<std::string> index;
  std::optional<int> scale;  // one of 1, 2, 4, 8
  bool operator==(const MemoryOperand&) const = default;
};

struct LabelRefOperand {
  std::string name;
  bool operator==(const LabelRefOperand&) const = default;
};

struct Operand {
  std::variant<RegisterOperand, ImmediateOperand, MemoryOperand, LabelRefOperand> kind;
  std::string raw;
  bool indirect = false;  // AT&T '*' prefix

  bool is_register() const { return std::holds_alternative<RegisterOperand>(kind); }
  bool is_immediate() const { return std::holds_alternative<ImmediateOperand>(kind); }
  bool is_memory() const { return std::holds_alternative<MemoryOperand>(kind); }
  bool is_label() const { return std::holds_alternative<LabelRefOperand>(kind); }

  bool operator==(const Operand&) const = default;
};

enum class ControlKind {
  Fallthrough,
  ConditionalJump,
  UnconditionalJump,
  IndirectJump,
  Call,
  IndirectCall,
  Return,
};

std::string_view to_string(ControlKind kind);

struct ControlFlow {
  ControlKind kind = ControlKind::Fallthrough;
  std::string target;  // label or symbol for direct jumps and calls

  bool operator==(const ControlFlow&) const = default;
};

struct Instruction {
  std::vector<std::string> prefixes;  // rep, lock, notrack, ...
  std::string mnemonic;               // lowercase, suffix retained
  std::vector<Operand> operands;
  ControlFlow control;

  /// Prefixes and mnemonic joined by single spaces.
  std::string full_mnemonic() const;
  /// `mnemonic op1, op2` using each operand's raw text.
  std::string render() const;

  bool operator==(const Instruction&) const = default;
};

struct LabelDef {
  std::string name;
  bool operator==(const LabelDef&) const = default;
};
struct Directive {
  std::string text;
  bool operator==(const Directive&) const = default;
};
struct Comment {
  std::string text;
  bool operator==(const Comment&) const = default;
};
struct Blank {
  bool operator==(const Blank&) const = default;
};

struct AsmLine {
  std::size_t index = 0;        // dense, 0-based
  std::size_t source_line = 0;  // 1-based line of the text this was parsed from
  std::variant<Instruction, LabelDef, Directive, Comment, Blank> content;
  std::string text;  // original line, for display

  const Instruction* instruction() const { return std::get_if<Instruction>(&content); }
  const LabelDef* label() const { return std::get_if<LabelDef>(&content); }
  const Directive* directive() const { return std::get_if<Directive>(&content); }
};

struct AsmFile {
  std::filesystem::path path;
  std::string build_id;
  std::vector<AsmLine> lines;
  std::vector<std::string> duplicate_labels;
};

AsmFile parse_asm_file(std::string_view text, std::string build_id,
                       std::filesystem::path path = {});

AsmFile load_asm_file(const std::filesystem::path& path, std::string build_id);

/// Parses a single instruction statement (no label, no comment).
Instruction parse_instruction(std::string_view text, std::size_t line = 0);

/// `branch_context` selects LabelRef for bare symbols (jump and call operands).
Operand parse_operand(std::string_view text, bool branch_context, std::size_t line = 0);

ControlFlow classify_control(std::string_view mnemonic, std::span<const Operand> operands);

bool is_branch_mnemonic(std::string_view mnemonic);

/// `.L*` and numeric labels are assembler-local and may be renumbered freely.
bool is_local_label(std::string_view name);

}  // namespace mvee
