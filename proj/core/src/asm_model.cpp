#include "mvee/asm_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace mvee {

ParseError::ParseError(std::size_t line, std::string reason)
    : Error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(std::move(reason)) {}

namespace {

constexpr std::array kPrefixes = {"rep",   "repe",  "repz",  "repne",   "repnz",    "lock",    "notrack",
                                  "bnd",   "data16", "addr32", "rex",   "rex64",    "xacquire", "xrelease"};

constexpr std::array kConditionCodes = {"o",  "no", "b",   "c",   "nae", "ae", "nb", "nc", "e",  "z",
                                        "ne", "nz", "be",  "na",  "a",   "nbe", "s", "ns", "p",  "pe",
                                        "np", "po", "l",   "nge", "ge",  "nl", "le", "ng", "g",  "nle"};

constexpr std::array kOtherConditional = {"jcxz", "jecxz", "jrcxz", "loop", "loope", "loopz", "loopne", "loopnz"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_prefix(std::string_view token) {
  return std::find(kPrefixes.begin(), kPrefixes.end(), token) != kPrefixes.end();
}

bool is_jump_mnemonic(std::string_view m) { return m == "jmp" || m == "jmpq" || m == "jmpl"; }
bool is_call_mnemonic(std::string_view m) { return m == "call" || m == "callq" || m == "calll"; }
bool is_return_mnemonic(std::string_view m) {
  return m == "ret" || m == "retq" || m == "retl" || m == "retw";
}

bool is_conditional_mnemonic(std::string_view m) {
  if (std::find(kOtherConditional.begin(), kOtherConditional.end(), m) != kOtherConditional.end()) {
    return true;
  }
  if (m.size() < 2 || m.front() != 'j') return false;
  auto cc = m.substr(1);
  return std::find(kConditionCodes.begin(), kConditionCodes.end(), cc) != kConditionCodes.end();
}

bool is_symbol_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}
bool is_symbol_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$' || c == '@';
}

// Displacements and bare operands: symbols, numbers and +/- offsets.
bool is_expression(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return is_symbol_char(c) || c == '+' || c == '-'; });
}

// Immediates may additionally carry parenthesised arithmetic.
bool is_immediate_expression(std::string_view s) {
  if (s.empty()) return false;
  static constexpr std::string_view extra = "+-*/()<>|&~^";
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return is_symbol_char(c) || extra.find(c) != std::string_view::npos; });
}

std::optional<std::int64_t> parse_integer(std::string_view s) {
  std::string buf(s);
  if (buf.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(buf.c_str(), &end, 0);
  if (errno != 0 || end != buf.c_str() + buf.size()) return std::nullopt;
  return static_cast<std::int64_t>(v);
}

std::optional<std::string> parse_register(std::string_view s) {
  if (s.size() < 2 || s.front() != '%') return std::nullopt;
  std::string name = lower(s);
  if (name.rfind("%st(", 0) == 0) {
    if (name.size() == 6 && std::isdigit(static_cast<unsigned char>(name[4])) && name[5] == ')') return name;
    return std::nullopt;
  }
  if (!std::isalpha(static_cast<unsigned char>(name[1]))) return std::nullopt;
  for (std::size_t i = 2; i < name.size(); ++i) {
    if (!std::isalnum(static_cast<unsigned char>(name[i]))) return std::nullopt;
  }
  return name;
}

std::vector<std::string_view> split_top_level(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (s[i] == sep && depth == 0) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  out.push_back(s.substr(start));
  return out;
}

MemoryOperand parse_memory(std::string_view s, std::size_t line) {
  MemoryOperand mem;
  auto open = s.find('(');
  if (open == std::string_view::npos) {
    if (!is_expression(s)) throw ParseError(line, "invalid memory reference '" + std::string(s) + "'");
    mem.displacement = std::string(s);
    return mem;
  }
  if (s.back() != ')') throw ParseError(line, "unterminated memory reference '" + std::string(s) + "'");
  auto disp = trim(s.substr(0, open));
  if (!disp.empty()) {
    if (!is_expression(disp)) throw ParseError(line, "invalid displacement '" + std::string(disp) + "'");
    mem.displacement = std::string(disp);
  }
  auto inner = s.substr(open + 1, s.size() - open - 2);
  if (inner.find_first_of("()") != std::string_view::npos) {
    throw ParseError(line, "nested parentheses in memory reference '" + std::string(s) + "'");
  }
  auto parts = split_top_level(inner, ',');
  if (parts.size() > 3) throw ParseError(line, "too many memory components in '" + std::string(s) + "'");
  auto base = trim(parts[0]);
  if (!base.empty()) {
    auto reg = parse_register(base);
    if (!reg) throw ParseError(line, "invalid base register '" + std::string(base) + "'");
    mem.base = *reg;
  }
  if (parts.size() >= 2) {
    auto index = trim(parts[1]);
    auto reg = parse_register(index);
    if (!reg) throw ParseError(line, "invalid index register '" + std::string(index) + "'");
    mem.index = *reg;
  }
  if (parts.size() == 3) {
    auto scale_text = trim(parts[2]);
    auto scale = parse_integer(scale_text);
    if (!scale || (*scale != 1 && *scale != 2 && *scale != 4 && *scale != 8)) {
      throw ParseError(line, "invalid scale '" + std::string(scale_text) + "'");
    }
    mem.scale = static_cast<int>(*scale);
  }
  if (!mem.base && !mem.index) throw ParseError(line, "empty memory reference '" + std::string(s) + "'");
  return mem;
}

std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '\\' && quoted) {
      ++i;
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (c == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

// Length of a `name:` label definition at the start of `s`, or 0.
std::size_t label_length(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  } else if (i < s.size() && is_symbol_start(s[i])) {
    ++i;
    while (i < s.size() && is_symbol_char(s[i])) ++i;
  } else {
    return 0;
  }
  if (i < s.size() && s[i] == ':') return i;
  return 0;
}

}  // namespace

std::string_view to_string(ControlKind kind) {
  switch (kind) {
    case ControlKind::Fallthrough: return "Fallthrough";
    case ControlKind::ConditionalJump: return "ConditionalJump";
    case ControlKind::UnconditionalJump: return "UnconditionalJump";
    case ControlKind::IndirectJump: return "IndirectJump";
    case ControlKind::Call: return "Call";
    case ControlKind::IndirectCall: return "IndirectCall";
    case ControlKind::Return: return "Return";
  }
  return "?";
}

std::string Instruction::full_mnemonic() const {
  std::string out;
  for (const auto& p : prefixes) {
    out += p;
    out += ' ';
  }
  out += mnemonic;
  return out;
}

std::string Instruction::render() const {
  std::string out = full_mnemonic();
  for (std::size_t i = 0; i < operands.size(); ++i) {
    out += i == 0 ? " " : ", ";
    out += operands[i].raw;
  }
  return out;
}

bool is_branch_mnemonic(std::string_view mnemonic) {
  return is_jump_mnemonic(mnemonic) || is_call_mnemonic(mnemonic) || is_conditional_mnemonic(mnemonic);
}

bool is_local_label(std::string_view name) {
  if (name.rfind(".L", 0) == 0) return true;
  if (name.empty()) return false;
  // numeric local labels and their 1f/1b references
  std::size_t i = 0;
  while (i < name.size() && std::isdigit(static_cast<unsigned char>(name[i]))) ++i;
  if (i == 0) return false;
  return i == name.size() || (i + 1 == name.size() && (name[i] == 'f' || name[i] == 'b'));
}

ControlFlow classify_control(std::string_view mnemonic, std::span<const Operand> operands) {
  const bool direct_label = operands.size() == 1 && operands[0].is_label() && !operands[0].indirect;
  const auto target = [&] { return std::get<LabelRefOperand>(operands[0].kind).name; };
  if (is_return_mnemonic(mnemonic)) return {ControlKind::Return, {}};
  if (is_jump_mnemonic(mnemonic)) {
    if (direct_label) return {ControlKind::UnconditionalJump, target()};
    return {ControlKind::IndirectJump, {}};
  }
  if (is_conditional_mnemonic(mnemonic)) {
    if (direct_label) return {ControlKind::ConditionalJump, target()};
    return {ControlKind::IndirectJump, {}};
  }
  if (is_call_mnemonic(mnemonic)) {
    if (direct_label) return {ControlKind::Call, target()};
    return {ControlKind::IndirectCall, {}};
  }
  return {ControlKind::Fallthrough, {}};
}

Operand parse_operand(std::string_view text, bool branch_context, std::size_t line) {
  Operand op;
  auto s = trim(text);
  op.raw = std::string(s);
  if (s.empty()) throw ParseError(line, "empty operand");
  if (s.front() == '*') {
    op.indirect = true;
    s = trim(s.substr(1));
    if (s.empty()) throw ParseError(line, "empty indirect operand");
  }

  if (s.front() == '$') {
    auto expr = s.substr(1);
    if (op.indirect || !is_immediate_expression(expr)) {
      throw ParseError(line, "invalid immediate '" + op.raw + "'");
    }
    op.kind = ImmediateOperand{parse_integer(expr), op.raw};
    return op;
  }

  if (s.front() == '%') {
    auto colon = s.find(':');
    if (colon != std::string_view::npos) {
      auto seg = parse_register(s.substr(0, colon));
      auto rest = trim(s.substr(colon + 1));
      if (!seg || rest.empty()) throw ParseError(line, "invalid segment override '" + op.raw + "'");
      MemoryOperand mem = parse_memory(rest, line);
      mem.segment = *seg;
      op.kind = std::move(mem);
      return op;
    }
    auto reg = parse_register(s);
    if (!reg) throw ParseError(line, "invalid register '" + op.raw + "'");
    op.kind = RegisterOperand{*reg};
    return op;
  }

  if (s.find('(') != std::string_view::npos || s.find(')') != std::string_view::npos) {
    op.kind = parse_memory(s, line);
    return op;
  }

  if (!is_expression(s)) throw ParseError(line, "unrecognized operand '" + op.raw + "'");
  if (branch_context && !op.indirect) {
    std::string name(s);
    op.kind = LabelRefOperand{name};
  } else {
    MemoryOperand mem;
    mem.displacement = std::string(s);
    op.kind = std::move(mem);
  }
  return op;
}

Instruction parse_instruction(std::string_view text, std::size_t line) {
  auto s = trim(text);
  if (s.empty()) throw ParseError(line, "empty instruction");
  Instruction ins;
  std::string mnemonic;
  for (;;) {
    auto end = std::find_if(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    std::string token = lower(std::string_view(s.begin(), end));
    s = trim(std::string_view(end, s.end()));
    if (is_prefix(token) && !s.empty() && is_symbol_start(s.front()) && s.front() != '$') {
      ins.prefixes.push_back(std::move(token));
      continue;
    }
    mnemonic = std::move(token);
    break;
  }
  ins.mnemonic = std::move(mnemonic);
  if (!s.empty()) {
    const bool branch = is_branch_mnemonic(ins.mnemonic);
    for (auto piece : split_top_level(s, ',')) {
      ins.operands.push_back(parse_operand(piece, branch, line));
    }
  }
  ins.control = classify_control(ins.mnemonic, ins.operands);
  return ins;
}

AsmFile parse_asm_file(std::string_view text, std::string build_id, std::filesystem::path path) {
  AsmFile file;
  file.path = std::move(path);
  file.build_id = std::move(build_id);

  std::size_t source_line = 0;
  std::size_t pos = 0;
  std::set<std::string> seen_labels;
  std::set<std::string> duplicates;

  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos && pos == text.size()) break;
    auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++source_line;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

    auto emit = [&](auto content) {
      AsmLine l;
      l.index = file.lines.size();
      l.source_line = source_line;
      l.content = std::move(content);
      l.text = std::string(raw);
      file.lines.push_back(std::move(l));
    };

    std::string code_buf = strip_comment(raw);
    std::string_view code = trim(code_buf);
    if (code.empty()) {
      if (trim(raw).empty()) {
        emit(Blank{});
      } else {
        emit(Comment{std::string(trim(raw))});
      }
      continue;
    }

    // A line may carry one or more label definitions followed by a statement.
    while (!code.empty()) {
      if (auto len = label_length(code); len > 0) {
        std::string name(code.substr(0, len));
        bool numeric = std::isdigit(static_cast<unsigned char>(name.front())) != 0;
        if (!numeric && !seen_labels.insert(name).second) duplicates.insert(name);
        emit(LabelDef{std::move(name)});
        code = trim(code.substr(len + 1));
        continue;
      }
      if (code.front() == '.') {
        if (code.rfind(".intel_syntax", 0) == 0) {
          throw ParseError(source_line, "Intel syntax is not supported; emit AT&T assembly");
        }
        emit(Directive{std::string(code)});
      } else {
        emit(parse_instruction(code, source_line));
      }
      break;
    }
  }

  file.duplicate_labels.assign(duplicates.begin(), duplicates.end());
  return file;
}

AsmFile load_asm_file(const std::filesystem::path& path, std::string build_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open assembly file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_asm_file(buf.str(), std::move(build_id), path);
}

}  // namespace mvee
