#include "mvee/region.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "digest.hpp"

namespace mvee {

MarkerError::MarkerError(Kind kind, std::string section_id)
    : Error([&] {
        switch (kind) {
          case Kind::Unmatched: return "unmatched marker for section '" + section_id + "'";
          case Kind::Duplicate: return "section '" + section_id + "' is marked more than once";
          case Kind::Missing: return "no markers for section '" + section_id + "'";
        }
        return std::string("marker error");
      }()),
      kind_(kind),
      section_id_(std::move(section_id)) {}

CfgError::CfgError(std::string label, std::size_t line)
    : Error("jump to undefined label '" + label + "' at line " + std::to_string(line)),
      label_(std::move(label)),
      line_(line) {}

RegionError::RegionError(Kind, std::string section_id)
    : Error("end mark of section '" + section_id + "' is unreachable from its begin mark"),
      kind_(Kind::EndUnreachable),
      section_id_(std::move(section_id)) {}

std::optional<RegionError> region_warning(const MarkedRegion& region) {
  if (region.end_reachable) return std::nullopt;
  return RegionError(RegionError::Kind::EndUnreachable, region.section_id);
}

void MarkerConvention::validate() const {
  if (begin_prefix.empty() || end_prefix.empty()) throw Error("marker prefixes must be non-empty");
  if (begin_prefix == end_prefix) throw Error("begin and end marker prefixes must differ");
}

namespace {

bool is_section_switch(const AsmLine& line) {
  const auto* d = line.directive();
  if (d == nullptr) return false;
  std::string_view t = d->text;
  auto word = t.substr(0, t.find_first_of(" \t"));
  return word == ".text" || word == ".data" || word == ".bss" || word == ".section" ||
         word == ".pushsection" || word == ".popsection" || word == ".previous" || word == ".subsection";
}

// `mvee_begin_B1@PLT` -> `mvee_begin_B1`; `_Z13mvee_begin_B1m` -> `mvee_begin_B1`.
std::string marker_symbol(std::string_view symbol) {
  symbol = symbol.substr(0, symbol.find('@'));
  if (symbol.rfind("_Z", 0) == 0) {
    std::size_t i = 2;
    std::size_t len = 0;
    while (i < symbol.size() && std::isdigit(static_cast<unsigned char>(symbol[i]))) {
      len = len * 10 + static_cast<std::size_t>(symbol[i] - '0');
      ++i;
    }
    if (len > 0 && i + len <= symbol.size()) return std::string(symbol.substr(i, len));
  }
  return std::string(symbol);
}

struct MarkerCall {
  bool begin;
  std::string id;
};

std::optional<MarkerCall> as_marker(const AsmLine& line, const MarkerConvention& c) {
  const auto* ins = line.instruction();
  if (ins == nullptr || ins->control.kind != ControlKind::Call) return std::nullopt;
  auto sym = marker_symbol(ins->control.target);
  // Longer prefix first, so that one prefix nesting inside the other stays unambiguous.
  const bool begin_first = c.begin_prefix.size() >= c.end_prefix.size();
  const std::pair<const std::string*, bool> order[2] = {
      {begin_first ? &c.begin_prefix : &c.end_prefix, begin_first},
      {begin_first ? &c.end_prefix : &c.begin_prefix, !begin_first}};
  for (const auto& [prefix, is_begin] : order) {
    if (sym.size() > prefix->size() && sym.rfind(*prefix, 0) == 0) {
      return MarkerCall{is_begin, sym.substr(prefix->size())};
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Terminator t) {
  switch (t) {
    case Terminator::UnconditionalJump: return "UnconditionalJump";
    case Terminator::Return: return "Return";
    case Terminator::Call: return "Call";
    case Terminator::IndirectJump: return "IndirectJump";
    case Terminator::IndirectCall: return "IndirectCall";
    case Terminator::Fallthrough: return "Fallthrough";
    case Terminator::RegionEnd: return "RegionEnd";
  }
  return "?";
}

Terminator terminator_from_string(std::string_view s) {
  for (auto t : {Terminator::UnconditionalJump, Terminator::Return, Terminator::Call, Terminator::IndirectJump,
                 Terminator::IndirectCall, Terminator::Fallthrough, Terminator::RegionEnd}) {
    if (to_string(t) == s) return t;
  }
  throw Error("unknown terminator '" + std::string(s) + "'");
}

std::string_view to_string(GroupSuccessor s) {
  switch (s) {
    case GroupSuccessor::None: return "None";
    case GroupSuccessor::NextGroup: return "NextGroup";
    case GroupSuccessor::RegionEnd: return "RegionEnd";
  }
  return "?";
}

GroupSuccessor group_successor_from_string(std::string_view s) {
  for (auto v : {GroupSuccessor::None, GroupSuccessor::NextGroup, GroupSuccessor::RegionEnd}) {
    if (to_string(v) == s) return v;
  }
  throw Error("unknown group successor '" + std::string(s) + "'");
}

std::string FallthroughGroup::fingerprint() const {
  detail::Blake2b<16> h;
  for (const auto& l : leading_labels) h.field("L").field(l);
  for (const auto& ri : instructions) h.field("I").field(ri.instruction.render());
  return detail::to_hex(h.finish());
}

std::size_t MarkedRegion::instruction_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.instructions.size();
  return n;
}

std::vector<MarkerPair> find_markers(const AsmFile& file, const MarkerConvention& convention) {
  convention.validate();
  struct Sites {
    std::vector<std::size_t> begins, ends;
    std::size_t first_seen = 0;
  };
  std::map<std::string, Sites> sites;
  for (const auto& line : file.lines) {
    auto m = as_marker(line, convention);
    if (!m) continue;
    auto [it, inserted] = sites.try_emplace(m->id);
    if (inserted) it->second.first_seen = line.index;
    (m->begin ? it->second.begins : it->second.ends).push_back(line.index);
  }

  std::vector<std::pair<std::size_t, std::string>> by_line;
  for (const auto& [id, s] : sites) by_line.emplace_back(s.first_seen, id);
  std::sort(by_line.begin(), by_line.end());
  for (const auto& [_, id] : by_line) {
    const auto& s = sites.at(id);
    if (s.begins.size() > 1 || s.ends.size() > 1) throw MarkerError(MarkerError::Kind::Duplicate, id);
    if (s.begins.empty() || s.ends.empty()) throw MarkerError(MarkerError::Kind::Unmatched, id);
  }

  std::vector<MarkerPair> out;
  for (const auto& [id, s] : sites) out.push_back({id, s.begins.front(), s.ends.front()});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.begin_line < b.begin_line; });
  return out;
}

std::optional<std::size_t> Cfg::resolve(const std::string& name, std::size_t from_line) const {
  if (auto it = labels.find(name); it != labels.end()) return it->second;
  if (name.size() >= 2 && (name.back() == 'f' || name.back() == 'b')) {
    auto it = numeric_labels.find(name.substr(0, name.size() - 1));
    if (it == numeric_labels.end()) return std::nullopt;
    const auto& defs = it->second;
    if (name.back() == 'f') {
      auto pos = std::upper_bound(defs.begin(), defs.end(), from_line);
      if (pos != defs.end()) return *pos;
    } else {
      auto pos = std::lower_bound(defs.begin(), defs.end(), from_line);
      if (pos != defs.begin()) return *std::prev(pos);
    }
  }
  return std::nullopt;
}

Cfg build_cfg(const AsmFile& file) {
  const std::size_t n = file.lines.size();
  Cfg cfg;
  cfg.block_of_line.assign(n, std::nullopt);
  cfg.next_instruction.assign(n, std::nullopt);
  cfg.label_instruction.assign(n, std::nullopt);

  // Physical successor instruction of every line, reset at section switches.
  std::optional<std::size_t> next;
  for (std::size_t i = n; i-- > 0;) {
    const auto& line = file.lines[i];
    cfg.next_instruction[i] = next;
    if (const auto* label = line.label()) {
      cfg.label_instruction[i] = next;
      if (std::isdigit(static_cast<unsigned char>(label->name.front()))) {
        cfg.numeric_labels[label->name].push_back(i);
      } else {
        cfg.labels.insert_or_assign(label->name, i);  // first definition wins after the reverse scan
      }
    }
    if (line.instruction() != nullptr) next = i;
    if (is_section_switch(line)) next = std::nullopt;
  }
  for (auto& [_, defs] : cfg.numeric_labels) std::sort(defs.begin(), defs.end());

  std::set<std::size_t> leaders;
  for (std::size_t i = 0; i < n; ++i) {
    if (cfg.label_instruction[i]) leaders.insert(*cfg.label_instruction[i]);
  }

  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < n; ++i) {
    const auto* ins = file.lines[i].instruction();
    if (ins == nullptr) continue;
    bool start = !prev || leaders.count(i) > 0 || cfg.next_instruction[*prev] != i ||
                 file.lines[*prev].instruction()->control.kind != ControlKind::Fallthrough;
    if (start) cfg.blocks.emplace_back();
    cfg.blocks.back().lines.push_back(i);
    cfg.block_of_line[i] = cfg.blocks.size() - 1;
    prev = i;
  }

  auto block_at = [&](std::optional<std::size_t> line) -> std::optional<std::size_t> {
    if (!line) return std::nullopt;
    return cfg.block_of_line[*line];
  };
  auto jump_target = [&](const std::string& target, std::size_t line) -> std::optional<std::size_t> {
    if (auto def = cfg.resolve(target, line)) return block_at(cfg.label_instruction[*def]);
    if (is_local_label(target)) throw CfgError(target, file.lines[line].source_line);
    return std::nullopt;  // tail call into another function
  };

  for (auto& block : cfg.blocks) {
    const std::size_t last = block.lines.back();
    const auto& control = file.lines[last].instruction()->control;
    auto fall = block_at(cfg.next_instruction[last]);
    switch (control.kind) {
      case ControlKind::ConditionalJump:
        if (auto t = jump_target(control.target, last)) block.successors.push_back(*t);
        if (fall) block.successors.push_back(*fall);
        break;
      case ControlKind::UnconditionalJump:
        if (auto t = jump_target(control.target, last)) block.successors.push_back(*t);
        break;
      case ControlKind::IndirectJump:
      case ControlKind::Return:
        break;
      case ControlKind::Call:
      case ControlKind::IndirectCall:
      case ControlKind::Fallthrough:
        if (fall) block.successors.push_back(*fall);
        break;
    }
  }
  return cfg;
}

MarkedRegion extract_region(const AsmFile& file, const std::string& section_id,
                            const MarkerConvention& convention) {
  auto markers = find_markers(file, convention);
  auto it = std::find_if(markers.begin(), markers.end(),
                         [&](const MarkerPair& m) { return m.section_id == section_id; });
  if (it == markers.end()) throw MarkerError(MarkerError::Kind::Missing, section_id);
  return extract_region(file, build_cfg(file), *it, convention);
}

MarkedRegion extract_region(const AsmFile& file, const Cfg& cfg, const MarkerPair& markers,
                            const MarkerConvention& convention) {
  MarkedRegion region;
  region.section_id = markers.section_id;
  region.build_id = file.build_id;
  region.end_reachable = false;

  const std::size_t n = file.lines.size();
  std::vector<bool> is_marker(n, false);
  for (std::size_t i = 0; i < n; ++i) is_marker[i] = as_marker(file.lines[i], convention).has_value();

  // Depth-first traversal from the instruction after the begin mark, stopping at the end mark.
  std::vector<bool> visited(n, false);
  const auto start = cfg.next_instruction[markers.begin_line];
  if (start) {
    std::vector<bool> seen_block(cfg.blocks.size(), false);
    std::vector<std::size_t> stack{*cfg.block_of_line[*start]};
    while (!stack.empty()) {
      const auto b = stack.back();
      stack.pop_back();
      if (seen_block[b]) continue;
      seen_block[b] = true;
      bool stopped = false;
      for (auto line : cfg.blocks[b].lines) {
        if (line == markers.end_line) {
          region.end_reachable = true;
          stopped = true;
          break;
        }
        if (!is_marker[line]) visited[line] = true;
      }
      if (stopped) continue;
      const auto& succ = cfg.blocks[b].successors;
      for (auto s = succ.rbegin(); s != succ.rend(); ++s) stack.push_back(*s);
    }
  }

  // Labels that visited direct jumps land on, and the instruction lines they mark.
  std::set<std::size_t> referenced_labels;
  std::set<std::size_t> target_lines;
  for (std::size_t i = 0; i < n; ++i) {
    if (!visited[i]) continue;
    const auto& c = file.lines[i].instruction()->control;
    if (c.kind != ControlKind::ConditionalJump && c.kind != ControlKind::UnconditionalJump) continue;
    if (auto def = cfg.resolve(c.target, i)) {
      referenced_labels.insert(*def);
      if (auto at = cfg.label_instruction[*def]) target_lines.insert(*at);
    }
  }

  // Fallthrough target of an instruction, looking through other sections' marker calls.
  auto physical_next = [&](std::size_t line) {
    auto next = cfg.next_instruction[line];
    while (next && *next != markers.end_line && is_marker[*next]) next = cfg.next_instruction[*next];
    return next;
  };

  auto cuts_after = [&](std::size_t line) {
    switch (file.lines[line].instruction()->control.kind) {
      case ControlKind::UnconditionalJump:
      case ControlKind::Call:
      case ControlKind::IndirectCall:
      case ControlKind::Return:
      case ControlKind::IndirectJump:
        return true;
      default:
        return false;
    }
  };

  std::vector<std::size_t> group_last;
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < n; ++i) {
    if (!visited[i]) continue;
    const bool new_group = !prev || cuts_after(*prev) || physical_next(*prev) != i || target_lines.count(i) > 0;
    if (new_group) {
      FallthroughGroup g;
      std::vector<std::size_t> label_lines;
      for (std::size_t j = i; j-- > 0;) {
        if (file.lines[j].instruction() != nullptr) break;
        if (file.lines[j].label() != nullptr && referenced_labels.count(j) > 0) label_lines.push_back(j);
      }
      std::reverse(label_lines.begin(), label_lines.end());
      for (auto j : label_lines) g.leading_labels.push_back(file.lines[j].label()->name);
      if (!label_lines.empty()) g.label_line = file.lines[label_lines.front()].source_line;
      region.groups.push_back(std::move(g));
      group_last.emplace_back();
    }
    region.groups.back().instructions.push_back({*file.lines[i].instruction(), file.lines[i].source_line});
    if (start && i == *start) region.entry_group = region.groups.size() - 1;
    group_last.back() = i;
    prev = i;
  }

  // Terminators and positional successors.
  for (std::size_t gi = 0; gi < region.groups.size(); ++gi) {
    auto& g = region.groups[gi];
    const std::size_t last = group_last[gi];
    const auto kind = file.lines[last].instruction()->control.kind;
    const auto next = physical_next(last);
    GroupSuccessor positional = GroupSuccessor::None;
    if (next && *next == markers.end_line) {
      positional = GroupSuccessor::RegionEnd;
    } else if (next && visited[*next]) {
      positional = GroupSuccessor::NextGroup;
    }
    switch (kind) {
      case ControlKind::UnconditionalJump:
        g.terminator = Terminator::UnconditionalJump;
        g.successor = GroupSuccessor::None;
        break;
      case ControlKind::Return:
        g.terminator = Terminator::Return;
        g.successor = GroupSuccessor::None;
        break;
      case ControlKind::IndirectJump:
        g.terminator = Terminator::IndirectJump;
        g.successor = GroupSuccessor::None;
        break;
      case ControlKind::Call:
        g.terminator = Terminator::Call;
        g.successor = positional;
        break;
      case ControlKind::IndirectCall:
        g.terminator = Terminator::IndirectCall;
        g.successor = positional;
        break;
      case ControlKind::Fallthrough:
      case ControlKind::ConditionalJump:
        g.terminator = positional == GroupSuccessor::NextGroup ? Terminator::Fallthrough : Terminator::RegionEnd;
        g.successor = positional;
        break;
    }
  }
  return region;
}

}  // namespace mvee
