#include "asm_gen.hpp"

#include <algorithm>
#include <set>

namespace mvee::testing {

namespace {

const std::vector<std::string> kRegs = {"%rax", "%rbx", "%rcx", "%rdx", "%rsi",
                                        "%rdi", "%r8",  "%r9",  "%r10", "%r11"};

std::size_t below(std::size_t n, std::mt19937& rng) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

const std::string& reg(std::mt19937& rng) { return kRegs[below(kRegs.size(), rng)]; }

std::string label_name(int label) { return ".L" + std::to_string(label); }

AsmProgram::Instr random_instr(AsmProgram& p, std::mt19937& rng) {
  const std::string u = std::to_string(p.next_number++);
  switch (below(7, rng)) {
    case 0: return {"addq", {"$" + u, reg(rng)}};
    case 1: return {"movq", {u + "(" + reg(rng) + ")", reg(rng)}};
    case 2: return {"leaq", {u + "(" + reg(rng) + "," + reg(rng) + ",4)", reg(rng)}};
    case 3: return {"cmpq", {"$" + u, reg(rng)}};
    case 4: return {"imulq", {"$" + u, reg(rng), reg(rng)}};
    case 5: return {"movq", {reg(rng), u + "(" + reg(rng) + ")"}};
    default: return {"subq", {"$" + u, reg(rng)}};
  }
}

// Adds a branch from an earlier group to every group that neither a
// fallthrough nor an earlier branch reaches.
void make_reachable(AsmProgram& p, std::mt19937& rng) {
  for (std::size_t j = 1; j < p.groups.size(); ++j) {
    const auto prev = p.groups[j - 1].term;
    if (prev == AsmProgram::Term::Fall || prev == AsmProgram::Term::Call) continue;
    const std::string target = label_name(p.groups[j].label);
    bool referenced = false;
    for (std::size_t k = 0; k < j && !referenced; ++k) {
      const auto& g = p.groups[k];
      referenced = g.term == AsmProgram::Term::Jump && g.target == p.groups[j].label;
      for (const auto& ins : g.body) referenced = referenced || (!ins.operands.empty() && ins.operands[0] == target);
    }
    if (!referenced) p.groups[below(j, rng)].body.push_back({"jne", {target}});
  }
}

}  // namespace

const char* to_string(AsmMutation m) {
  switch (m) {
    case AsmMutation::ImmediateChange: return "ImmediateChange";
    case AsmMutation::DisplacementChange: return "DisplacementChange";
    case AsmMutation::RegisterRename: return "RegisterRename";
    case AsmMutation::LabelRename: return "LabelRename";
    case AsmMutation::LabelRedirect: return "LabelRedirect";
    case AsmMutation::InsertInstruction: return "InsertInstruction";
    case AsmMutation::DeleteInstruction: return "DeleteInstruction";
    case AsmMutation::SwapInstructions: return "SwapInstructions";
    case AsmMutation::SwapGroups: return "SwapGroups";
    case AsmMutation::OperandSwap: return "OperandSwap";
  }
  return "?";
}

std::string AsmProgram::render() const {
  std::string out = "\t.text\n\t.p2align 4\n\t.globl\tgen\n\t.type\tgen, @function\ngen:\n\t.cfi_startproc\n";
  out += "\tpushq\t%rbx\n\tcall\tmvee_begin_" + section + "@PLT\n";
  for (const auto& g : groups) {
    out += label_name(g.label) + ":\n";
    for (const auto& ins : g.body) {
      out += "\t" + ins.mnemonic;
      for (std::size_t i = 0; i < ins.operands.size(); ++i) out += (i == 0 ? "\t" : ", ") + ins.operands[i];
      out += "\n";
    }
    switch (g.term) {
      case Term::Fall: break;
      case Term::Jump: out += "\tjmp\t" + label_name(g.target) + "\n"; break;
      case Term::Call: out += "\tcall\thelper@PLT\n"; break;
      case Term::Return: out += "\tret\n"; break;
    }
  }
  out += label_name(kEndLabel) + ":\n\tcall\tmvee_end_" + section + "@PLT\n\tpopq\t%rbx\n\tret\n";
  out += "\t.cfi_endproc\n\t.size\tgen, .-gen\n";
  return out;
}

AsmProgram random_program(std::mt19937& rng, std::size_t min_groups, std::size_t max_groups, std::size_t max_body) {
  AsmProgram p;
  p.next_number = 1 + static_cast<int>(below(50, rng));
  const std::size_t n = min_groups + below(max_groups - min_groups + 1, rng);
  for (std::size_t i = 0; i < n; ++i) {
    AsmProgram::Group g;
    g.label = 100 + static_cast<int>(i);
    const std::size_t body = 1 + below(max_body, rng);
    for (std::size_t k = 0; k < body; ++k) g.body.push_back(random_instr(p, rng));
    p.groups.push_back(std::move(g));
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& g = p.groups[i];
    const std::size_t roll = below(20, rng);
    if (i + 1 == n) {
      g.term = roll < 10 ? AsmProgram::Term::Fall : AsmProgram::Term::Jump;
      g.target = AsmProgram::kEndLabel;
      continue;
    }
    if (roll < 8) {
      g.term = AsmProgram::Term::Fall;
    } else if (roll < 13) {
      g.term = AsmProgram::Term::Jump;
      const std::size_t t = below(n + 1, rng);
      g.target = t == n ? AsmProgram::kEndLabel : p.groups[t].label;
    } else if (roll < 17) {
      g.term = AsmProgram::Term::Call;
    } else if (roll < 18) {
      g.term = AsmProgram::Term::Return;
    } else {
      // Conditional branch mid-group, then fall through.
      const std::size_t t = below(n + 1, rng);
      g.body.push_back({"jne", {label_name(t == n ? AsmProgram::kEndLabel : p.groups[t].label)}});
    }
  }
  make_reachable(p, rng);
  return p;
}

AsmProgram sized_program(std::mt19937& rng, std::size_t instructions) {
  const std::size_t groups = std::max<std::size_t>(2, instructions / 4);
  return random_program(rng, groups, groups, 5);
}

bool mutate_program(AsmProgram& p, std::mt19937& rng, AsmMutation kind) {
  std::vector<std::pair<std::size_t, std::size_t>> sites;
  auto each_instr = [&](auto pred) {
    sites.clear();
    for (std::size_t g = 0; g < p.groups.size(); ++g) {
      for (std::size_t i = 0; i < p.groups[g].body.size(); ++i) {
        if (pred(p.groups[g].body[i])) sites.emplace_back(g, i);
      }
    }
    return !sites.empty();
  };
  auto pick_site = [&]() -> AsmProgram::Instr& {
    const auto [g, i] = sites[below(sites.size(), rng)];
    return p.groups[g].body[i];
  };

  switch (kind) {
    case AsmMutation::ImmediateChange: {
      if (!each_instr([](const auto& ins) { return !ins.operands.empty() && ins.operands[0][0] == '$'; })) return false;
      pick_site().operands[0] = "$" + std::to_string(p.next_number++);
      return true;
    }
    case AsmMutation::DisplacementChange: {
      auto has_mem = [](const auto& ins) {
        return std::any_of(ins.operands.begin(), ins.operands.end(),
                           [](const std::string& o) { return o.find('(') != std::string::npos; });
      };
      if (!each_instr(has_mem)) return false;
      for (auto& o : pick_site().operands) {
        if (auto paren = o.find('('); paren != std::string::npos) o = std::to_string(p.next_number++) + o.substr(paren);
      }
      return true;
    }
    case AsmMutation::RegisterRename: {
      if (!each_instr([](const auto& ins) { return ins.mnemonic != "jne"; })) return false;
      auto& ins = pick_site();
      for (auto& o : ins.operands) {
        for (const auto& r : kRegs) {
          if (auto pos = o.find(r); pos != std::string::npos) {
            const std::size_t end = pos + r.size();
            if (end < o.size() && std::isdigit(static_cast<unsigned char>(o[end]))) continue;  // %r1 vs %r10
            std::string other = reg(rng);
            while (other == r) other = reg(rng);
            o.replace(pos, r.size(), other);
            return true;
          }
        }
      }
      return false;
    }
    case AsmMutation::LabelRename: {
      auto& g = p.groups[below(p.groups.size(), rng)];
      const int old_label = g.label;
      const int fresh = p.next_label++;
      g.label = fresh;
      for (auto& other : p.groups) {
        if (other.term == AsmProgram::Term::Jump && other.target == old_label) other.target = fresh;
        for (auto& ins : other.body) {
          for (auto& o : ins.operands) {
            if (o == label_name(old_label)) o = label_name(fresh);
          }
        }
      }
      return true;
    }
    case AsmMutation::LabelRedirect: {
      std::vector<int*> jumps;
      for (auto& g : p.groups) {
        if (g.term == AsmProgram::Term::Jump) jumps.push_back(&g.target);
      }
      std::vector<std::string*> branches;
      if (each_instr([](const auto& ins) { return ins.mnemonic == "jne"; })) {
        for (auto [g, i] : sites) branches.push_back(&p.groups[g].body[i].operands[0]);
      }
      if (jumps.empty() && branches.empty()) return false;
      const int to = p.groups[below(p.groups.size(), rng)].label;
      const std::size_t k = below(jumps.size() + branches.size(), rng);
      if (k < jumps.size()) {
        if (*jumps[k] == to) return false;
        *jumps[k] = to;
      } else {
        auto& op = *branches[k - jumps.size()];
        if (op == label_name(to)) return false;
        op = label_name(to);
      }
      return true;
    }
    case AsmMutation::InsertInstruction: {
      auto& g = p.groups[below(p.groups.size(), rng)];
      g.body.insert(g.body.begin() + static_cast<std::ptrdiff_t>(below(g.body.size() + 1, rng)), random_instr(p, rng));
      return true;
    }
    case AsmMutation::DeleteInstruction: {
      std::vector<std::size_t> eligible;
      for (std::size_t g = 0; g < p.groups.size(); ++g) {
        if (p.groups[g].body.size() > 1) eligible.push_back(g);
      }
      if (eligible.empty()) return false;
      auto& g = p.groups[eligible[below(eligible.size(), rng)]];
      g.body.erase(g.body.begin() + static_cast<std::ptrdiff_t>(below(g.body.size(), rng)));
      return true;
    }
    case AsmMutation::SwapInstructions: {
      std::vector<std::size_t> eligible;
      for (std::size_t g = 0; g < p.groups.size(); ++g) {
        if (p.groups[g].body.size() > 1) eligible.push_back(g);
      }
      if (eligible.empty()) return false;
      auto& g = p.groups[eligible[below(eligible.size(), rng)]];
      const std::size_t i = below(g.body.size() - 1, rng);
      std::swap(g.body[i], g.body[i + 1]);
      return true;
    }
    case AsmMutation::SwapGroups: {
      if (p.groups.size() < 2) return false;
      const std::size_t a = below(p.groups.size(), rng);
      std::size_t b = below(p.groups.size(), rng);
      if (a == b) b = (a + 1) % p.groups.size();
      std::swap(p.groups[a], p.groups[b]);
      return true;
    }
    case AsmMutation::OperandSwap: {
      // Only register/memory pairs, whose swap stays visible once registers
      // are normalized.
      auto swappable = [](const auto& ins) {
        return ins.mnemonic == "movq" && ins.operands.size() == 2 &&
               (ins.operands[0].find('(') != std::string::npos) != (ins.operands[1].find('(') != std::string::npos);
      };
      if (!each_instr(swappable)) return false;
      auto& ins = pick_site();
      std::swap(ins.operands[0], ins.operands[1]);
      return true;
    }
  }
  return false;
}

}  // namespace mvee::testing
