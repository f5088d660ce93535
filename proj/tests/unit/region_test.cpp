#include <gtest/gtest.h>

#include <queue>
#include <set>

#include "asm_gen.hpp"
#include "fixtures.hpp"
#include "mvee/region.hpp"

using namespace mvee;
namespace tst = mvee::testing;

namespace {

std::string wrap(const std::string& body, const std::string& id = "S") {
  return "f:\n\tpushq\t%rbx\n\tcall\tmvee_begin_" + id + "@PLT\n" + body + "\tcall\tmvee_end_" + id +
         "@PLT\n\tpopq\t%rbx\n\tret\n";
}

std::vector<std::string> mnemonics(const FallthroughGroup& g) {
  std::vector<std::string> out;
  for (const auto& ri : g.instructions) out.push_back(ri.instruction.mnemonic);
  return out;
}

}  // namespace

TEST(FindMarkers, ReportsPairAtItsLines) {
  std::string text;
  for (int i = 0; i < 40; ++i) text += "\tnop\n";
  text += "\tcall\tmvee_begin_B1\n";
  for (int i = 41; i < 95; ++i) text += "\tnop\n";
  text += "\tcall\tmvee_end_B1\n";
  const auto markers = find_markers(parse_asm_file(text, "b"));
  ASSERT_EQ(markers.size(), 1u);
  EXPECT_EQ(markers[0], (MarkerPair{"B1", 40, 95}));
}

TEST(FindMarkers, NoMarkersGivesEmptySequence) {
  EXPECT_TRUE(find_markers(parse_asm_file("\tnop\n\tret\n", "b")).empty());
}

TEST(FindMarkers, BeginWithoutEndIsUnmatched) {
  try {
    find_markers(parse_asm_file("\tcall\tmvee_begin_B0\n\tret\n", "b"));
    FAIL();
  } catch (const MarkerError& e) {
    EXPECT_EQ(e.kind(), MarkerError::Kind::Unmatched);
    EXPECT_EQ(e.section_id(), "B0");
  }
  EXPECT_THROW(find_markers(parse_asm_file("\tcall\tmvee_end_B0\n", "b")), MarkerError);
}

TEST(FindMarkers, RepeatedIdIsDuplicate) {
  const auto f = parse_asm_file(
      "\tcall\tmvee_begin_X\n\tcall\tmvee_end_X\n\tcall\tmvee_begin_X\n\tcall\tmvee_end_X\n", "b");
  try {
    find_markers(f);
    FAIL();
  } catch (const MarkerError& e) {
    EXPECT_EQ(e.kind(), MarkerError::Kind::Duplicate);
    EXPECT_EQ(e.section_id(), "X");
  }
}

TEST(FindMarkers, PairsComeInBeginOrderAndToleratePltAndMangling) {
  const auto f = parse_asm_file(
      "\tcall\t_Z12mvee_begin_Bm\n\tcall\t_Z10mvee_end_Bm\n\tcall\tmvee_begin_A@PLT\n\tcall\tmvee_end_A@PLT\n", "b");
  const auto markers = find_markers(f);
  ASSERT_EQ(markers.size(), 2u);
  EXPECT_EQ(markers[0].section_id, "B");
  EXPECT_EQ(markers[1].section_id, "A");
}

TEST(FindMarkers, CustomPrefixes) {
  MarkerConvention c{"bench_start_", "bench_stop_"};
  const auto markers = find_markers(parse_asm_file("\tcall\tbench_start_Q\n\tnop\n\tcall\tbench_stop_Q\n", "b"), c);
  ASSERT_EQ(markers.size(), 1u);
  EXPECT_EQ(markers[0].section_id, "Q");
  EXPECT_THROW((MarkerConvention{"", "x"}.validate()), Error);
  EXPECT_THROW((MarkerConvention{"same", "same"}.validate()), Error);
}

TEST(BuildCfg, StraightLineIsOneBlockWithoutEdges) {
  const auto cfg = build_cfg(parse_asm_file("\tmovq\t$1, %rax\n\taddq\t$2, %rax\n\tret\n", "b"));
  ASSERT_EQ(cfg.blocks.size(), 1u);
  EXPECT_EQ(cfg.blocks[0].lines.size(), 3u);
  EXPECT_TRUE(cfg.blocks[0].successors.empty());
}

TEST(BuildCfg, ConditionalJumpHasTargetAndFallthrough) {
  const auto f = parse_asm_file("\tcmpq\t$0, %rdi\n\tjne\t.L2\n\tmovq\t$1, %rax\n.L2:\n\tret\n", "b");
  const auto cfg = build_cfg(f);
  const auto b = *cfg.block_of_line[1];
  ASSERT_EQ(cfg.blocks[b].successors.size(), 2u);
  const auto target = *cfg.block_of_line[4];
  const auto fall = *cfg.block_of_line[2];
  EXPECT_EQ(cfg.blocks[b].successors[0], target);
  EXPECT_EQ(cfg.blocks[b].successors[1], fall);
}

TEST(BuildCfg, IndirectJumpHasNoEdges) {
  const auto cfg = build_cfg(parse_asm_file("\tjmp\t*%rax\n\tret\n", "b"));
  EXPECT_TRUE(cfg.blocks[*cfg.block_of_line[0]].successors.empty());
}

TEST(BuildCfg, CallFallsThroughWithoutEnteringCallee) {
  const auto f = parse_asm_file("g:\n\tret\nh:\n\tcall\tg\n\tret\n", "b");
  const auto cfg = build_cfg(f);
  const auto b = *cfg.block_of_line[3];
  ASSERT_EQ(cfg.blocks[b].successors.size(), 1u);
  EXPECT_EQ(cfg.blocks[b].successors[0], *cfg.block_of_line[4]);
}

TEST(BuildCfg, UnknownLocalLabelIsAnError) {
  try {
    build_cfg(parse_asm_file("\tnop\n\tjne\t.L77\n", "b"));
    FAIL();
  } catch (const CfgError& e) {
    EXPECT_EQ(e.label(), ".L77");
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(BuildCfg, TailCallToExternalSymbolIsNotAnError) {
  EXPECT_NO_THROW(build_cfg(parse_asm_file("\tjmp\tother_function\n", "b")));
}

TEST(ExtractRegion, StraightLineIsOneGroupEndingAtTheRegionEnd) {
  const auto r = tst::region_from_text(
      wrap("\tmovq\t$1, %rax\n\taddq\t$2, %rax\n\tsubq\t$3, %rax\n\timulq\t%rax, %rax\n\tmovq\t%rax, %rdi\n"), "S",
      "b");
  ASSERT_EQ(r.groups.size(), 1u);
  EXPECT_EQ(r.groups[0].instructions.size(), 5u);
  EXPECT_EQ(r.groups[0].terminator, Terminator::RegionEnd);
  EXPECT_EQ(r.groups[0].successor, GroupSuccessor::RegionEnd);
  EXPECT_EQ(r.entry_group, 0u);
  EXPECT_TRUE(r.end_reachable);
}

TEST(ExtractRegion, JumpCutsAndReturnEndsTheRegionEarly) {
  const auto r =
      tst::region_from_text(wrap("\tmovq\t$1, %rax\n\tjmp\t.L9\n.L9:\n\taddq\t$2, %rax\n\tret\n"), "S", "b");
  ASSERT_EQ(r.groups.size(), 2u);
  EXPECT_EQ(mnemonics(r.groups[0]), (std::vector<std::string>{"movq", "jmp"}));
  EXPECT_EQ(r.groups[0].terminator, Terminator::UnconditionalJump);
  EXPECT_EQ(r.groups[0].successor, GroupSuccessor::None);
  EXPECT_EQ(r.groups[1].leading_labels, std::vector<std::string>{".L9"});
  EXPECT_EQ(mnemonics(r.groups[1]), (std::vector<std::string>{"addq", "ret"}));
  EXPECT_EQ(r.groups[1].terminator, Terminator::Return);
  EXPECT_FALSE(r.end_reachable);
  const auto w = region_warning(r);
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(w->kind(), RegionError::Kind::EndUnreachable);
  EXPECT_EQ(w->section_id(), "S");
}

// Hand-simulated DFS for the loop fixture: begin -> A -> .L1 body -> jne
// (back edge to .L1, fallthrough to tail) -> end. Visited set is A, the two
// body instructions, the jne and the tail; the jump target cuts before .L1
// and the conditional jump does not cut.
TEST(ExtractRegion, LoopInstructionsAppearExactlyOnce) {
  const auto r = tst::region_from_text(
      wrap("\txorl\t%eax, %eax\n.L1:\n\taddq\t$1, %rax\n\tsubq\t$1, %rbx\n\tjne\t.L1\n\tmovq\t%rax, %rdi\n"), "S", "b");
  ASSERT_EQ(r.groups.size(), 2u);
  EXPECT_EQ(mnemonics(r.groups[0]), std::vector<std::string>{"xorl"});
  EXPECT_EQ(r.groups[0].terminator, Terminator::Fallthrough);
  EXPECT_EQ(r.groups[0].successor, GroupSuccessor::NextGroup);
  EXPECT_EQ(r.groups[1].leading_labels, std::vector<std::string>{".L1"});
  EXPECT_EQ(mnemonics(r.groups[1]), (std::vector<std::string>{"addq", "subq", "jne", "movq"}));
  EXPECT_EQ(r.instruction_count(), 5u);
}

TEST(ExtractRegion, CallCutsAndRecordsPositionalSuccessor) {
  const auto r = tst::region_from_text(wrap("\tmovq\t$1, %rdi\n\tcall\tfoo@PLT\n\tmovq\t%rax, %rdi\n"), "S", "b");
  ASSERT_EQ(r.groups.size(), 2u);
  EXPECT_EQ(r.groups[0].terminator, Terminator::Call);
  EXPECT_EQ(r.groups[0].successor, GroupSuccessor::NextGroup);
}

TEST(ExtractRegion, ColdBlockAfterTheFunctionBodyIsIncluded) {
  const auto text = tst::read_text(tst::fixture_dir() / "corpus" / "group_reorder_cold_block.b.s");
  const auto r = tst::region_from_text(text, "S", "b");
  ASSERT_EQ(r.groups.size(), 3u);
  EXPECT_EQ(r.groups.back().leading_labels, std::vector<std::string>{".L5"});
  EXPECT_EQ(r.groups[1].successor, GroupSuccessor::RegionEnd);
}

TEST(ExtractRegion, UnreferencedLabelsAreDropped) {
  const auto r = tst::region_from_text(wrap(".LVL3:\n\tmovq\t$1, %rax\n.LVL4:\n\taddq\t$2, %rax\n"), "S", "b");
  ASSERT_EQ(r.groups.size(), 1u);
  EXPECT_TRUE(r.groups[0].leading_labels.empty());
}

TEST(ExtractRegion, RecordsOneBasedSourceLines) {
  const auto r = tst::region_from_text(wrap("\tmovq\t$1, %rax\n"), "S", "b");
  EXPECT_EQ(r.groups[0].instructions[0].line, 4u);
}

TEST(ExtractRegion, UnknownSectionIsMissing) {
  try {
    tst::region_from_text(wrap("\tnop\n"), "Nope", "b");
    FAIL();
  } catch (const MarkerError& e) {
    EXPECT_EQ(e.kind(), MarkerError::Kind::Missing);
  }
}

TEST(ExtractRegion, FingerprintIgnoresLinesButNotContent) {
  const auto a = tst::region_from_text(wrap("\tmovq\t$1, %rax\n"), "S", "a");
  const auto b = tst::region_from_text("\n\n" + wrap("\tmovq\t$1, %rax\n"), "S", "b");
  const auto c = tst::region_from_text(wrap("\tmovq\t$2, %rax\n"), "S", "c");
  EXPECT_EQ(a.groups[0].fingerprint(), b.groups[0].fingerprint());
  EXPECT_NE(a.groups[0].fingerprint(), c.groups[0].fingerprint());
}

namespace {

// Independent reachability over the generator's own model: the groups the
// region must contain and whether the end mark is reached.
struct ModelReach {
  std::size_t instructions = 0;
  bool end = false;
};

ModelReach model_reach(const tst::AsmProgram& p) {
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < p.groups.size(); ++i) index[p.groups[i].label] = i;
  std::vector<bool> seen(p.groups.size(), false);
  ModelReach out;
  std::queue<std::size_t> work;
  auto go = [&](std::optional<std::size_t> g) {
    if (!g) {
      out.end = true;
    } else if (!seen[*g]) {
      seen[*g] = true;
      work.push(*g);
    }
  };
  auto by_label = [&](int label) -> std::optional<std::size_t> {
    if (label == tst::AsmProgram::kEndLabel) return std::nullopt;
    return index.at(label);
  };
  auto next = [&](std::size_t g) -> std::optional<std::size_t> {
    if (g + 1 < p.groups.size()) return g + 1;
    return std::nullopt;
  };
  go(0);
  while (!work.empty()) {
    const auto g = work.front();
    work.pop();
    const auto& grp = p.groups[g];
    out.instructions += grp.body.size();
    for (const auto& ins : grp.body) {
      if (ins.mnemonic == "jne") go(by_label(std::stoi(ins.operands[0].substr(2))));
    }
    switch (grp.term) {
      case tst::AsmProgram::Term::Fall: go(next(g)); break;
      case tst::AsmProgram::Term::Call: ++out.instructions; go(next(g)); break;
      case tst::AsmProgram::Term::Jump: ++out.instructions; go(by_label(grp.target)); break;
      case tst::AsmProgram::Term::Return: ++out.instructions; break;
    }
  }
  return out;
}

void expect_region_invariants(const MarkedRegion& r) {
  std::set<std::size_t> lines;
  for (const auto& g : r.groups) {
    ASSERT_FALSE(g.instructions.empty());
    for (std::size_t i = 0; i < g.instructions.size(); ++i) {
      const auto& ins = g.instructions[i].instruction;
      EXPECT_TRUE(lines.insert(g.instructions[i].line).second) << "line in two groups";
      EXPECT_EQ(ins.control.target.rfind("mvee_", 0), std::string::npos) << "marker call inside region";
      if (i + 1 < g.instructions.size()) {
        const auto k = ins.control.kind;
        EXPECT_TRUE(k == ControlKind::Fallthrough || k == ControlKind::ConditionalJump) << ins.render();
      }
    }
  }
  // Groups appear in file order.
  for (std::size_t i = 1; i < r.groups.size(); ++i) {
    EXPECT_LT(r.groups[i - 1].instructions.back().line, r.groups[i].instructions.front().line);
  }
}

}  // namespace

TEST(ExtractRegionProperty, PartitionCutsAndMarkersOnRandomPrograms) {
  for (unsigned seed = 0; seed < 300; ++seed) {
    std::mt19937 rng(seed);
    const auto p = tst::random_program(rng, 1, 8);
    const auto text = p.render();
    const auto r = tst::region_from_text(text, p.section, "b");
    SCOPED_TRACE("seed " + std::to_string(seed));
    expect_region_invariants(r);
    const auto reach = model_reach(p);
    EXPECT_EQ(r.instruction_count(), reach.instructions);
    EXPECT_EQ(r.end_reachable, reach.end);
    EXPECT_EQ(r, tst::region_from_text(text, p.section, "b")) << "extraction is not deterministic";
  }
}

TEST(ExtractRegionProperty, InvariantsHoldOnEveryBundledRegion) {
  for (const auto& c : tst::load_corpus()) {
    SCOPED_TRACE(c.name);
    expect_region_invariants(c.a);
    expect_region_invariants(c.b);
  }
  const auto demo = parse_asm_file(tst::read_text(tst::demo_dir() / "fixtures" / "bench.s"), "b");
  for (const auto& id : {"M", "B0", "B1"}) {
    const auto r = extract_region(demo, id);
    SCOPED_TRACE(id);
    EXPECT_TRUE(r.end_reachable);
    expect_region_invariants(r);
  }
}
