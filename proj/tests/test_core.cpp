#include <doctest.h>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "sdrsim/core.hpp"

using namespace sdrsim;
using testing::run_source;
using testing::small_cluster;

namespace {

struct Single {
  ClusterMemory mem{small_cluster()};
  DecodedProgram prog;
  HartState hart;
  LatencyTable table = LatencyTable::defaults();

  explicit Single(const std::string& src) {
    const ProgramImage img = assemble(src);
    for (const auto& tw : img.text) mem.write(tw.addr, 4, tw.word);
    for (const auto& d : img.data) mem.write_bytes(d.addr, d.bytes);
    prog = DecodedProgram::from_image(img);
    hart = HartState::reset(0, img.entry);
  }

  StepReport step() { return sdrsim::step(hart, mem, prog, table); }
};

std::string random_program(std::mt19937& rng, int n, bool drop_deps, std::mt19937* drop_rng) {
  // s0 holds an L1 address and is never written; loads use it as base.
  static const char* ops[] = {"add", "mul", "div", "fmadd.h", "fadd.h", "lw", "p.lw", "fdiv.h", "xor", "sw"};
  std::ostringstream o;
  o << "_start:\n    li s0, 0x10000000\n    li s1, 0x10000100\n";
  auto reg = [&] { return "a" + std::to_string(rng() % 6); };
  auto src = [&] {
    std::string r = reg();
    if (drop_deps && ((*drop_rng)() & 1)) return std::string("zero");
    return r;
  };
  for (int i = 0; i < n; ++i) {
    const std::string op = ops[rng() % 10];
    const std::string rd = reg();
    if (op == "lw") o << "    lw " << rd << ", " << 4 * (rng() % 8) << "(s0)\n";
    else if (op == "p.lw") o << "    p.lw " << rd << ", 4(s1!)\n";
    else if (op == "sw") o << "    sw " << src() << ", " << 4 * (rng() % 8) << "(s0)\n";
    else if (op == "fmadd.h") o << "    fmadd.h " << rd << ", " << src() << ", " << src() << ", " << src() << "\n";
    else o << "    " << op << " " << rd << ", " << src() << ", " << src() << "\n";
  }
  o << "    halt\n";
  return o.str();
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("addi from reset") {
    Single s("addi x1, x0, 5\nhalt\n");
    const auto pc0 = s.hart.pc;
    const auto r = s.step();
    CHECK(r.retired);
    CHECK(r.op == Op::ADDI);
    CHECK(s.hart.regs[1] == 5u);
    CHECK(s.hart.pc == pc0 + 4);
    CHECK(s.hart.cycle == 1u);
  }

  TEST_CASE("load-use stall under the uniform memory latency") {
    Single s("li x1, 0x10000000\nlw x2, 0(x1)\nadd x3, x2, x2\nhalt\n");
    s.step();
    s.step();
    const auto load = s.step();
    const auto use = s.step();
    CHECK(load.op == Op::LW);
    CHECK(use.issue_cycle - load.issue_cycle == 9u);
    CHECK(use.stall_cycles == 8u);
    CHECK(s.hart.stats.mem_stalls == 8u);
    CHECK(s.hart.stats.raw_stalls == 0u);
  }

  TEST_CASE("dependent fp op waits for the fma latency") {
    Single s("fmadd.h a0, a1, a2, a3\nfadd.h a4, a0, a0\nhalt\n");
    const auto first = s.step();
    const auto second = s.step();
    CHECK(second.issue_cycle == first.issue_cycle + s.table.latency[static_cast<int>(Op::FMADD_H)]);
    CHECK(s.hart.stats.raw_stalls == 2u);
  }

  TEST_CASE("independent adds advance one cycle each") {
    Single s("add a0, a1, a2\nadd a3, a4, a5\nhalt\n");
    CHECK(s.step().issue_cycle == 0u);
    CHECK(s.step().issue_cycle == 1u);
    CHECK(s.hart.cycle == 2u);
  }

  TEST_CASE("post-increment base is ready after one cycle, data after the memory latency") {
    Single s(
        "li a1, 0x10000000\n"
        "p.lw a0, 4(a1!)\n"
        "addi a2, a1, 0\n"
        "addi a3, a0, 0\n"
        "halt\n");
    s.mem.write(0x10000000, 4, 77);
    s.step();
    s.step();
    const auto load = s.step();
    const auto base_use = s.step();
    const auto data_use = s.step();
    CHECK(base_use.issue_cycle == load.issue_cycle + 1);
    CHECK(data_use.issue_cycle == load.issue_cycle + 9);
    CHECK(s.hart.regs[10] == 77u);
    CHECK(s.hart.regs[11] == 0x10000004u);
    CHECK(s.hart.regs[12] == 0x10000004u);
  }

  TEST_CASE("post-increment load into its own base keeps the loaded value") {
    Single s("li a1, 0x10000000\np.lw a1, 4(a1!)\nhalt\n");
    s.mem.write(0x10000000, 4, 1234);
    s.step();
    s.step();
    s.step();
    CHECK(s.hart.regs[11] == 1234u);
  }

  TEST_CASE("taken branch writes no register") {
    Single s("beq zero, zero, target\naddi a0, zero, 1\ntarget:\nhalt\n");
    const auto regs = s.hart.regs;
    const auto pc0 = s.hart.pc;
    s.step();
    CHECK(s.hart.pc == pc0 + 8);
    CHECK(s.hart.regs == regs);
    CHECK(s.hart.cycle == 1u);
  }

  TEST_CASE("run_until_event outcomes") {
    {
      Single s("nop\nnop\nnop\nnop\nnop\nhalt\n");
      CHECK(run_until_event(s.hart, s.mem, s.prog, s.table, 100) == HartEvent::Halted);
      CHECK(s.hart.cycle == 6u);
      CHECK(s.hart.stats.instructions == 6u);
    }
    {
      Single s("loop: j loop\n");
      CHECK(run_until_event(s.hart, s.mem, s.prog, s.table, 50) == HartEvent::StepBudgetExhausted);
      CHECK(s.hart.stats.instructions == 50u);
    }
    {
      Single s("nop\nbarrier\nhalt\n");
      CHECK(run_until_event(s.hart, s.mem, s.prog, s.table, 50) == HartEvent::AtBarrier);
      CHECK(s.hart.barrier_arrival == 2u);
    }
  }

  TEST_CASE("cycle csr") {
    Single s("csrr a0, cycle\nnop\ncsrr a1, cycle\ncsrr a2, mhartid\nhalt\n");
    CHECK(read_cycle_csr(s.hart) == 0u);
    run_until_event(s.hart, s.mem, s.prog, s.table, 10);
    CHECK(s.hart.regs[10] == 0u);
    CHECK(s.hart.regs[11] == 2u);
    CHECK(s.hart.regs[12] == 0u);
    Single t("nop\ncsrr a0, cycle\nhalt\n");
    run_until_event(t.hart, t.mem, t.prog, t.table, 10);
    CHECK(t.hart.regs[10] == 1u);
  }

  TEST_CASE("traps") {
    {
      Single s(".word 0xffffffff\n");
      s.step();
      CHECK(s.hart.status == HartStatus::Trapped);
      CHECK(s.hart.cause == TrapCause::IllegalInstruction);
    }
    {
      Single s("li a0, 0x10000002\nlw a1, 0(a0)\n");
      run_until_event(s.hart, s.mem, s.prog, s.table, 10);
      CHECK(s.hart.cause == TrapCause::MisalignedAccess);
      CHECK(s.hart.trap_addr == 0x10000002u);
    }
    {
      Single s("li a0, 0x01000000\nsw a1, 0(a0)\n");
      run_until_event(s.hart, s.mem, s.prog, s.table, 10);
      CHECK(s.hart.cause == TrapCause::OutOfMap);
    }
    {
      Single s("nop\n");
      CHECK(run_until_event(s.hart, s.mem, s.prog, s.table, 10) == HartEvent::Trapped);
      CHECK(s.hart.cause == TrapCause::FetchFault);
    }
    {
      Single s("li a0, 0x7f\nshuffle.h a1, a2, a3, a0\n");
      run_until_event(s.hart, s.mem, s.prog, s.table, 10);
      CHECK(s.hart.cause == TrapCause::IllegalInstruction);
    }
  }

  TEST_CASE("integer semantics") {
    Single s(R"(
    li a0, -7
    li a1, 2
    div a2, a0, a1
    rem a3, a0, a1
    divu a4, a0, zero
    rem a5, a0, zero
    li t0, 0x80000000
    li t1, -1
    div t2, t0, t1
    mulh t3, a0, a0
    mulhu t4, a0, a0
    srai t5, a0, 1
    sltu t6, a1, a0
    addi zero, zero, 9
    halt
)");
    run_until_event(s.hart, s.mem, s.prog, s.table, 100);
    const auto& r = s.hart.regs;
    CHECK(static_cast<std::int32_t>(r[12]) == -3);
    CHECK(static_cast<std::int32_t>(r[13]) == -1);
    CHECK(r[14] == 0xFFFFFFFFu);
    CHECK(r[15] == static_cast<std::uint32_t>(-7));
    CHECK(r[7] == 0x80000000u);
    CHECK(r[28] == 0u);
    CHECK(r[29] == 0xFFFFFFF2u);
    CHECK(static_cast<std::int32_t>(r[30]) == -4);
    CHECK(r[31] == 1u);
    CHECK(r[0] == 0u);
  }

  TEST_CASE("fp instructions match the arithmetic library") {
    Single s(R"(
    li a0, 0x3c00
    li a1, 0x4000
    li a2, 0x4200
    fmadd.h a3, a0, a1, a2
    fmsub.h a4, a1, a2, a0
    fdiv.h a5, a0, a2
    fsqrt.h a6, a1
    fcvt.s.h a7, a5
    fcvt.b.h s2, a6
    fcvt.h.b s3, s2
    halt
)");
    run_until_event(s.hart, s.mem, s.prog, s.table, 100);
    const auto& r = s.hart.regs;
    CHECK(r[13] == fp_fma(0x3c00, 0x4000, 0x4200, FpFormat::FP16));
    CHECK(r[14] == fp_fms(0x4000, 0x4200, 0x3c00, FpFormat::FP16));
    CHECK(r[15] == fp_div(0x3c00, 0x4200, FpFormat::FP16));
    CHECK(r[16] == fp_sqrt(0x4000, FpFormat::FP16));
    CHECK(r[17] == fp_cast(r[15], FpFormat::FP16, FpFormat::FP32));
    CHECK(r[18] == fp_cast(r[16], FpFormat::FP16, FpFormat::FP8));
    CHECK(r[19] == fp_cast(r[18], FpFormat::FP8, FpFormat::FP16));
  }

  TEST_CASE("latency table parsing") {
    const LatencyTable t = parse_latency_table("# comment\nfmadd.h 4\nmemory.mode region\nmemory.uniform 12\n");
    CHECK(t.latency[static_cast<int>(Op::FMADD_H)] == 4u);
    CHECK(t.memory_mode == MemoryLatencyMode::RegionBased);
    CHECK(t.uniform_latency == 12u);
    CHECK(parse_latency_table(format_latency_table(t)).latency == t.latency);
    CHECK_THROWS_AS(parse_latency_table("fmadd.q 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_latency_table("add 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_latency_table("memory.mode fast\n"), ConfigError);
    CHECK(LatencyTable::defaults().uniform_latency == 9u);
    for (auto l : LatencyTable::defaults().latency) CHECK(l >= 1u);
  }

  TEST_CASE("timing properties on random programs") {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 40; ++trial) {
      const std::uint32_t seed = static_cast<std::uint32_t>(rng());
      std::mt19937 g1(seed), g2(seed), drop(seed ^ 0x5A5A);
      const std::string prog = random_program(g1, 200, false, nullptr);
      const std::string fewer = random_program(g2, 200, true, &drop);

      auto a = run_source(prog);
      auto b = run_source(prog);
      REQUIRE(a.report.ok());
      // determinism
      CHECK(a.report.total_cycles == b.report.total_cycles);
      CHECK(a.cluster.harts()[0].regs == b.cluster.harts()[0].regs);
      // every instruction costs at least a cycle
      CHECK(a.report.total_cycles >= a.report.total_instructions);
      // fewer dependencies never cost more
      auto c = run_source(fewer);
      CHECK(c.report.total_cycles <= a.report.total_cycles);
      // unit latencies: cycles equal instructions
      auto u = run_source(prog, 1, LatencyTable::unit());
      CHECK(u.report.total_cycles == u.report.total_instructions);
      // timing never feeds back into architectural state
      LatencyTable odd = LatencyTable::defaults();
      for (auto& l : odd.latency) l = 1 + static_cast<std::uint32_t>(rng() % 13);
      odd.uniform_latency = 17;
      auto o = run_source(prog, 1, odd);
      CHECK(o.cluster.harts()[0].regs == a.cluster.harts()[0].regs);
      CHECK(o.cluster.memory().read_bytes(kL1Base, 512) == a.cluster.memory().read_bytes(kL1Base, 512));
    }
  }

  TEST_CASE("x0 and scoreboard entry 0 stay zero") {
    Single t("li a0, 0x10000000\nlw zero, 0(a0)\naddi zero, zero, 3\nhalt\n");
    run_until_event(t.hart, t.mem, t.prog, t.table, 10);
    CHECK(t.hart.regs[0] == 0u);
    CHECK(t.hart.ready_at[0] == 0u);
  }
}
