#include "sdrsim/core.hpp"

#include <algorithm>

#include "sdrsim/config.hpp"
#include "sdrsim/lowprec.hpp"

namespace sdrsim {

LatencyTable LatencyTable::defaults() {
  LatencyTable t;
  for (const auto& oi : op_table()) {
    std::uint32_t l = 1;
    switch (oi.unit) {
      case Unit::Alu:
      case Unit::Branch:
      case Unit::Csr:
      case Unit::Sync:
      case Unit::Store:
      case Unit::Load: l = 1; break;
      case Unit::Mul: l = 2; break;
      case Unit::Div: l = 8; break;
      case Unit::FpArith:
      case Unit::FpCvt:
      case Unit::Simd: l = 3; break;
      case Unit::FpDivSqrt: l = 10; break;
    }
    t.latency[static_cast<std::size_t>(oi.op)] = l;
  }
  return t;
}

LatencyTable LatencyTable::unit() {
  LatencyTable t;
  t.latency.fill(1);
  t.uniform_latency = 1;
  t.barrier_overhead = 0;
  t.memory_mode = MemoryLatencyMode::ConservativeUniform;
  return t;
}

void LatencyTable::validate() const {
  for (std::size_t i = 0; i < latency.size(); ++i)
    if (latency[i] < 1)
      throw ConfigError("latency of " + std::string(op_table()[i].name) + " must be at least 1");
  if (uniform_latency < 1) throw ConfigError("memory.uniform must be at least 1");
}

LatencyTable parse_latency_table(std::string_view text) {
  LatencyTable t = LatencyTable::defaults();
  for (const auto& e : parse_entries(text)) {
    if (e.key == "memory.mode") {
      if (e.value == "conservative") t.memory_mode = MemoryLatencyMode::ConservativeUniform;
      else if (e.value == "region") t.memory_mode = MemoryLatencyMode::RegionBased;
      else throw ConfigError("line " + std::to_string(e.line) + ": memory.mode must be conservative or region");
    } else if (e.key == "memory.uniform") {
      t.uniform_latency = static_cast<std::uint32_t>(parse_int(e, 1, 1 << 20));
    } else if (e.key == "barrier.overhead") {
      t.barrier_overhead = static_cast<std::uint32_t>(parse_int(e, 0, 1 << 20));
    } else if (auto op = op_from_name(e.key)) {
      t.latency[static_cast<std::size_t>(*op)] = static_cast<std::uint32_t>(parse_int(e, 1, 1 << 20));
    } else {
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
  t.validate();
  return t;
}

LatencyTable load_latency_table(const std::string& path) { return parse_latency_table(read_text_file(path)); }

std::string format_latency_table(const LatencyTable& t) {
  std::string out;
  out += "memory.mode ";
  out += t.memory_mode == MemoryLatencyMode::ConservativeUniform ? "conservative\n" : "region\n";
  out += "memory.uniform " + std::to_string(t.uniform_latency) + "\n";
  out += "barrier.overhead " + std::to_string(t.barrier_overhead) + "\n";
  for (const auto& oi : op_table())
    out += std::string(oi.name) + " " + std::to_string(t.latency[static_cast<std::size_t>(oi.op)]) + "\n";
  return out;
}

std::string_view status_name(HartStatus s) {
  switch (s) {
    case HartStatus::Running: return "running";
    case HartStatus::AtBarrier: return "at-barrier";
    case HartStatus::Halted: return "halted";
    case HartStatus::Trapped: return "trapped";
  }
  return "?";
}

std::string_view trap_name(TrapCause c) {
  switch (c) {
    case TrapCause::None: return "none";
    case TrapCause::IllegalInstruction: return "illegal-instruction";
    case TrapCause::MisalignedAccess: return "misaligned-access";
    case TrapCause::OutOfMap: return "out-of-map";
    case TrapCause::FetchFault: return "fetch-fault";
  }
  return "?";
}

HartState HartState::reset(int hart_id, std::uint32_t entry) {
  HartState h;
  h.hart_id = hart_id;
  h.pc = entry;
  return h;
}

DecodedProgram DecodedProgram::from_image(const ProgramImage& image) {
  DecodedProgram p;
  if (image.text.empty()) return p;
  p.base = image.text.front().addr;
  const std::uint32_t last = image.text.back().addr;
  p.code.assign((last - p.base) / 4 + 1, Instruction{});
  for (auto& ins : p.code) ins.raw = 0;
  for (const auto& tw : image.text) p.code[(tw.addr - p.base) / 4] = decode(tw.word);
  return p;
}

std::uint32_t memory_latency(std::uint32_t addr, int hart, const ClusterConfig& cfg, const LatencyTable& t) {
  if (t.memory_mode == MemoryLatencyMode::ConservativeUniform) return t.uniform_latency;
  return classify_address(addr, hart, cfg).latency;
}

namespace {

struct Operands {
  std::uint8_t src[3];
  int nsrc;
};

Operands sources(const Instruction& ins) {
  switch (op_info(ins.op).format) {
    case Format::R: return {{ins.rs1, ins.rs2, 0}, 2};
    case Format::R4: return {{ins.rs1, ins.rs2, ins.rs3}, 3};
    case Format::Unary:
    case Format::I:
    case Format::Shift: return {{ins.rs1, 0, 0}, 1};
    case Format::S:
    case Format::B: return {{ins.rs1, ins.rs2, 0}, 2};
    default: return {{0, 0, 0}, 0};
  }
}

bool writes_rd(const Instruction& ins) {
  switch (op_info(ins.op).format) {
    case Format::S:
    case Format::B:
    case Format::Bare: return false;
    default: return true;
  }
}

bool is_load(Op op) { return op_info(op).unit == Unit::Load; }

std::uint64_t issue_of(const Instruction& ins, const HartState& h, bool& memory_bound) {
  std::uint64_t issue = h.cycle;
  memory_bound = false;
  const Operands s = sources(ins);
  for (int i = 0; i < s.nsrc; ++i) {
    const auto r = s.src[i];
    if (r == 0) continue;
    if (h.ready_at[r] > issue) {
      issue = h.ready_at[r];
      memory_bound = h.pending_load[r];
    }
  }
  return issue;
}

}  // namespace

IssueTiming timing_rule(const Instruction& ins, const HartState& hart, const LatencyTable& t,
                        std::uint32_t mem_latency) {
  bool mem_bound = false;
  const std::uint64_t issue = issue_of(ins, hart, mem_bound);
  const std::uint32_t lat = is_load(ins.op) ? mem_latency : t.latency[static_cast<std::size_t>(ins.op)];
  return {issue, issue + lat};
}

namespace {

void trap(HartState& h, TrapCause c, std::uint32_t addr = 0) {
  h.status = HartStatus::Trapped;
  h.cause = c;
  h.trap_pc = h.pc;
  h.trap_addr = addr;
}

TrapCause fault_cause(MemFault f) {
  return f == MemFault::Misaligned ? TrapCause::MisalignedAccess : TrapCause::OutOfMap;
}

std::uint32_t fp_unop(Op op, std::uint32_t a) {
  switch (op) {
    case Op::FSQRT_S: return fp_sqrt(a, FpFormat::FP32);
    case Op::FSQRT_H: return fp_sqrt(a & 0xFFFF, FpFormat::FP16);
    case Op::FSQRT_B: return fp_sqrt(a & 0xFF, FpFormat::FP8);
    case Op::FCVT_S_H: return fp_cast(a & 0xFFFF, FpFormat::FP16, FpFormat::FP32);
    case Op::FCVT_H_S: return fp_cast(a, FpFormat::FP32, FpFormat::FP16);
    case Op::FCVT_S_B: return fp_cast(a & 0xFF, FpFormat::FP8, FpFormat::FP32);
    case Op::FCVT_B_S: return fp_cast(a, FpFormat::FP32, FpFormat::FP8);
    case Op::FCVT_H_B: return fp_cast(a & 0xFF, FpFormat::FP8, FpFormat::FP16);
    case Op::FCVT_B_H: return fp_cast(a & 0xFFFF, FpFormat::FP16, FpFormat::FP8);
    default: return 0;
  }
}

}  // namespace

StepReport step(HartState& h, ClusterMemory& mem, const DecodedProgram& prog, const LatencyTable& t) {
  StepReport rep;
  const Instruction* insp = prog.fetch(h.pc);
  if (insp == nullptr) {
    trap(h, TrapCause::FetchFault, h.pc);
    return rep;
  }
  const Instruction& ins = *insp;
  rep.op = ins.op;
  if (ins.op == Op::Illegal) {
    trap(h, TrapCause::IllegalInstruction);
    return rep;
  }

  bool mem_bound = false;
  const std::uint64_t issue = issue_of(ins, h, mem_bound);
  const std::uint64_t stall = issue - h.cycle;

  auto& x = h.regs;
  const std::uint32_t a = x[ins.rs1];
  const std::uint32_t b = x[ins.rs2];
  const std::uint32_t c = x[ins.rs3];
  const auto imm = static_cast<std::uint32_t>(ins.imm);
  const auto sa = static_cast<std::int32_t>(a);
  const auto sb = static_cast<std::int32_t>(b);
  std::uint32_t next_pc = h.pc + 4;
  std::uint32_t result = 0;
  std::uint32_t lat = t.latency[static_cast<std::size_t>(ins.op)];
  bool loaded = false;

  auto do_load = [&](std::uint32_t addr, int width, bool sign) -> bool {
    std::uint32_t v = 0;
    const MemFault f = mem.try_read(addr, width, v);
    if (f != MemFault::None) {
      trap(h, fault_cause(f), addr);
      return false;
    }
    if (sign && width < 4) {
      const int sh = 32 - 8 * width;
      v = static_cast<std::uint32_t>(static_cast<std::int32_t>(v << sh) >> sh);
    }
    result = v;
    lat = memory_latency(addr, h.hart_id, mem.config(), t);
    loaded = true;
    return true;
  };
  auto do_store = [&](std::uint32_t addr, int width, std::uint32_t v) -> bool {
    const MemFault f = mem.try_write(addr, width, v);
    if (f != MemFault::None) {
      trap(h, fault_cause(f), addr);
      return false;
    }
    return true;
  };
  auto branch = [&](bool taken) {
    if (taken) next_pc = h.pc + imm;
  };

  switch (ins.op) {
    case Op::LUI: result = imm << 12; break;
    case Op::AUIPC: result = h.pc + (imm << 12); break;
    case Op::JAL:
      result = h.pc + 4;
      next_pc = h.pc + imm;
      break;
    case Op::JALR:
      result = h.pc + 4;
      next_pc = (a + imm) & ~1u;
      break;
    case Op::BEQ: branch(a == b); break;
    case Op::BNE: branch(a != b); break;
    case Op::BLT: branch(sa < sb); break;
    case Op::BGE: branch(sa >= sb); break;
    case Op::BLTU: branch(a < b); break;
    case Op::BGEU: branch(a >= b); break;
    case Op::LB: if (!do_load(a + imm, 1, true)) return rep; break;
    case Op::LH: if (!do_load(a + imm, 2, true)) return rep; break;
    case Op::LW: if (!do_load(a + imm, 4, false)) return rep; break;
    case Op::LBU: if (!do_load(a + imm, 1, false)) return rep; break;
    case Op::LHU: if (!do_load(a + imm, 2, false)) return rep; break;
    case Op::SB: if (!do_store(a + imm, 1, b)) return rep; break;
    case Op::SH: if (!do_store(a + imm, 2, b)) return rep; break;
    case Op::SW: if (!do_store(a + imm, 4, b)) return rep; break;
    case Op::P_LW: if (!do_load(a, 4, false)) return rep; break;
    case Op::P_SW: if (!do_store(a, 4, b)) return rep; break;
    case Op::ADDI: result = a + imm; break;
    case Op::SLTI: result = sa < ins.imm ? 1 : 0; break;
    case Op::SLTIU: result = a < imm ? 1 : 0; break;
    case Op::XORI: result = a ^ imm; break;
    case Op::ORI: result = a | imm; break;
    case Op::ANDI: result = a & imm; break;
    case Op::SLLI: result = a << (imm & 31); break;
    case Op::SRLI: result = a >> (imm & 31); break;
    case Op::SRAI: result = static_cast<std::uint32_t>(sa >> (imm & 31)); break;
    case Op::ADD: result = a + b; break;
    case Op::SUB: result = a - b; break;
    case Op::SLL: result = a << (b & 31); break;
    case Op::SLT: result = sa < sb ? 1 : 0; break;
    case Op::SLTU: result = a < b ? 1 : 0; break;
    case Op::XOR: result = a ^ b; break;
    case Op::SRL: result = a >> (b & 31); break;
    case Op::SRA: result = static_cast<std::uint32_t>(sa >> (b & 31)); break;
    case Op::OR: result = a | b; break;
    case Op::AND: result = a & b; break;
    case Op::MUL: result = a * b; break;
    case Op::MULH:
      result = static_cast<std::uint32_t>((static_cast<std::int64_t>(sa) * sb) >> 32);
      break;
    case Op::MULHSU:
      result = static_cast<std::uint32_t>((static_cast<std::int64_t>(sa) * static_cast<std::int64_t>(b)) >> 32);
      break;
    case Op::MULHU:
      result = static_cast<std::uint32_t>((static_cast<std::uint64_t>(a) * b) >> 32);
      break;
    case Op::DIV:
      if (b == 0) result = 0xFFFFFFFFu;
      else if (sa == INT32_MIN && sb == -1) result = a;
      else result = static_cast<std::uint32_t>(sa / sb);
      break;
    case Op::DIVU: result = b == 0 ? 0xFFFFFFFFu : a / b; break;
    case Op::REM:
      if (b == 0) result = a;
      else if (sa == INT32_MIN && sb == -1) result = 0;
      else result = static_cast<std::uint32_t>(sa % sb);
      break;
    case Op::REMU: result = b == 0 ? a : a % b; break;

    case Op::FADD_S: result = fp_add(a, b, FpFormat::FP32); break;
    case Op::FSUB_S: result = fp_sub(a, b, FpFormat::FP32); break;
    case Op::FMUL_S: result = fp_mul(a, b, FpFormat::FP32); break;
    case Op::FDIV_S: result = fp_div(a, b, FpFormat::FP32); break;
    case Op::FMADD_S: result = fp_fma(a, b, c, FpFormat::FP32); break;
    case Op::FMSUB_S: result = fp_fms(a, b, c, FpFormat::FP32); break;
    case Op::FADD_H: result = fp_add(a & 0xFFFF, b & 0xFFFF, FpFormat::FP16); break;
    case Op::FSUB_H: result = fp_sub(a & 0xFFFF, b & 0xFFFF, FpFormat::FP16); break;
    case Op::FMUL_H: result = fp_mul(a & 0xFFFF, b & 0xFFFF, FpFormat::FP16); break;
    case Op::FDIV_H: result = fp_div(a & 0xFFFF, b & 0xFFFF, FpFormat::FP16); break;
    case Op::FMADD_H: result = fp_fma(a & 0xFFFF, b & 0xFFFF, c & 0xFFFF, FpFormat::FP16); break;
    case Op::FMSUB_H: result = fp_fms(a & 0xFFFF, b & 0xFFFF, c & 0xFFFF, FpFormat::FP16); break;
    case Op::FADD_B: result = fp_add(a & 0xFF, b & 0xFF, FpFormat::FP8); break;
    case Op::FSUB_B: result = fp_sub(a & 0xFF, b & 0xFF, FpFormat::FP8); break;
    case Op::FMUL_B: result = fp_mul(a & 0xFF, b & 0xFF, FpFormat::FP8); break;
    case Op::FDIV_B: result = fp_div(a & 0xFF, b & 0xFF, FpFormat::FP8); break;
    case Op::FMADD_B: result = fp_fma(a & 0xFF, b & 0xFF, c & 0xFF, FpFormat::FP8); break;
    case Op::FMSUB_B: result = fp_fms(a & 0xFF, b & 0xFF, c & 0xFF, FpFormat::FP8); break;
    case Op::FSQRT_S:
    case Op::FSQRT_H:
    case Op::FSQRT_B:
    case Op::FCVT_S_H:
    case Op::FCVT_H_S:
    case Op::FCVT_S_B:
    case Op::FCVT_B_S:
    case Op::FCVT_H_B:
    case Op::FCVT_B_H: result = fp_unop(ins.op, a); break;

    case Op::WDOTP_H:
      result = widening_dotprod({a, LaneFormat::FP16}, {b, LaneFormat::FP16}, {c, LaneFormat::FP32}, FpFormat::FP16).bits;
      break;
    case Op::WDOTP_B:
      result = widening_dotprod({a, LaneFormat::FP8}, {b, LaneFormat::FP8}, {c, LaneFormat::FP16}, FpFormat::FP8).bits;
      break;
    case Op::CDOTP_H:
      result = complex_dotprod16({a, LaneFormat::FP16}, {b, LaneFormat::FP16}, {c, LaneFormat::FP16}).bits;
      break;
    case Op::SHUFFLE_H:
    case Op::SHUFFLE_B: {
      const LaneFormat lf = ins.op == Op::SHUFFLE_H ? LaneFormat::FP16 : LaneFormat::FP8;
      auto r = shuffle({a, lf}, {b, lf}, c);
      if (!r) {
        trap(h, TrapCause::IllegalInstruction);
        return rep;
      }
      result = r->bits;
      break;
    }

    case Op::CSRR: result = ins.imm == static_cast<std::int32_t>(kCsrCycle) ? static_cast<std::uint32_t>(issue)
                                                                             : static_cast<std::uint32_t>(h.hart_id);
      break;
    case Op::BARRIER:
      h.status = HartStatus::AtBarrier;
      h.barrier_arrival = issue + 1;
      break;
    case Op::HALT: h.status = HartStatus::Halted; break;
    case Op::Illegal: break;
  }

  // Architectural writeback. Post-increment address first so a load into the
  // base register keeps the loaded value.
  if (ins.post_increment && ins.rs1 != 0) {
    x[ins.rs1] = a + imm;
    h.ready_at[ins.rs1] = issue + 1;
    h.pending_load[ins.rs1] = false;
  }
  if (writes_rd(ins) && ins.rd != 0 && ins.op != Op::P_SW) {
    x[ins.rd] = result;
    h.ready_at[ins.rd] = issue + lat;
    h.pending_load[ins.rd] = loaded;
  }

  if (mem_bound) h.stats.mem_stalls += stall;
  else h.stats.raw_stalls += stall;
  ++h.stats.instructions;
  h.cycle = issue + 1;
  h.pc = next_pc;
  rep.issue_cycle = issue;
  rep.stall_cycles = stall;
  rep.retired = true;
  return rep;
}

HartEvent run_until_event(HartState& h, ClusterMemory& mem, const DecodedProgram& prog, const LatencyTable& t,
                          std::uint64_t max_steps) {
  for (std::uint64_t i = 0; i < max_steps; ++i) {
    step(h, mem, prog, t);
    switch (h.status) {
      case HartStatus::Running: continue;
      case HartStatus::AtBarrier: return HartEvent::AtBarrier;
      case HartStatus::Halted: return HartEvent::Halted;
      case HartStatus::Trapped: return HartEvent::Trapped;
    }
  }
  return HartEvent::StepBudgetExhausted;
}

}  // namespace sdrsim
