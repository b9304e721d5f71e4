#include "sdrsim/isa.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace sdrsim {

namespace {

constexpr std::uint32_t kFmtS = 0b00, kFmtH = 0b10, kFmtB = 0b11;

constexpr std::optional<FpFormat> S = FpFormat::FP32;
constexpr std::optional<FpFormat> H = FpFormat::FP16;
constexpr std::optional<FpFormat> Q = FpFormat::FP8;
constexpr std::optional<FpFormat> N = std::nullopt;

using F = Format;
using X = Syntax;
using U = Unit;

// clang-format off
constexpr std::array<OpInfo, kOpCount> kTable = {{
  {Op::LUI,    "lui",    F::U,     X::RdImm,        U::Alu,    0x37, 0, 0, 0, N},
  {Op::AUIPC,  "auipc",  F::U,     X::RdImm,        U::Alu,    0x17, 0, 0, 0, N},
  {Op::JAL,    "jal",    F::J,     X::RdTarget,     U::Branch, 0x6F, 0, 0, 0, N},
  {Op::JALR,   "jalr",   F::I,     X::RdMem,        U::Branch, 0x67, 0, 0, 0, N},
  {Op::BEQ,    "beq",    F::B,     X::Rs1Rs2Target, U::Branch, 0x63, 0, 0, 0, N},
  {Op::BNE,    "bne",    F::B,     X::Rs1Rs2Target, U::Branch, 0x63, 1, 0, 0, N},
  {Op::BLT,    "blt",    F::B,     X::Rs1Rs2Target, U::Branch, 0x63, 4, 0, 0, N},
  {Op::BGE,    "bge",    F::B,     X::Rs1Rs2Target, U::Branch, 0x63, 5, 0, 0, N},
  {Op::BLTU,   "bltu",   F::B,     X::Rs1Rs2Target, U::Branch, 0x63, 6, 0, 0, N},
  {Op::BGEU,   "bgeu",   F::B,     X::Rs1Rs2Target, U::Branch, 0x63, 7, 0, 0, N},
  {Op::LB,     "lb",     F::I,     X::RdMem,        U::Load,   0x03, 0, 0, 0, N},
  {Op::LH,     "lh",     F::I,     X::RdMem,        U::Load,   0x03, 1, 0, 0, N},
  {Op::LW,     "lw",     F::I,     X::RdMem,        U::Load,   0x03, 2, 0, 0, N},
  {Op::LBU,    "lbu",    F::I,     X::RdMem,        U::Load,   0x03, 4, 0, 0, N},
  {Op::LHU,    "lhu",    F::I,     X::RdMem,        U::Load,   0x03, 5, 0, 0, N},
  {Op::SB,     "sb",     F::S,     X::Rs2Mem,       U::Store,  0x23, 0, 0, 0, N},
  {Op::SH,     "sh",     F::S,     X::Rs2Mem,       U::Store,  0x23, 1, 0, 0, N},
  {Op::SW,     "sw",     F::S,     X::Rs2Mem,       U::Store,  0x23, 2, 0, 0, N},
  {Op::ADDI,   "addi",   F::I,     X::RdRs1Imm,     U::Alu,    0x13, 0, 0, 0, N},
  {Op::SLTI,   "slti",   F::I,     X::RdRs1Imm,     U::Alu,    0x13, 2, 0, 0, N},
  {Op::SLTIU,  "sltiu",  F::I,     X::RdRs1Imm,     U::Alu,    0x13, 3, 0, 0, N},
  {Op::XORI,   "xori",   F::I,     X::RdRs1Imm,     U::Alu,    0x13, 4, 0, 0, N},
  {Op::ORI,    "ori",    F::I,     X::RdRs1Imm,     U::Alu,    0x13, 6, 0, 0, N},
  {Op::ANDI,   "andi",   F::I,     X::RdRs1Imm,     U::Alu,    0x13, 7, 0, 0, N},
  {Op::SLLI,   "slli",   F::Shift, X::RdRs1Imm,     U::Alu,    0x13, 1, 0x00, 0, N},
  {Op::SRLI,   "srli",   F::Shift, X::RdRs1Imm,     U::Alu,    0x13, 5, 0x00, 0, N},
  {Op::SRAI,   "srai",   F::Shift, X::RdRs1Imm,     U::Alu,    0x13, 5, 0x20, 0, N},
  {Op::ADD,    "add",    F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 0, 0x00, 0, N},
  {Op::SUB,    "sub",    F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 0, 0x20, 0, N},
  {Op::SLL,    "sll",    F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 1, 0x00, 0, N},
  {Op::SLT,    "slt",    F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 2, 0x00, 0, N},
  {Op::SLTU,   "sltu",   F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 3, 0x00, 0, N},
  {Op::XOR,    "xor",    F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 4, 0x00, 0, N},
  {Op::SRL,    "srl",    F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 5, 0x00, 0, N},
  {Op::SRA,    "sra",    F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 5, 0x20, 0, N},
  {Op::OR,     "or",     F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 6, 0x00, 0, N},
  {Op::AND,    "and",    F::R,     X::RdRs1Rs2,     U::Alu,    0x33, 7, 0x00, 0, N},
  {Op::MUL,    "mul",    F::R,     X::RdRs1Rs2,     U::Mul,    0x33, 0, 0x01, 0, N},
  {Op::MULH,   "mulh",   F::R,     X::RdRs1Rs2,     U::Mul,    0x33, 1, 0x01, 0, N},
  {Op::MULHSU, "mulhsu", F::R,     X::RdRs1Rs2,     U::Mul,    0x33, 2, 0x01, 0, N},
  {Op::MULHU,  "mulhu",  F::R,     X::RdRs1Rs2,     U::Mul,    0x33, 3, 0x01, 0, N},
  {Op::DIV,    "div",    F::R,     X::RdRs1Rs2,     U::Div,    0x33, 4, 0x01, 0, N},
  {Op::DIVU,   "divu",   F::R,     X::RdRs1Rs2,     U::Div,    0x33, 5, 0x01, 0, N},
  {Op::REM,    "rem",    F::R,     X::RdRs1Rs2,     U::Div,    0x33, 6, 0x01, 0, N},
  {Op::REMU,   "remu",   F::R,     X::RdRs1Rs2,     U::Div,    0x33, 7, 0x01, 0, N},
  {Op::P_LW,   "p.lw",   F::I,     X::RdMemPost,    U::Load,   0x2B, 2, 0, 0, N},
  {Op::P_SW,   "p.sw",   F::S,     X::Rs2MemPost,   U::Store,  0x2B, 6, 0, 0, N},

  {Op::FADD_S,  "fadd.s",  F::R,     X::RdRs1Rs2,    U::FpArith,   0x53, 0, 0x00 | kFmtS, 0, S},
  {Op::FSUB_S,  "fsub.s",  F::R,     X::RdRs1Rs2,    U::FpArith,   0x53, 0, 0x04 | kFmtS, 0, S},
  {Op::FMUL_S,  "fmul.s",  F::R,     X::RdRs1Rs2,    U::FpArith,   0x53, 0, 0x08 | kFmtS, 0, S},
  {Op::FDIV_S,  "fdiv.s",  F::R,     X::RdRs1Rs2,    U::FpDivSqrt, 0x53, 0, 0x0C | kFmtS, 0, S},
  {Op::FSQRT_S, "fsqrt.s", F::Unary, X::RdRs1,       U::FpDivSqrt, 0x53, 0, 0x2C | kFmtS, 0, S},
  {Op::FMADD_S, "fmadd.s", F::R4,    X::RdRs1Rs2Rs3, U::FpArith,   0x43, 0, kFmtS, 0, S},
  {Op::FMSUB_S, "fmsub.s", F::R4,    X::RdRs1Rs2Rs3, U::FpArith,   0x47, 0, kFmtS, 0, S},
  {Op::FADD_H,  "fadd.h",  F::R,     X::RdRs1Rs2,    U::FpArith,   0x53, 0, 0x00 | kFmtH, 0, H},
  {Op::FSUB_H,  "fsub.h",  F::R,     X::RdRs1Rs2,    U::FpArith,   0x53, 0, 0x04 | kFmtH, 0, H},
  {Op::FMUL_H,  "fmul.h",  F::R,     X::RdRs1Rs2,    U::FpArith,   0x53, 0, 0x08 | kFmtH, 0, H},
  {Op::FDIV_H,  "fdiv.h",  F::R,     X::RdRs1Rs2,    U::FpDivSqrt, 0x53, 0, 0x0C | kFmtH, 0, H},
  {Op::FSQRT_H, "fsqrt.h", F::Unary, X::RdRs1,       U::FpDivSqrt, 0x53, 0, 0x2C | kFmtH, 0, H},
  {Op::FMADD_H, "fmadd.h", F::R4,    X::RdRs1Rs2Rs3, U::FpArith,   0x43, 0, kFmtH, 0, H},
  {Op::FMSUB_H, "fmsub.h", F::R4,    X::RdRs1Rs2Rs3, U::FpArith,   0x47, 0, kFmtH, 0, H},
  {Op::FADD_B,  "fadd.b",  F::R,     X::RdRs1Rs2,    U::FpArith,   0x53, 0, 0x00 | kFmtB, 0, Q},
  {Op::FSUB_B,  "fsub.b",  F::R,     X::RdRs1Rs2,    U::FpArith,   0x53, 0, 0x04 | kFmtB, 0, Q},
  {Op::FMUL_B,  "fmul.b",  F::R,     X::RdRs1Rs2,    U::FpArith,   0x53, 0, 0x08 | kFmtB, 0, Q},
  {Op::FDIV_B,  "fdiv.b",  F::R,     X::RdRs1Rs2,    U::FpDivSqrt, 0x53, 0, 0x0C | kFmtB, 0, Q},
  {Op::FSQRT_B, "fsqrt.b", F::Unary, X::RdRs1,       U::FpDivSqrt, 0x53, 0, 0x2C | kFmtB, 0, Q},
  {Op::FMADD_B, "fmadd.b", F::R4,    X::RdRs1Rs2Rs3, U::FpArith,   0x43, 0, kFmtB, 0, Q},
  {Op::FMSUB_B, "fmsub.b", F::R4,    X::RdRs1Rs2Rs3, U::FpArith,   0x47, 0, kFmtB, 0, Q},
  {Op::FCVT_S_H, "fcvt.s.h", F::Unary, X::RdRs1, U::FpCvt, 0x53, 0, 0x20 | kFmtS, kFmtH, S},
  {Op::FCVT_H_S, "fcvt.h.s", F::Unary, X::RdRs1, U::FpCvt, 0x53, 0, 0x20 | kFmtH, kFmtS, H},
  {Op::FCVT_S_B, "fcvt.s.b", F::Unary, X::RdRs1, U::FpCvt, 0x53, 0, 0x20 | kFmtS, kFmtB, S},
  {Op::FCVT_B_S, "fcvt.b.s", F::Unary, X::RdRs1, U::FpCvt, 0x53, 0, 0x20 | kFmtB, kFmtS, Q},
  {Op::FCVT_H_B, "fcvt.h.b", F::Unary, X::RdRs1, U::FpCvt, 0x53, 0, 0x20 | kFmtH, kFmtB, H},
  {Op::FCVT_B_H, "fcvt.b.h", F::Unary, X::RdRs1, U::FpCvt, 0x53, 0, 0x20 | kFmtB, kFmtH, Q},

  {Op::WDOTP_H,   "wdotp.h",   F::R4, X::RdRs1Rs2Rs3, U::Simd, 0x0B, 0, 0, 0, H},
  {Op::WDOTP_B,   "wdotp.b",   F::R4, X::RdRs1Rs2Rs3, U::Simd, 0x0B, 1, 0, 0, Q},
  {Op::CDOTP_H,   "cdotp.h",   F::R4, X::RdRs1Rs2Rs3, U::Simd, 0x0B, 2, 0, 0, H},
  {Op::SHUFFLE_H, "shuffle.h", F::R4, X::RdRs1Rs2Rs3, U::Simd, 0x0B, 3, 0, 0, H},
  {Op::SHUFFLE_B, "shuffle.b", F::R4, X::RdRs1Rs2Rs3, U::Simd, 0x0B, 4, 0, 0, Q},

  {Op::CSRR,    "csrr",    F::Csr,  X::RdCsr, U::Csr,  0x73, 2, 0, 0, N},
  {Op::BARRIER, "barrier", F::Bare, X::None,  U::Sync, 0x2B, 0, 0, 0, N},
  {Op::HALT,    "halt",    F::Bare, X::None,  U::Sync, 0x2B, 1, 0, 0, N},
}};
// clang-format on

constexpr bool table_in_op_order() {
  for (std::size_t i = 0; i < kTable.size(); ++i)
    if (static_cast<std::size_t>(kTable[i].op) != i) return false;
  return true;
}
static_assert(table_in_op_order(), "encoding table must be indexed by Op");

std::uint32_t decode_mask(Format f) {
  switch (f) {
    case F::R:
    case F::Shift: return 0xFE00707Fu;
    case F::I:
    case F::S:
    case F::B: return 0x0000707Fu;
    case F::U:
    case F::J: return 0x0000007Fu;
    case F::R4: return 0x0600707Fu;
    case F::Unary: return 0xFFF0707Fu;
    case F::Csr: return 0x000FF07Fu;
    case F::Bare: return 0xFFFFFFFFu;
  }
  return 0xFFFFFFFFu;
}

std::uint32_t fixed_bits(const OpInfo& oi) {
  std::uint32_t w = oi.opcode;
  switch (oi.format) {
    case F::U:
    case F::J: return w;
    case F::R4: return w | (oi.funct3 << 12) | (oi.funct7 << 25);
    case F::Unary: return w | (oi.funct3 << 12) | (oi.rs2_fixed << 20) | (oi.funct7 << 25);
    case F::R:
    case F::Shift: return w | (oi.funct3 << 12) | (oi.funct7 << 25);
    default: return w | (oi.funct3 << 12);
  }
}

std::int32_t sext(std::uint32_t v, int bits) {
  const std::uint32_t m = 1u << (bits - 1);
  v &= (bits == 32) ? 0xFFFFFFFFu : ((1u << bits) - 1u);
  return static_cast<std::int32_t>((v ^ m) - m);
}

constexpr std::array<std::string_view, 32> kAbiNames = {
    "zero", "ra", "sp", "gp", "tp",  "t0",  "t1", "t2", "s0", "s1", "a0",
    "a1",   "a2", "a3", "a4", "a5",  "a6",  "a7", "s2", "s3", "s4", "s5",
    "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"};

void check_reg(int r, const char* field) {
  if (r < 0 || r > 31) throw RangeError(std::string("register field ") + field + " out of range");
}

void check_imm(std::int64_t v, std::int64_t lo, std::int64_t hi, const char* field) {
  if (v < lo || v > hi)
    throw RangeError(std::string("immediate field ") + field + " out of range: " + std::to_string(v));
}

}  // namespace

std::span<const OpInfo> op_table() { return kTable; }

const OpInfo& op_info(Op op) { return kTable.at(static_cast<std::size_t>(op)); }

std::optional<Op> op_from_name(std::string_view name) {
  for (const auto& oi : kTable)
    if (oi.name == name) return oi.op;
  return std::nullopt;
}

Instruction make(Op op, int rd, int rs1, int rs2, std::int32_t imm, int rs3) {
  Instruction ins;
  ins.op = op;
  ins.rd = static_cast<std::uint8_t>(rd);
  ins.rs1 = static_cast<std::uint8_t>(rs1);
  ins.rs2 = static_cast<std::uint8_t>(rs2);
  ins.rs3 = static_cast<std::uint8_t>(rs3);
  ins.imm = imm;
  if (op != Op::Illegal) {
    ins.fmt = op_info(op).fmt;
    ins.post_increment = op == Op::P_LW || op == Op::P_SW;
  }
  return ins;
}

Instruction decode(std::uint32_t w) {
  for (const auto& oi : kTable) {
    if ((w & decode_mask(oi.format)) != fixed_bits(oi)) continue;
    const int rd = (w >> 7) & 31, rs1 = (w >> 15) & 31, rs2 = (w >> 20) & 31, rs3 = (w >> 27) & 31;
    switch (oi.format) {
      case F::R: return make(oi.op, rd, rs1, rs2);
      case F::R4: return make(oi.op, rd, rs1, rs2, 0, rs3);
      case F::Unary: return make(oi.op, rd, rs1);
      case F::I: return make(oi.op, rd, rs1, 0, sext(w >> 20, 12));
      case F::Shift: return make(oi.op, rd, rs1, 0, static_cast<std::int32_t>((w >> 20) & 31));
      case F::S: return make(oi.op, 0, rs1, rs2, sext(((w >> 25) << 5) | ((w >> 7) & 31), 12));
      case F::B: {
        const std::uint32_t imm = (((w >> 31) & 1) << 12) | (((w >> 7) & 1) << 11) |
                                  (((w >> 25) & 0x3F) << 5) | (((w >> 8) & 0xF) << 1);
        return make(oi.op, 0, rs1, rs2, sext(imm, 13));
      }
      case F::U: return make(oi.op, rd, 0, 0, static_cast<std::int32_t>(w >> 12));
      case F::J: {
        const std::uint32_t imm = (((w >> 31) & 1) << 20) | (((w >> 12) & 0xFF) << 12) |
                                  (((w >> 20) & 1) << 11) | (((w >> 21) & 0x3FF) << 1);
        return make(oi.op, rd, 0, 0, sext(imm, 21));
      }
      case F::Csr: {
        const std::uint32_t csr = w >> 20;
        if (csr != kCsrCycle && csr != kCsrHartId) break;
        return make(oi.op, rd, 0, 0, static_cast<std::int32_t>(csr));
      }
      case F::Bare: return make(oi.op);
    }
  }
  Instruction bad;
  bad.raw = w;
  return bad;
}

std::uint32_t encode(const Instruction& ins) {
  if (ins.op == Op::Illegal) throw RangeError("cannot encode an illegal instruction");
  const auto& oi = op_info(ins.op);
  check_reg(ins.rd, "rd");
  check_reg(ins.rs1, "rs1");
  check_reg(ins.rs2, "rs2");
  check_reg(ins.rs3, "rs3");
  std::uint32_t w = fixed_bits(oi);
  const std::uint32_t rd = ins.rd, rs1 = ins.rs1, rs2 = ins.rs2, rs3 = ins.rs3;
  const std::int64_t imm = ins.imm;
  const auto u = static_cast<std::uint32_t>(ins.imm);
  switch (oi.format) {
    case F::R: return w | (rd << 7) | (rs1 << 15) | (rs2 << 20);
    case F::R4: return w | (rd << 7) | (rs1 << 15) | (rs2 << 20) | (rs3 << 27);
    case F::Unary: return w | (rd << 7) | (rs1 << 15);
    case F::I:
      check_imm(imm, -2048, 2047, "imm[11:0]");
      return w | (rd << 7) | (rs1 << 15) | ((u & 0xFFF) << 20);
    case F::Shift:
      check_imm(imm, 0, 31, "shamt");
      return w | (rd << 7) | (rs1 << 15) | (u << 20);
    case F::S:
      check_imm(imm, -2048, 2047, "imm[11:0]");
      return w | ((u & 31) << 7) | (rs1 << 15) | (rs2 << 20) | (((u >> 5) & 0x7F) << 25);
    case F::B:
      check_imm(imm, -4096, 4094, "imm[12:1]");
      if ((imm & 1) != 0) throw RangeError("immediate field imm[12:1] must be even");
      return w | (rs1 << 15) | (rs2 << 20) | (((u >> 12) & 1) << 31) | (((u >> 5) & 0x3F) << 25) |
             (((u >> 1) & 0xF) << 8) | (((u >> 11) & 1) << 7);
    case F::U:
      check_imm(imm, 0, 0xFFFFF, "imm[31:12]");
      return w | (rd << 7) | (u << 12);
    case F::J:
      check_imm(imm, -(1 << 20), (1 << 20) - 2, "imm[20:1]");
      if ((imm & 1) != 0) throw RangeError("immediate field imm[20:1] must be even");
      return w | (rd << 7) | (((u >> 20) & 1) << 31) | (((u >> 1) & 0x3FF) << 21) |
             (((u >> 11) & 1) << 20) | (((u >> 12) & 0xFF) << 12);
    case F::Csr:
      if (u != kCsrCycle && u != kCsrHartId) throw RangeError("immediate field csr names no known CSR");
      return w | (rd << 7) | (u << 20);
    case F::Bare: return w;
  }
  return w;
}

std::string_view reg_name(int r) { return kAbiNames.at(static_cast<std::size_t>(r)); }

std::optional<int> parse_reg(std::string_view s) {
  if (s.size() >= 2 && s[0] == 'x') {
    int v = 0;
    for (char c : s.substr(1)) {
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + (c - '0');
      if (v > 31) return std::nullopt;
    }
    if (s.size() > 3 || (s.size() == 3 && s[1] == '0')) return std::nullopt;
    return v;
  }
  if (s == "fp") return 8;
  for (int i = 0; i < 32; ++i)
    if (kAbiNames[i] == s) return i;
  return std::nullopt;
}

std::optional<std::string_view> csr_name(std::uint32_t csr) {
  if (csr == kCsrCycle) return "cycle";
  if (csr == kCsrHartId) return "mhartid";
  return std::nullopt;
}

std::string format_instruction(const Instruction& ins) {
  if (ins.op == Op::Illegal) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ".word 0x%08x", ins.raw);
    return buf;
  }
  if (ins.op == Op::ADDI && ins.rd == 0 && ins.rs1 == 0 && ins.imm == 0) return "nop";
  const auto& oi = op_info(ins.op);
  std::ostringstream os;
  os << oi.name;
  auto r = [](int i) { return reg_name(i); };
  switch (oi.syntax) {
    case X::RdRs1Rs2: os << ' ' << r(ins.rd) << ", " << r(ins.rs1) << ", " << r(ins.rs2); break;
    case X::RdRs1Imm: os << ' ' << r(ins.rd) << ", " << r(ins.rs1) << ", " << ins.imm; break;
    case X::RdMem: os << ' ' << r(ins.rd) << ", " << ins.imm << '(' << r(ins.rs1) << ')'; break;
    case X::RdMemPost: os << ' ' << r(ins.rd) << ", " << ins.imm << '(' << r(ins.rs1) << "!)"; break;
    case X::Rs2Mem: os << ' ' << r(ins.rs2) << ", " << ins.imm << '(' << r(ins.rs1) << ')'; break;
    case X::Rs2MemPost: os << ' ' << r(ins.rs2) << ", " << ins.imm << '(' << r(ins.rs1) << "!)"; break;
    case X::Rs1Rs2Target: os << ' ' << r(ins.rs1) << ", " << r(ins.rs2) << ", " << ins.imm; break;
    case X::RdImm: {
      char buf[16];
      std::snprintf(buf, sizeof buf, "0x%x", static_cast<unsigned>(ins.imm));
      os << ' ' << r(ins.rd) << ", " << buf;
      break;
    }
    case X::RdTarget: os << ' ' << r(ins.rd) << ", " << ins.imm; break;
    case X::RdRs1: os << ' ' << r(ins.rd) << ", " << r(ins.rs1); break;
    case X::RdRs1Rs2Rs3:
      os << ' ' << r(ins.rd) << ", " << r(ins.rs1) << ", " << r(ins.rs2) << ", " << r(ins.rs3);
      break;
    case X::RdCsr:
      os << ' ' << r(ins.rd) << ", " << csr_name(static_cast<std::uint32_t>(ins.imm)).value_or("?");
      break;
    case X::None: break;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Binary image files.

namespace {

constexpr std::uint32_t kImageVersion = 1;

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
  std::uint32_t get32() {
    if (pos + 4 > bytes.size()) throw IoError("truncated program image");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
};

struct RunHeader {
  std::uint32_t addr, length, kind;
};

}  // namespace

std::vector<std::uint8_t> serialize_image(const ProgramImage& image) {
  std::vector<std::pair<RunHeader, std::vector<std::uint8_t>>> runs;
  for (const auto& tw : image.text) {
    if (runs.empty() || runs.back().first.kind != 0 ||
        runs.back().first.addr + runs.back().first.length != tw.addr) {
      runs.push_back({RunHeader{tw.addr, 0, 0}, {}});
    }
    auto& run = runs.back();
    put32(run.second, tw.word);
    run.first.length += 4;
  }
  for (const auto& d : image.data)
    runs.push_back({RunHeader{d.addr, static_cast<std::uint32_t>(d.bytes.size()), 1}, d.bytes});

  std::vector<std::uint8_t> out = {'S', 'D', 'R', 'I'};
  put32(out, kImageVersion);
  put32(out, image.entry);
  put32(out, static_cast<std::uint32_t>(runs.size()));
  for (const auto& [h, _] : runs) {
    put32(out, h.addr);
    put32(out, h.length);
    put32(out, h.kind);
  }
  for (const auto& [_, b] : runs) out.insert(out.end(), b.begin(), b.end());
  return out;
}

ProgramImage deserialize_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "SDRI", 4) != 0)
    throw IoError("not a program image (bad magic)");
  Reader rd{bytes, 4};
  if (rd.get32() != kImageVersion) throw IoError("unsupported program image version");
  ProgramImage img;
  img.entry = rd.get32();
  const std::uint32_t n = rd.get32();
  std::vector<RunHeader> hdr(n);
  for (auto& h : hdr) {
    h.addr = rd.get32();
    h.length = rd.get32();
    h.kind = rd.get32();
    if (h.kind > 1) throw IoError("bad run kind in program image");
    if (h.kind == 0 && ((h.addr % 4) != 0 || (h.length % 4) != 0))
      throw IoError("unaligned text run in program image");
  }
  for (const auto& h : hdr) {
    if (rd.pos + h.length > bytes.size()) throw IoError("truncated program image");
    if (h.kind == 0) {
      for (std::uint32_t off = 0; off < h.length; off += 4) img.text.push_back({h.addr + off, rd.get32()});
    } else {
      img.data.push_back({h.addr, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(rd.pos),
                                                            bytes.begin() + static_cast<std::ptrdiff_t>(rd.pos + h.length))});
      rd.pos += h.length;
    }
  }
  return img;
}

std::string format_symbols(const std::map<std::string, std::uint32_t>& symbols) {
  std::string out;
  char buf[16];
  for (const auto& [name, addr] : symbols) {
    std::snprintf(buf, sizeof buf, "%08x", addr);
    out += name + ' ' + buf + '\n';
  }
  return out;
}

std::map<std::string, std::uint32_t> parse_symbols(std::string_view text) {
  std::map<std::string, std::uint32_t> out;
  std::istringstream is{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, hex;
    if (!(ls >> name >> hex)) throw IoError("malformed symbol map line " + std::to_string(line_no));
    out[name] = static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16));
  }
  return out;
}

void write_image_files(const ProgramImage& image, const std::string& bin_path) {
  const auto bytes = serialize_image(image);
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + bin_path);
  bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  std::ofstream sym(bin_path + ".sym");
  if (!sym) throw IoError("cannot write " + bin_path + ".sym");
  sym << format_symbols(image.symbols);
}

ProgramImage read_image_files(const std::string& bin_path) {
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot read " + bin_path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  ProgramImage img = deserialize_image(bytes);
  std::ifstream sym(bin_path + ".sym");
  if (sym) {
    std::string text((std::istreambuf_iterator<char>(sym)), std::istreambuf_iterator<char>());
    img.symbols = parse_symbols(text);
  }
  return img;
}

}  // namespace sdrsim
