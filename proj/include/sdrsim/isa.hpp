#pragma once
// Emulated instruction set: RV32IM, zfinx-style floating point on the
// integer register file (fp32 / fp16 / fp8), post-increment word loads and
// stores, widening and complex dot products, lane shuffles, and a few
// system instructions (csrr, barrier, halt).
//
// Custom encodings (all fields R4-style, rm fixed to 000):
//   OP-FP  0x53  fmt bits 26:25: 00 = .s, 10 = .h, 11 = .b (fp8)
//   MADD   0x43 / MSUB 0x47  same fmt field
//   custom-0 0x0B  funct3: 0 wdotp.h, 1 wdotp.b, 2 cdotp.h, 3 shuffle.h, 4 shuffle.b
//                  rd = rs3 + dot(rs1, rs2) for the dot products,
//                  rd = shuffle(rs1, rs2, mask = rs3) for shuffles
//   custom-1 0x2B  funct3: 0 barrier, 1 halt, 2 p.lw (I), 6 p.sw (S)
//   SYSTEM 0x73    csrr (csrrs rd, csr, x0) for cycle (0xC00) and mhartid (0xF14)

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdrsim/error.hpp"
#include "sdrsim/lowprec.hpp"

namespace sdrsim {

enum class Op : std::uint8_t {
  // RV32I
  LUI, AUIPC, JAL, JALR,
  BEQ, BNE, BLT, BGE, BLTU, BGEU,
  LB, LH, LW, LBU, LHU, SB, SH, SW,
  ADDI, SLTI, SLTIU, XORI, ORI, ANDI, SLLI, SRLI, SRAI,
  ADD, SUB, SLL, SLT, SLTU, XOR, SRL, SRA, OR, AND,
  // RV32M
  MUL, MULH, MULHSU, MULHU, DIV, DIVU, REM, REMU,
  // post-increment
  P_LW, P_SW,
  // floating point on integer registers
  FADD_S, FSUB_S, FMUL_S, FDIV_S, FSQRT_S, FMADD_S, FMSUB_S,
  FADD_H, FSUB_H, FMUL_H, FDIV_H, FSQRT_H, FMADD_H, FMSUB_H,
  FADD_B, FSUB_B, FMUL_B, FDIV_B, FSQRT_B, FMADD_B, FMSUB_B,
  FCVT_S_H, FCVT_H_S, FCVT_S_B, FCVT_B_S, FCVT_H_B, FCVT_B_H,
  // packed extensions
  WDOTP_H, WDOTP_B, CDOTP_H, SHUFFLE_H, SHUFFLE_B,
  // system
  CSRR, BARRIER, HALT,
  Illegal,
};

inline constexpr int kOpCount = static_cast<int>(Op::Illegal);

enum class Format : std::uint8_t { R, I, Shift, S, B, U, J, R4, Unary, Csr, Bare };

/// Operand syntax classes used by the assembler and disassembler.
enum class Syntax : std::uint8_t {
  RdRs1Rs2,       // add rd, rs1, rs2
  RdRs1Imm,       // addi rd, rs1, imm
  RdMem,          // lw rd, imm(rs1)
  RdMemPost,      // p.lw rd, imm(rs1!)
  Rs2Mem,         // sw rs2, imm(rs1)
  Rs2MemPost,     // p.sw rs2, imm(rs1!)
  Rs1Rs2Target,   // beq rs1, rs2, target
  RdImm,          // lui rd, imm20
  RdTarget,       // jal rd, target
  RdRs1,          // fsqrt.h rd, rs1
  RdRs1Rs2Rs3,    // fmadd.h rd, rs1, rs2, rs3
  RdCsr,          // csrr rd, csr
  None,           // barrier
};

enum class Unit : std::uint8_t { Alu, Branch, Mul, Div, Load, Store, FpArith, FpDivSqrt, FpCvt, Simd, Csr, Sync };

struct OpInfo {
  Op op;
  std::string_view name;
  Format format;
  Syntax syntax;
  Unit unit;
  std::uint32_t opcode;
  std::uint32_t funct3;
  std::uint32_t funct7;  // funct7 for R/Shift/Unary, funct2 (bits 26:25) for R4
  std::uint32_t rs2_fixed;
  std::optional<FpFormat> fmt;
};

/// The single encoding table. Indexed by Op.
std::span<const OpInfo> op_table();
const OpInfo& op_info(Op op);
std::optional<Op> op_from_name(std::string_view name);

inline constexpr std::uint32_t kCsrCycle = 0xC00;
inline constexpr std::uint32_t kCsrHartId = 0xF14;

struct Instruction {
  Op op = Op::Illegal;
  std::uint8_t rd = 0;
  std::uint8_t rs1 = 0;
  std::uint8_t rs2 = 0;
  std::uint8_t rs3 = 0;
  std::int32_t imm = 0;
  std::optional<FpFormat> fmt;
  bool post_increment = false;
  std::uint32_t raw = 0;  // original word for Illegal

  bool operator==(const Instruction&) const = default;
};

/// Decodes one word; undefined encodings yield an Illegal instruction.
Instruction decode(std::uint32_t word);

/// Throws RangeError naming the field for out-of-range immediates or
/// register indices.
std::uint32_t encode(const Instruction& ins);

/// Builds a well-formed Instruction for `op` (fills fmt and post_increment).
Instruction make(Op op, int rd = 0, int rs1 = 0, int rs2 = 0, std::int32_t imm = 0, int rs3 = 0);

std::string_view reg_name(int r);
std::optional<int> parse_reg(std::string_view s);
std::optional<std::string_view> csr_name(std::uint32_t csr);

/// Text rendering of one instruction. Branch and jump targets are printed as
/// signed byte offsets.
std::string format_instruction(const Instruction& ins);

// ---------------------------------------------------------------------------

struct TextWord {
  std::uint32_t addr;
  std::uint32_t word;
  bool operator==(const TextWord&) const = default;
};

struct DataRun {
  std::uint32_t addr;
  std::vector<std::uint8_t> bytes;
  bool operator==(const DataRun&) const = default;
};

struct ProgramImage {
  std::vector<TextWord> text;  // sorted by address, word aligned
  std::vector<DataRun> data;
  std::uint32_t entry = 0;
  std::map<std::string, std::uint32_t> symbols;

  bool operator==(const ProgramImage&) const = default;
};

inline constexpr std::uint32_t kDefaultTextBase = 0x80000000u;
inline constexpr std::uint32_t kDefaultDataBase = 0x80080000u;

struct AsmError : Error {
  int line;
  AsmError(int line_no, const std::string& msg);
};

/// Two-pass assembler. Throws AsmError carrying the offending line number.
ProgramImage assemble(std::string_view source);

/// Disassembly that reassembles to a bit-identical text segment.
std::string disassemble(const ProgramImage& image);

/// Binary image: "SDRI" magic, u32 version, u32 entry, u32 run count, then
/// per run (u32 addr, u32 length, u32 kind 0=text 1=data), then the raw
/// bytes of every run in order. Little endian.
std::vector<std::uint8_t> serialize_image(const ProgramImage& image);
ProgramImage deserialize_image(std::span<const std::uint8_t> bytes);

/// Sidecar symbol map, one "name hexaddr" per line.
std::string format_symbols(const std::map<std::string, std::uint32_t>& symbols);
std::map<std::string, std::uint32_t> parse_symbols(std::string_view text);

void write_image_files(const ProgramImage& image, const std::string& bin_path);
ProgramImage read_image_files(const std::string& bin_path);

}  // namespace sdrsim
