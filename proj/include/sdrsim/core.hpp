#pragma once
// Single-hart instruction-accurate execution with an approximate timing
// model: every instruction has a static latency, one instruction issues per
// cycle, and a per-register scoreboard stalls issue until all source
// registers are ready (read-after-write only).

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sdrsim/cluster.hpp"
#include "sdrsim/isa.hpp"

namespace sdrsim {

enum class MemoryLatencyMode : std::uint8_t { ConservativeUniform, RegionBased };

struct LatencyTable {
  std::array<std::uint32_t, kOpCount> latency{};
  MemoryLatencyMode memory_mode = MemoryLatencyMode::ConservativeUniform;
  std::uint32_t uniform_latency = 9;
  std::uint32_t barrier_overhead = 10;

  /// Integer ALU/branch 1, mul 2, div 8, FP add/mul/fma/cvt 3, FP div/sqrt
  /// 10, packed ops 3, csrr/barrier/halt 1. Only the 9-cycle memory figure is
  /// a measured value; the rest are uncalibrated defaults.
  static LatencyTable defaults();
  /// Every latency, including memory, set to 1; no barrier overhead.
  static LatencyTable unit();

  void validate() const;
};

/// Line-oriented "mnemonic latency" plus "memory.mode
/// {conservative,region}", "memory.uniform N", "barrier.overhead N".
LatencyTable parse_latency_table(std::string_view text);
LatencyTable load_latency_table(const std::string& path);
std::string format_latency_table(const LatencyTable& t);

enum class HartStatus : std::uint8_t { Running, AtBarrier, Halted, Trapped };
enum class TrapCause : std::uint8_t { None, IllegalInstruction, MisalignedAccess, OutOfMap, FetchFault };

std::string_view status_name(HartStatus s);
std::string_view trap_name(TrapCause c);

struct HartStats {
  std::uint64_t instructions = 0;
  std::uint64_t raw_stalls = 0;
  std::uint64_t mem_stalls = 0;
  std::uint64_t barrier_wait = 0;
};

struct HartState {
  std::array<std::uint32_t, 32> regs{};
  std::uint32_t pc = 0;
  int hart_id = 0;
  std::uint64_t cycle = 0;
  std::array<std::uint64_t, 32> ready_at{};
  std::array<bool, 32> pending_load{};
  HartStatus status = HartStatus::Running;
  TrapCause cause = TrapCause::None;
  std::uint32_t trap_pc = 0;
  std::uint32_t trap_addr = 0;
  std::uint64_t barrier_arrival = 0;
  HartStats stats;

  static HartState reset(int hart_id, std::uint32_t entry);
};

/// Text segment decoded once; execution dispatches on the cached entries.
struct DecodedProgram {
  std::uint32_t base = 0;
  std::vector<Instruction> code;

  static DecodedProgram from_image(const ProgramImage& image);
  const Instruction* fetch(std::uint32_t pc) const {
    const std::uint32_t off = pc - base;
    if ((pc & 3u) != 0 || off / 4 >= code.size()) return nullptr;
    return &code[off / 4];
  }
};

struct StepReport {
  Op op = Op::Illegal;
  std::uint64_t issue_cycle = 0;
  std::uint64_t stall_cycles = 0;
  bool retired = false;
};

struct IssueTiming {
  std::uint64_t issue_cycle;
  std::uint64_t result_ready_cycle;
};

/// Memory latency of an access from `hart` under the table's mode.
std::uint32_t memory_latency(std::uint32_t addr, int hart, const ClusterConfig& cfg, const LatencyTable& t);

/// Issue and result-ready cycles of `ins` given the hart's scoreboard.
/// `mem_latency` is used for loads.
IssueTiming timing_rule(const Instruction& ins, const HartState& hart, const LatencyTable& t,
                        std::uint32_t mem_latency);

/// Executes exactly one instruction. Requires hart.status == Running.
StepReport step(HartState& hart, ClusterMemory& mem, const DecodedProgram& prog, const LatencyTable& t);

enum class HartEvent : std::uint8_t { Halted, AtBarrier, Trapped, StepBudgetExhausted };

HartEvent run_until_event(HartState& hart, ClusterMemory& mem, const DecodedProgram& prog,
                          const LatencyTable& t, std::uint64_t max_steps);

/// Value a csrr cycle would return now.
inline std::uint64_t read_cycle_csr(const HartState& hart) { return hart.cycle; }

}  // namespace sdrsim
