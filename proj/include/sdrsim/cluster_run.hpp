#pragma once
// Multi-hart execution on one cluster: program loading, barrier release and
// the round-robin scheduler.

#include <cstdint>
#include <string>
#include <vector>

#include "sdrsim/cluster.hpp"
#include "sdrsim/core.hpp"
#include "sdrsim/isa.hpp"

namespace sdrsim {

enum class RunMode : std::uint8_t { Deterministic, Fast };
enum class RunOutcome : std::uint8_t { Completed, Trapped, Deadlock, BudgetExhausted };

std::string_view outcome_name(RunOutcome o);

class Cluster {
 public:
  Cluster(const ClusterConfig& cfg, const LatencyTable& table);

  /// Copies the image into memory, decodes its text and resets `harts`
  /// harts (ids 0..harts-1) to the entry point.
  void load(const ProgramImage& image, int harts);

  ClusterMemory& memory() { return mem_; }
  const ClusterMemory& memory() const { return mem_; }
  std::vector<HartState>& harts() { return harts_; }
  const std::vector<HartState>& harts() const { return harts_; }
  const DecodedProgram& program() const { return prog_; }
  const LatencyTable& table() const { return table_; }
  const ClusterConfig& config() const { return mem_.config(); }

  /// DMA transfer on behalf of `hart`; its cycle count advances by the cost.
  std::uint64_t bulk_copy(int hart, std::uint32_t src, std::uint32_t dst, std::uint32_t length);

 private:
  LatencyTable table_;
  ClusterMemory mem_;
  DecodedProgram prog_;
  std::vector<HartState> harts_;
};

struct BarrierResult {
  bool released = false;
  std::uint64_t release_cycle = 0;
  std::vector<int> missing;  // harts neither at the barrier nor halted
};

/// Releases the barrier if every hart is AtBarrier or Halted: each waiting
/// hart resumes at max(arrival) + overhead. Otherwise nothing changes and
/// `missing` lists the harts that have not arrived.
BarrierResult barrier_step(std::vector<HartState>& harts, std::uint32_t overhead);

struct RunOptions {
  RunMode mode = RunMode::Deterministic;
  std::uint64_t quantum = 100;
  std::uint64_t max_steps_per_hart = 1ull << 32;
  int workers = 0;  // fast mode; 0 = hardware concurrency
};

struct HartReport {
  int hart_id = 0;
  std::uint64_t instructions = 0;
  std::uint64_t cycles = 0;
  std::uint64_t raw_stalls = 0;
  std::uint64_t mem_stalls = 0;
  std::uint64_t barrier_wait = 0;
  HartStatus status = HartStatus::Running;
  TrapCause cause = TrapCause::None;
  std::uint32_t trap_pc = 0;
  std::uint32_t trap_addr = 0;
};

struct ClusterRunReport {
  RunOutcome outcome = RunOutcome::Completed;
  std::vector<HartReport> harts;
  std::uint64_t total_cycles = 0;  // max over harts
  std::uint64_t total_instructions = 0;
  std::vector<int> missing;        // harts that never reached a pending barrier
  int trapped_hart = -1;
  double wall_seconds = 0;
  double mips = 0;

  bool ok() const { return outcome == RunOutcome::Completed; }
  std::string describe() const;
};

ClusterRunReport run_cluster(Cluster& cluster, const RunOptions& opts = {});

/// Key=value summary lines followed by one CSV row per hart:
/// hart_id,instructions,cycles,raw_stalls,mem_stalls,barrier_wait,status.
/// `timing` adds the host-dependent wall_seconds and mips lines.
std::string format_run_report(const ClusterRunReport& r, bool timing = true);

}  // namespace sdrsim
