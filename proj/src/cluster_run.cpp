#include "sdrsim/cluster_run.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>

namespace sdrsim {

std::string_view outcome_name(RunOutcome o) {
  switch (o) {
    case RunOutcome::Completed: return "completed";
    case RunOutcome::Trapped: return "trapped";
    case RunOutcome::Deadlock: return "deadlock";
    case RunOutcome::BudgetExhausted: return "budget-exhausted";
  }
  return "?";
}

Cluster::Cluster(const ClusterConfig& cfg, const LatencyTable& table) : table_(table), mem_(cfg) {
  table_.validate();
}

void Cluster::load(const ProgramImage& image, int harts) {
  if (harts < 1 || harts > config().cores())
    throw ConfigError("hart count " + std::to_string(harts) + " outside [1, " + std::to_string(config().cores()) + "]");
  for (const auto& tw : image.text) mem_.write(tw.addr, 4, tw.word);
  for (const auto& run : image.data) mem_.write_bytes(run.addr, run.bytes);
  prog_ = DecodedProgram::from_image(image);
  harts_.clear();
  for (int h = 0; h < harts; ++h) harts_.push_back(HartState::reset(h, image.entry));
}

std::uint64_t Cluster::bulk_copy(int hart, std::uint32_t src, std::uint32_t dst, std::uint32_t length) {
  const std::uint64_t cost = mem_.bulk_copy(src, dst, length);
  harts_.at(static_cast<std::size_t>(hart)).cycle += cost;
  return cost;
}

BarrierResult barrier_step(std::vector<HartState>& harts, std::uint32_t overhead) {
  BarrierResult r;
  std::uint64_t latest = 0;
  bool any = false;
  for (const auto& h : harts) {
    if (h.status == HartStatus::AtBarrier) {
      latest = std::max(latest, h.barrier_arrival);
      any = true;
    } else if (h.status != HartStatus::Halted) {
      r.missing.push_back(h.hart_id);
    }
  }
  if (!r.missing.empty() || !any) return r;
  r.released = true;
  r.release_cycle = latest + overhead;
  for (auto& h : harts) {
    if (h.status != HartStatus::AtBarrier) continue;
    h.stats.barrier_wait += r.release_cycle - h.barrier_arrival;
    h.cycle = r.release_cycle;
    h.status = HartStatus::Running;
  }
  return r;
}

namespace {

// Runs every Running hart until it leaves the Running state or its budget
// ends. A trap does not stop the others, so the report shows who reached the
// barrier. Returns false if some hart ran out of budget.
bool run_phase_deterministic(Cluster& c, const RunOptions& o, std::vector<std::uint64_t>& used) {
  auto& harts = c.harts();
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t i = 0; i < harts.size(); ++i) {
      auto& h = harts[i];
      if (h.status != HartStatus::Running) continue;
      if (used[i] >= o.max_steps_per_hart) continue;
      const std::uint64_t n = std::min(o.quantum, o.max_steps_per_hart - used[i]);
      const std::uint64_t before = h.stats.instructions;
      run_until_event(h, c.memory(), c.program(), c.table(), n);
      used[i] += std::max<std::uint64_t>(1, h.stats.instructions - before);
      progress = true;
    }
  }
  for (const auto& h : harts)
    if (h.status == HartStatus::Running) return false;
  return true;
}

bool run_phase_fast(Cluster& c, const RunOptions& o, std::vector<std::uint64_t>& used) {
  auto& harts = c.harts();
  unsigned workers = o.workers > 0 ? static_cast<unsigned>(o.workers) : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(harts.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < harts.size(); i = next++) {
      auto& h = harts[i];
      if (h.status != HartStatus::Running || used[i] >= o.max_steps_per_hart) continue;
      const std::uint64_t before = h.stats.instructions;
      run_until_event(h, c.memory(), c.program(), c.table(), o.max_steps_per_hart - used[i]);
      used[i] += std::max<std::uint64_t>(1, h.stats.instructions - before);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& h : harts)
    if (h.status == HartStatus::Running) return false;
  return true;
}

}  // namespace

ClusterRunReport run_cluster(Cluster& c, const RunOptions& o) {
  if (o.quantum == 0) throw ConfigError("quantum must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  auto& harts = c.harts();
  std::vector<std::uint64_t> used(harts.size(), 0);
  ClusterRunReport rep;

  for (;;) {
    const bool finished = o.mode == RunMode::Deterministic ? run_phase_deterministic(c, o, used)
                                                           : run_phase_fast(c, o, used);
    auto trapped = std::find_if(harts.begin(), harts.end(),
                                [](const HartState& h) { return h.status == HartStatus::Trapped; });
    if (trapped != harts.end()) {
      rep.outcome = RunOutcome::Trapped;
      rep.trapped_hart = trapped->hart_id;
      rep.missing = barrier_step(harts, c.table().barrier_overhead).missing;
      break;
    }
    const bool waiting = std::any_of(harts.begin(), harts.end(),
                                     [](const HartState& h) { return h.status == HartStatus::AtBarrier; });
    if (!finished) {
      rep.outcome = waiting ? RunOutcome::Deadlock : RunOutcome::BudgetExhausted;
      if (waiting) rep.missing = barrier_step(harts, c.table().barrier_overhead).missing;
      break;
    }
    if (!waiting) {
      rep.outcome = RunOutcome::Completed;
      break;
    }
    barrier_step(harts, c.table().barrier_overhead);
  }

  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& h : harts) {
    HartReport r;
    r.hart_id = h.hart_id;
    r.instructions = h.stats.instructions;
    r.cycles = h.cycle;
    r.raw_stalls = h.stats.raw_stalls;
    r.mem_stalls = h.stats.mem_stalls;
    r.barrier_wait = h.stats.barrier_wait;
    r.status = h.status;
    r.cause = h.cause;
    r.trap_pc = h.trap_pc;
    r.trap_addr = h.trap_addr;
    rep.total_cycles = std::max(rep.total_cycles, r.cycles);
    rep.total_instructions += r.instructions;
    rep.harts.push_back(r);
  }
  rep.mips = rep.wall_seconds > 0 ? static_cast<double>(rep.total_instructions) / rep.wall_seconds / 1e6 : 0.0;
  return rep;
}

std::string ClusterRunReport::describe() const {
  std::ostringstream o;
  o << outcome_name(outcome);
  if (outcome == RunOutcome::Trapped && trapped_hart >= 0) {
    const auto& h = harts.at(static_cast<std::size_t>(trapped_hart));
    char buf[96];
    std::snprintf(buf, sizeof buf, ": hart %d %s at pc 0x%08x (addr 0x%08x)", h.hart_id,
                  std::string(trap_name(h.cause)).c_str(), h.trap_pc, h.trap_addr);
    o << buf;
  }
  if (!missing.empty()) {
    o << "; harts not at barrier:";
    for (int m : missing) o << ' ' << m;
  }
  return o.str();
}

std::string format_run_report(const ClusterRunReport& r, bool timing) {
  std::ostringstream o;
  o << "outcome=" << outcome_name(r.outcome) << "\n"
    << "detail=" << r.describe() << "\n"
    << "harts=" << r.harts.size() << "\n"
    << "total_cycles=" << r.total_cycles << "\n"
    << "total_instructions=" << r.total_instructions << "\n";
  if (timing) o << "wall_seconds=" << r.wall_seconds << "\n" << "mips=" << r.mips << "\n";
  o << "hart_id,instructions,cycles,raw_stalls,mem_stalls,barrier_wait,status\n";
  for (const auto& h : r.harts)
    o << h.hart_id << ',' << h.instructions << ',' << h.cycles << ',' << h.raw_stalls << ',' << h.mem_stalls << ','
      << h.barrier_wait << ',' << status_name(h.status) << "\n";
  return o.str();
}

}  // namespace sdrsim
