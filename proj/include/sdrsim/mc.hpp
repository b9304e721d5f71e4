#pragma once
// Monte Carlo BER sweeps and kernel cycle reports.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sdrsim/cluster_run.hpp"
#include "sdrsim/kernels.hpp"
#include "sdrsim/phy.hpp"

namespace sdrsim {

enum class Engine : std::uint8_t { GoldenDouble, HostFunctional, Emulated };

std::string_view engine_name(Engine e);
Engine parse_engine(std::string_view s);

struct SweepConfig {
  Variant variant = Variant::Half16;
  Modulation modulation = Modulation::Qam16;
  ChannelKind channel = ChannelKind::AwgnIdentity;
  SnrConvention convention = SnrConvention::EsN0;
  int n_tx = 4;
  int n_rx = 4;
  std::vector<double> snr_db;
  std::uint64_t target_bit_errors = 100;
  std::uint64_t max_trials = 1000;  // iterations per point
  int n_sc = 1638;                   // problems per iteration
  Engine engine = Engine::HostFunctional;
  std::uint64_t master_seed = 1;
  int workers = 1;
  // Emulated engine only
  ClusterConfig cluster;
  LatencyTable latency = LatencyTable::defaults();

  /// Throws ConfigError.
  void validate() const;
  /// The detector actually run: GoldenDouble always uses Double64.
  Variant effective_variant() const { return engine == Engine::GoldenDouble ? Variant::Double64 : variant; }
};

/// "key = value" text. snr_db is a comma-separated list. Keys naming files
/// (cluster_config, latency_table) are resolved relative to `base_dir`.
SweepConfig parse_sweep_config(std::string_view text, const std::string& base_dir = ".");
SweepConfig load_sweep_config(const std::string& path);
std::string format_sweep_config(const SweepConfig& c);

struct IterationResult {
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  std::uint64_t erasure_problems = 0;
  bool operator==(const IterationResult&) const = default;
};

/// Seed of iteration `iteration` at SNR point `snr_index`.
std::uint64_t iteration_seed(std::uint64_t master, std::size_t snr_index, std::uint64_t iteration);

/// One iteration: n_sc independent problems, detected and hard-demapped. A
/// problem whose detection aborts or yields a non-finite symbol is an
/// erasure and all of its bits count as errors.
IterationResult run_iteration(const SweepConfig& cfg, std::size_t snr_index, std::uint64_t iteration);

struct BerPoint {
  double snr_db = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits_total = 0;
  std::uint64_t trials = 0;
  std::uint64_t erasures = 0;  // erasure problems
  bool low_confidence = false;  // max_trials reached below the target

  double ber() const { return bits_total ? static_cast<double>(bit_errors) / static_cast<double>(bits_total) : 0.0; }
  /// Binomial standard error of ber().
  double std_error() const;
  bool operator==(const BerPoint&) const = default;
};

/// Runs every SNR point until the target error count (or max_trials). The
/// counted iterations are the shortest index prefix reaching the target, so
/// the result does not depend on the worker count.
std::vector<BerPoint> ber_sweep(const SweepConfig& cfg);

inline constexpr std::string_view kBerCsvHeader = "snr_db,ber,bit_errors,bits_total,trials,erasures";

std::string format_ber_csv(const std::vector<BerPoint>& pts);
/// Throws ConfigError naming the offending line.
std::vector<BerPoint> parse_ber_csv(std::string_view text);
void persist_results(const std::vector<BerPoint>& pts, const std::string& path);
std::vector<BerPoint> load_results(const std::string& path);

// ---------------------------------------------------------------------------

struct CycleReport {
  KernelSpec spec;
  ClusterRunReport run;
  std::uint64_t total_cycles = 0;  // max over harts
  std::uint64_t total_instructions = 0;
  std::uint64_t raw_stalls = 0;
  std::uint64_t mem_stalls = 0;
  std::uint64_t barrier_wait = 0;
  int aborted_problems = 0;  // non-positive pivots on the sample data
  double wall_seconds = 0;
  double mips = 0;
};

struct CycleOptions {
  double snr_db = 0;  // sample data: Rayleigh channel, 16-QAM
  std::uint64_t seed = 1;
  RunOptions run;
};

CycleReport cycle_report(const KernelSpec& spec, const ClusterConfig& cfg, const LatencyTable& table,
                         const CycleOptions& opts = {});

/// Structured text. Without `timing` the output is reproducible.
std::string format_cycle_report(const CycleReport& r, bool timing = true);
void persist_report(const CycleReport& r, const std::string& path, bool timing = true);

}  // namespace sdrsim
