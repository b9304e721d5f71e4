// sdrsim command-line driver.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "manifest.hpp"
#include "sdrsim/config.hpp"
#include "sdrsim/isa.hpp"
#include "sdrsim/mc.hpp"

namespace fs = std::filesystem;
using namespace sdrsim;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kInputError = 1;  // unreadable file or bad assembly
constexpr int kUsage = 2;       // command line or configuration
constexpr int kTrapped = 3;     // emulated trap or deadlock
constexpr int kBudget = 4;      // step budget exhausted
constexpr int kLowConfidence = 5;

struct Options {
  std::string input;
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool strict = false;
  std::string mode = "deterministic";
};

std::string out_dir(const Options& o, const std::optional<std::string>& from_manifest) {
  std::string d = o.out ? *o.out : from_manifest ? *from_manifest : ".";
  fs::create_directories(d);
  return d;
}

RunOptions run_options(const Options& o, std::uint64_t max_steps, std::uint64_t quantum,
                       std::optional<int> manifest_workers) {
  RunOptions r;
  r.mode = o.mode == "fast" ? RunMode::Fast : RunMode::Deterministic;
  r.max_steps_per_hart = max_steps;
  r.quantum = quantum;
  if (o.workers) r.workers = *o.workers;
  else if (manifest_workers) r.workers = *manifest_workers;
  return r;
}

cli::Manifest need_manifest(const Options& o) {
  if (!o.config) throw ConfigError("--config is required for this command");
  return cli::load_manifest(*o.config);
}

std::string timing_sidecar(double wall, double mips) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "wall_seconds=%.6f\nmips=%.3f\n", wall, mips);
  return buf;
}

int outcome_code(const ClusterRunReport& r) {
  switch (r.outcome) {
    case RunOutcome::Completed: return kOk;
    case RunOutcome::BudgetExhausted: return kBudget;
    default: return kTrapped;
  }
}

int cmd_assemble(const Options& o) {
  const ProgramImage img = assemble(read_text_file(o.input));
  const std::string path = (fs::path(out_dir(o, std::nullopt)) / fs::path(o.input).stem()).string() + ".bin";
  write_image_files(img, path);
  std::cout << "wrote " << path << " (" << img.text.size() << " instructions)\n";
  return kOk;
}

int cmd_disassemble(const Options& o) {
  const std::string text = disassemble(read_image_files(o.input));
  if (!o.out) {
    std::cout << text;
    return kOk;
  }
  const std::string path = (fs::path(out_dir(o, std::nullopt)) / fs::path(o.input).stem()).string() + ".s";
  write_text_file(path, text);
  std::cout << "wrote " << path << "\n";
  return kOk;
}

int cmd_run(const Options& o) {
  const cli::Manifest m = need_manifest(o);
  if (!m.program) throw ConfigError(m.path + ": 'program' is required by run");
  const std::string& prog = *m.program;
  const std::string ext = fs::path(prog).extension().string();
  ProgramImage img;
  try {
    img = ext == ".s" || ext == ".S" || ext == ".asm" ? assemble(read_text_file(prog)) : read_image_files(prog);
  } catch (const AsmError& e) {
    throw IoError(prog + ": " + e.what());
  }
  Cluster c(m.cluster, m.latency);
  c.load(img, m.harts);
  const ClusterRunReport r = run_cluster(c, run_options(o, m.max_steps, m.quantum, m.workers));

  const fs::path dir = out_dir(o, m.out);
  write_text_file((dir / "report.txt").string(), format_run_report(r, false));
  write_text_file((dir / "report.meta").string(), timing_sidecar(r.wall_seconds, r.mips));
  std::printf("outcome       %s\ncycles        %llu\ninstructions  %llu\nmips          %.3f\n",
              r.describe().c_str(), static_cast<unsigned long long>(r.total_cycles),
              static_cast<unsigned long long>(r.total_instructions), r.mips);
  if (!r.ok()) std::cerr << "error: " << r.describe() << "\n";
  return outcome_code(r);
}

int cmd_kernel_gen(const Options& o) {
  const cli::Manifest m = need_manifest(o);
  if (!m.kernel) throw ConfigError(m.path + ": 'variant' is required by kernel-gen");
  const KernelProgram k = generate_kernel(*m.kernel, m.cluster);
  const fs::path dir = out_dir(o, m.out);
  write_text_file((dir / "kernel.s").string(), k.assembly);
  write_image_files(k.image, (dir / "kernel.bin").string());
  write_text_file((dir / "layout.txt").string(), format_layout(k.layout));
  std::cout << "wrote kernel.s, kernel.bin and layout.txt to " << dir.string() << " (" << k.image.text.size()
            << " instructions, " << k.layout.required_bytes() << " bytes of L1 per hart)\n";
  return kOk;
}

int cmd_ber(const Options& o) {
  if (!o.config) throw ConfigError("--config is required for this command");
  SweepConfig cfg = load_sweep_config(*o.config);
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  cfg.validate();
  const auto pts = ber_sweep(cfg);
  const fs::path dir = out_dir(o, std::nullopt);
  persist_results(pts, (dir / "ber.csv").string());

  bool weak = false;
  std::printf("%10s %12s %12s %14s %8s %9s\n", "snr_db", "ber", "bit_errors", "bits_total", "trials", "erasures");
  for (const auto& p : pts) {
    std::printf("%10.3g %12.4e %12llu %14llu %8llu %9llu%s\n", p.snr_db, p.ber(),
                static_cast<unsigned long long>(p.bit_errors), static_cast<unsigned long long>(p.bits_total),
                static_cast<unsigned long long>(p.trials), static_cast<unsigned long long>(p.erasures),
                p.low_confidence ? "  low-confidence" : "");
    weak |= p.low_confidence;
  }
  std::cout << "wrote " << (dir / "ber.csv").string() << "\n";
  if (weak) {
    std::cerr << (o.strict ? "error" : "warning") << ": some points stopped at max_trials below "
              << cfg.target_bit_errors << " bit errors\n";
    if (o.strict) return kLowConfidence;
  }
  return kOk;
}

int cmd_cycles(const Options& o) {
  const cli::Manifest m = need_manifest(o);
  if (!m.kernel) throw ConfigError(m.path + ": 'variant' is required by cycles");
  CycleOptions co;
  co.snr_db = m.snr_db;
  co.seed = o.seed ? *o.seed : m.seed;
  co.run = run_options(o, m.max_steps, m.quantum, m.workers);
  const CycleReport r = cycle_report(*m.kernel, m.cluster, m.latency, co);
  const fs::path dir = out_dir(o, m.out);
  persist_report(r, (dir / "cycles.txt").string(), false);
  write_text_file((dir / "cycles.meta").string(), timing_sidecar(r.wall_seconds, r.mips));
  std::printf("variant       %s (%dx%d, batch %d, %d harts)\ncycles        %llu\ninstructions  %llu\n"
              "stalls        raw %llu, memory %llu, barrier %llu\naborted       %d\nmips          %.3f\n",
              std::string(variant_name(r.spec.variant)).c_str(), r.spec.n_rx, r.spec.n_tx, r.spec.batch,
              r.spec.harts, static_cast<unsigned long long>(r.total_cycles),
              static_cast<unsigned long long>(r.total_instructions), static_cast<unsigned long long>(r.raw_stalls),
              static_cast<unsigned long long>(r.mem_stalls), static_cast<unsigned long long>(r.barrier_wait),
              r.aborted_problems, r.mips);
  if (!r.run.ok()) std::cerr << "error: " << r.run.describe() << "\n";
  return outcome_code(r.run);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-approximate many-core emulator and MIMO detection toolkit"};
  app.require_subcommand(1);
  Options o;

  app.add_option("--config", o.config, "Manifest or sweep configuration file");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--seed", o.seed, "Override the master seed");
  app.add_option("--workers", o.workers, "Host worker threads")->check(CLI::Range(1, 1024));
  app.add_flag("--strict", o.strict, "Fail when a BER point stops below its error target");
  app.add_option("--mode", o.mode, "Cluster scheduling mode")
      ->check(CLI::IsMember({"deterministic", "fast"}));

  auto* as = app.add_subcommand("assemble", "Assemble SOURCE into OUT/<stem>.bin and a .sym sidecar");
  as->add_option("source", o.input, "Assembly source")->required();
  auto* dis = app.add_subcommand("disassemble", "Disassemble IMAGE to stdout or OUT/<stem>.s");
  dis->add_option("image", o.input, "Binary image")->required();
  auto* run = app.add_subcommand("run", "Run the manifest's program and write OUT/report.txt");
  auto* kg = app.add_subcommand("kernel-gen", "Generate the manifest's detection kernel into OUT");
  auto* ber = app.add_subcommand("ber", "Run a BER sweep and write OUT/ber.csv");
  auto* cyc = app.add_subcommand("cycles", "Time the manifest's kernel and write OUT/cycles.txt");
  for (auto* s : {as, dis, run, kg, ber, cyc}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*as) return cmd_assemble(o);
    if (*dis) return cmd_disassemble(o);
    if (*run) return cmd_run(o);
    if (*kg) return cmd_kernel_gen(o);
    if (*ber) return cmd_ber(o);
    if (*cyc) return cmd_cycles(o);
  } catch (const AsmError& e) {
    std::cerr << o.input << ": " << e.what() << "\n";
    return kInputError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kUsage;
}
