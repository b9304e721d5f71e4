#include "sdrsim/mc.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "sdrsim/config.hpp"

namespace sdrsim {

std::string_view engine_name(Engine e) {
  switch (e) {
    case Engine::GoldenDouble: return "golden";
    case Engine::HostFunctional: return "functional";
    case Engine::Emulated: return "emulated";
  }
  return "?";
}

Engine parse_engine(std::string_view s) {
  for (Engine e : {Engine::GoldenDouble, Engine::HostFunctional, Engine::Emulated})
    if (engine_name(e) == s) return e;
  throw ConfigError("unknown engine '" + std::string(s) + "' (golden, functional, emulated)");
}

void SweepConfig::validate() const {
  if (snr_db.empty()) throw ConfigError("snr_db list is empty");
  for (double s : snr_db)
    if (std::isnan(s) || s == -std::numeric_limits<double>::infinity())
      throw ConfigError("snr_db values must be numbers or +inf");
  if (target_bit_errors < 1) throw ConfigError("target_bit_errors must be >= 1");
  if (max_trials < 1) throw ConfigError("max_trials must be >= 1");
  if (n_sc < 1) throw ConfigError("n_sc must be >= 1");
  if (n_tx < 1 || n_rx < n_tx || n_rx > 64) throw ConfigError("need 1 <= n_tx <= n_rx <= 64");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (channel == ChannelKind::AwgnIdentity && n_rx != n_tx)
    throw ConfigError("the identity channel needs n_rx == n_tx");
  if (engine != Engine::GoldenDouble && variant == Variant::Double64)
    throw ConfigError("double64 runs only on the golden engine");
  if (engine == Engine::Emulated) cluster.validate();
}

namespace {

std::vector<double> parse_snr_list(const ConfigEntry& e) {
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(" \t");
    auto en = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("line " + std::to_string(e.line) + ": empty snr_db item");
    out.push_back(parse_double(ConfigEntry{e.line, e.key, item.substr(b, en - b + 1)}));
  }
  return out;
}

std::string resolve(const std::string& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? p : (std::filesystem::path(base) / path).string();
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SweepConfig parse_sweep_config(std::string_view text, const std::string& base_dir) {
  SweepConfig c;
  for (const auto& e : parse_entries(text)) {
    auto wrap = [&](auto&& fn) {
      try {
        fn();
      } catch (const ConfigError& err) {
        std::string msg = err.what();
        if (msg.rfind("line ", 0) == 0) throw;
        throw ConfigError("line " + std::to_string(e.line) + ": " + msg);
      }
    };
    const std::string& k = e.key;
    if (k == "variant") wrap([&] { c.variant = parse_variant(e.value); });
    else if (k == "modulation") wrap([&] { c.modulation = parse_modulation(e.value); });
    else if (k == "channel") wrap([&] { c.channel = parse_channel(e.value); });
    else if (k == "snr_convention") wrap([&] { c.convention = parse_snr_convention(e.value); });
    else if (k == "engine") wrap([&] { c.engine = parse_engine(e.value); });
    else if (k == "n_tx") c.n_tx = static_cast<int>(parse_int(e, 1, 64));
    else if (k == "n_rx") c.n_rx = static_cast<int>(parse_int(e, 1, 64));
    else if (k == "snr_db") c.snr_db = parse_snr_list(e);
    else if (k == "target_bit_errors") c.target_bit_errors = static_cast<std::uint64_t>(parse_int(e, 1, INT64_MAX));
    else if (k == "max_trials") c.max_trials = static_cast<std::uint64_t>(parse_int(e, 1, INT64_MAX));
    else if (k == "n_sc") c.n_sc = static_cast<int>(parse_int(e, 1, 1 << 20));
    else if (k == "master_seed") c.master_seed = static_cast<std::uint64_t>(parse_int(e, 0, INT64_MAX));
    else if (k == "workers") c.workers = static_cast<int>(parse_int(e, 1, 1024));
    else if (k == "cluster_config") c.cluster = load_cluster_config(resolve(base_dir, e.value));
    else if (k == "latency_table") c.latency = load_latency_table(resolve(base_dir, e.value));
    else throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

SweepConfig load_sweep_config(const std::string& path) {
  std::string dir = std::filesystem::path(path).parent_path().string();
  try {
    return parse_sweep_config(read_text_file(path), dir.empty() ? "." : dir);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string format_sweep_config(const SweepConfig& c) {
  std::ostringstream o;
  o << "variant = " << variant_name(c.variant) << '\n'
    << "modulation = " << modulation_name(c.modulation) << '\n'
    << "channel = " << channel_name(c.channel) << '\n'
    << "snr_convention = " << snr_convention_name(c.convention) << '\n'
    << "engine = " << engine_name(c.engine) << '\n'
    << "n_tx = " << c.n_tx << '\n'
    << "n_rx = " << c.n_rx << '\n'
    << "snr_db = ";
  for (std::size_t i = 0; i < c.snr_db.size(); ++i) o << (i ? ", " : "") << fmt_double(c.snr_db[i]);
  o << '\n'
    << "target_bit_errors = " << c.target_bit_errors << '\n'
    << "max_trials = " << c.max_trials << '\n'
    << "n_sc = " << c.n_sc << '\n'
    << "master_seed = " << c.master_seed << '\n'
    << "workers = " << c.workers << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------

std::uint64_t iteration_seed(std::uint64_t master, std::size_t snr_index, std::uint64_t iteration) {
  return derive_seed(master, snr_index, iteration);
}

namespace {

struct Trial {
  std::vector<std::uint8_t> bits;
  DetectionProblem problem;
};

Trial make_trial(const SweepConfig& cfg, const ChannelModel& ch, std::uint64_t iter_seed, int p) {
  const int bps = constellation(cfg.modulation).bits_per_symbol;
  Trial t;
  t.bits = random_bits(derive_seed(iter_seed, static_cast<std::uint64_t>(p), 0),
                       static_cast<std::size_t>(cfg.n_tx * bps));
  t.problem = apply_channel(qam_modulate(t.bits, cfg.modulation), ch,
                            derive_seed(iter_seed, static_cast<std::uint64_t>(p), 1));
  return t;
}

// Adds the errors of one detected problem. `ok == false` marks an erasure.
void score(IterationResult& r, const SweepConfig& cfg, const std::vector<std::uint8_t>& bits, bool ok,
           const CVector<double>& xhat) {
  r.bits += bits.size();
  if (ok) {
    std::vector<cplx> sym(xhat.data(), xhat.data() + xhat.size());
    Demapped d = qam_demodulate_hard(sym, cfg.modulation);
    if (d.erasures == 0) {
      for (std::size_t i = 0; i < bits.size(); ++i) r.bit_errors += d.bits[i] != bits[i];
      return;
    }
  }
  r.bit_errors += bits.size();
  ++r.erasure_problems;
}

ChannelModel channel_of(const SweepConfig& cfg, double snr_db) {
  ChannelModel ch;
  ch.kind = cfg.channel;
  ch.n_tx = cfg.n_tx;
  ch.n_rx = cfg.n_rx;
  ch.snr_db = snr_db;
  ch.convention = cfg.convention;
  ch.bits_per_symbol = constellation(cfg.modulation).bits_per_symbol;
  return ch;
}

}  // namespace

IterationResult run_iteration(const SweepConfig& cfg, std::size_t snr_index, std::uint64_t iteration) {
  if (snr_index >= cfg.snr_db.size()) throw ConfigError("snr index out of range");
  const ChannelModel ch = channel_of(cfg, cfg.snr_db[snr_index]);
  const std::uint64_t seed = iteration_seed(cfg.master_seed, snr_index, iteration);
  IterationResult r;

  if (cfg.engine != Engine::Emulated) {
    for (int p = 0; p < cfg.n_sc; ++p) {
      Trial t = make_trial(cfg, ch, seed, p);
      CVector<double> x;
      bool ok = true;
      try {
        x = cfg.engine == Engine::GoldenDouble ? golden_mmse(t.problem) : functional_mmse(t.problem, cfg.variant);
      } catch (const NonPositiveDiagonal&) {
        ok = false;
      }
      score(r, cfg, t.bits, ok, x);
    }
    return r;
  }

  KernelSpec spec;
  spec.variant = cfg.variant;
  spec.n_tx = cfg.n_tx;
  spec.n_rx = cfg.n_rx;
  spec.harts = std::min(cfg.cluster.cores(), cfg.n_sc);
  spec.batch = (cfg.n_sc + spec.harts - 1) / spec.harts;
  KernelProgram k = generate_kernel(spec, cfg.cluster);

  std::vector<Trial> trials;
  std::vector<QuantizedProblem> qs;
  for (int p = 0; p < cfg.n_sc; ++p) {
    trials.push_back(make_trial(cfg, ch, seed, p));
    qs.push_back(quantize(trials.back().problem, cfg.variant));
  }
  EmulatedRun run = run_emulated(k, cfg.cluster, cfg.latency, qs);
  if (!run.report.ok()) {
    std::string where;
    if (run.report.trapped_hart >= 0)
      where = "; hart " + std::to_string(run.report.trapped_hart) + " holds problems " +
              std::to_string(run.report.trapped_hart) + " + k*" + std::to_string(spec.harts);
    throw Error("emulated iteration " + std::to_string(iteration) + " at snr " + fmt_double(ch.snr_db) +
                " failed: " + run.report.describe() + where);
  }
  for (int p = 0; p < cfg.n_sc; ++p) {
    const FunctionalResult& fr = run.results[static_cast<std::size_t>(p)];
    score(r, cfg, trials[static_cast<std::size_t>(p)].bits, fr.status == 0,
          fr.status == 0 ? decode_xhat(fr.xhat) : CVector<double>());
  }
  return r;
}

double BerPoint::std_error() const {
  if (!bits_total) return 0;
  double p = ber();
  return std::sqrt(p * (1 - p) / static_cast<double>(bits_total));
}

std::vector<BerPoint> ber_sweep(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<BerPoint> out;
  const auto W = static_cast<std::uint64_t>(cfg.workers);
  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
    BerPoint pt;
    pt.snr_db = cfg.snr_db[si];
    std::uint64_t next = 0;
    bool done = false;
    while (!done && next < cfg.max_trials) {
      // Speculatively run a chunk, then fold it in index order.
      const std::uint64_t n = std::min(W, cfg.max_trials - next);
      std::vector<IterationResult> res(n);
      if (n == 1) {
        res[0] = run_iteration(cfg, si, next);
      } else {
        std::atomic<std::uint64_t> cursor{0};
        std::exception_ptr first_error;
        std::mutex err_mu;
        std::vector<std::thread> pool;
        for (std::uint64_t w = 0; w < n; ++w)
          pool.emplace_back([&] {
            for (std::uint64_t i; (i = cursor.fetch_add(1)) < n;) {
              try {
                res[i] = run_iteration(cfg, si, next + i);
              } catch (...) {
                std::lock_guard lk(err_mu);
                if (!first_error) first_error = std::current_exception();
              }
            }
          });
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
      }
      for (const auto& r : res) {
        pt.bit_errors += r.bit_errors;
        pt.bits_total += r.bits;
        pt.erasures += r.erasure_problems;
        ++pt.trials;
        if (pt.bit_errors >= cfg.target_bit_errors) {
          done = true;
          break;
        }
      }
      next += n;
    }
    pt.low_confidence = pt.bit_errors < cfg.target_bit_errors;
    out.push_back(pt);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string format_ber_csv(const std::vector<BerPoint>& pts) {
  std::string s(kBerCsvHeader);
  s += '\n';
  for (const auto& p : pts) {
    s += fmt_double(p.snr_db) + ',' + fmt_double(p.ber()) + ',' + std::to_string(p.bit_errors) + ',' +
         std::to_string(p.bits_total) + ',' + std::to_string(p.trials) + ',' + std::to_string(p.erasures) + '\n';
  }
  return s;
}

namespace {

std::uint64_t to_u64(std::string_view s, int line) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  return v;
}

double to_double(std::string_view s, int line) {
  if (s == "inf") return kNoiseOff;
  std::string str(s);
  char* end = nullptr;
  double v = std::strtod(str.c_str(), &end);
  if (str.empty() || *end) throw ConfigError("line " + std::to_string(line) + ": bad number '" + str + "'");
  return v;
}

}  // namespace

std::vector<BerPoint> parse_ber_csv(std::string_view text) {
  std::vector<BerPoint> out;
  std::istringstream in{std::string(text)};
  std::string row;
  int line = 0;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (line == 1) {
      if (row != kBerCsvHeader) throw ConfigError("line 1: expected header '" + std::string(kBerCsvHeader) + "'");
      continue;
    }
    if (row.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rv(row);
    for (std::size_t pos = 0;;) {
      auto c = rv.find(',', pos);
      f.push_back(rv.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
      if (c == std::string_view::npos) break;
      pos = c + 1;
    }
    if (f.size() != 6)
      throw ConfigError("line " + std::to_string(line) + ": expected 6 fields, got " + std::to_string(f.size()));
    BerPoint p;
    p.snr_db = to_double(f[0], line);
    double ber = to_double(f[1], line);
    p.bit_errors = to_u64(f[2], line);
    p.bits_total = to_u64(f[3], line);
    p.trials = to_u64(f[4], line);
    p.erasures = to_u64(f[5], line);
    if (p.bit_errors > p.bits_total)
      throw ConfigError("line " + std::to_string(line) + ": bit_errors exceeds bits_total");
    if (ber != p.ber()) throw ConfigError("line " + std::to_string(line) + ": ber does not match the counts");
    out.push_back(p);
  }
  if (line == 0) throw ConfigError("line 1: missing header");
  return out;
}

void persist_results(const std::vector<BerPoint>& pts, const std::string& path) {
  write_text_file(path, format_ber_csv(pts));
}

std::vector<BerPoint> load_results(const std::string& path) {
  try {
    return parse_ber_csv(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

CycleReport cycle_report(const KernelSpec& spec, const ClusterConfig& cfg, const LatencyTable& table,
                         const CycleOptions& opts) {
  KernelProgram k = generate_kernel(spec, cfg);
  SweepConfig sc;
  sc.modulation = Modulation::Qam16;
  sc.channel = ChannelKind::FlatRayleigh;
  sc.n_tx = spec.n_tx;
  sc.n_rx = spec.n_rx;
  const ChannelModel ch = channel_of(sc, opts.snr_db);
  std::vector<QuantizedProblem> qs;
  for (int p = 0; p < spec.harts * spec.batch; ++p)
    qs.push_back(quantize(make_trial(sc, ch, opts.seed, p).problem, spec.variant));

  auto t0 = std::chrono::steady_clock::now();
  EmulatedRun run = run_emulated(k, cfg, table, qs, opts.run);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  CycleReport r;
  r.spec = spec;
  r.run = run.report;
  r.total_cycles = run.report.total_cycles;
  r.total_instructions = run.report.total_instructions;
  for (const auto& h : run.report.harts) {
    r.raw_stalls += h.raw_stalls;
    r.mem_stalls += h.mem_stalls;
    r.barrier_wait += h.barrier_wait;
  }
  for (const auto& res : run.results) r.aborted_problems += res.status != 0;
  r.wall_seconds = wall;
  r.mips = wall > 0 ? static_cast<double>(r.total_instructions) / wall / 1e6 : 0;
  return r;
}

std::string format_cycle_report(const CycleReport& r, bool timing) {
  std::ostringstream o;
  o << "variant = " << variant_name(r.spec.variant) << '\n'
    << "n_tx = " << r.spec.n_tx << '\n'
    << "n_rx = " << r.spec.n_rx << '\n'
    << "batch = " << r.spec.batch << '\n'
    << "harts = " << r.spec.harts << '\n'
    << "aborted_problems = " << r.aborted_problems << '\n'
    << "stall.raw = " << r.raw_stalls << '\n'
    << "stall.memory = " << r.mem_stalls << '\n'
    << "stall.barrier = " << r.barrier_wait << '\n';
  if (timing) o << "wall_seconds = " << fmt_double(r.wall_seconds) << '\n' << "mips = " << fmt_double(r.mips) << '\n';
  o << format_run_report(r.run, timing);
  return o.str();
}

void persist_report(const CycleReport& r, const std::string& path, bool timing) {
  write_text_file(path, format_cycle_report(r, timing));
}

}  // namespace sdrsim
