// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   acceptance [--only N,...] [--known-red N,...]
//
// Exit status is 0 when every failing criterion is listed in --known-red.

#include <Eigen/LU>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "helpers.hpp"
#include "oracle.hpp"
#include "problems.hpp"
#include "sdrsim/golden.hpp"
#include "sdrsim/kernels.hpp"
#include "sdrsim/lowprec.hpp"
#include "sdrsim/mc.hpp"

using namespace sdrsim;

namespace {

// Pinned tolerances and corpus sizes.
constexpr int kFp16Random = 1'000'000;
constexpr double kGoldenRelTol = 1e-12;
constexpr int kGoldenProblems = 1000;
constexpr int kEquivProblems = 128;  // per variant and size
constexpr std::uint32_t kMemLatency = 9;
constexpr double kTrackSigmas = 3.0;
constexpr double k8BitLoss = 3.0;
constexpr std::uint64_t kBerTarget = 1000;  // bit errors per point
constexpr double kReferenceMips = 3.57;
// AWGN: the top point sits where the reference BER is about 1e-3.
const std::vector<double> kAwgnSnr = {8, 10, 12, 14, 16.5};
const std::vector<double> kRayleighSnr = {10, 15, 20, 25, 30};

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome arithmetic() {
  std::uint64_t checked = 0, bad = 0;
  auto cmp = [&](Bits got, std::optional<Bits> want) {
    if (!want) return;
    ++checked;
    bad += got != *want;
  };
  const FpFormat f8 = FpFormat::FP8, f16 = FpFormat::FP16;
  std::vector<Bits> c8;
  for (Bits c = 0; c < 256; ++c)
    if ((c & 0x40u) == 0 && oracle::finite(c, f8)) c8.push_back(c);
  for (Bits a : c8) {
    cmp(fp_sqrt(a, f8), oracle::sqrt(a, f8));
    cmp(fp_cast(a, f8, f16), oracle::table(f16).round(oracle::field_value(a, f8), oracle::neg(a, f8)));
    const mpq_class v = oracle::field_value(a, f8);
    cmp(fp_cast(a, f8, FpFormat::FP32), std::bit_cast<Bits>(static_cast<float>(v.get_d())) |
                                            (oracle::neg(a, f8) ? 0x80000000u : 0u));
    for (Bits b : c8) {
      cmp(fp_add(a, b, f8), oracle::add(a, b, f8));
      cmp(fp_sub(a, b, f8), oracle::add(a, b ^ 0x80u, f8));
      cmp(fp_mul(a, b, f8), oracle::mul(a, b, f8));
      cmp(fp_div(a, b, f8), oracle::div(a, b, f8));
      for (Bits c : c8) cmp(fp_fma(a, b, c, f8), oracle::fma(a, b, c, f8));
    }
  }
  for (Bits a = 0; a < 0x10000; ++a) {
    if (!oracle::finite(a, f16)) continue;
    cmp(fp_cast(a, f16, f8), oracle::table(f8).round(oracle::field_value(a, f16), oracle::neg(a, f16)));
    cmp(fp_sqrt(a, f16), oracle::sqrt(a, f16));
  }
  const std::uint64_t fp8_checked = checked;

  std::vector<Bits> edge = {0x0000, 0x0001, 0x0002, 0x03FF, 0x0400, 0x0401, 0x07FF, 0x3BFF,
                            0x3C00, 0x3C01, 0x4000, 0x7800, 0x7BFE, 0x7BFF};
  for (std::size_t i = 0, n = edge.size(); i < n; ++i) edge.push_back(edge[i] | 0x8000u);
  for (Bits a : edge)
    for (Bits b : edge) {
      cmp(fp_add(a, b, f16), oracle::add(a, b, f16));
      cmp(fp_mul(a, b, f16), oracle::mul(a, b, f16));
      cmp(fp_div(a, b, f16), oracle::div(a, b, f16));
      for (Bits c : edge) cmp(fp_fma(a, b, c, f16), oracle::fma(a, b, c, f16));
    }
  std::mt19937 rng(20240601);
  auto draw = [&] {
    for (;;)
      if (Bits b = rng() & 0xFFFFu; oracle::finite(b, f16)) return b;
  };
  for (int i = 0; i < kFp16Random; ++i) {
    const Bits a = draw(), b = draw(), c = draw();
    cmp(fp_add(a, b, f16), oracle::add(a, b, f16));
    cmp(fp_mul(a, b, f16), oracle::mul(a, b, f16));
    cmp(fp_fma(a, b, c, f16), oracle::fma(a, b, c, f16));
    cmp(fp_div(a, b, f16), oracle::div(a, b, f16));
  }
  return {bad == 0, fmt("%llu fp8 and %llu fp16 results against the rational oracle, %llu mismatches",
                        static_cast<unsigned long long>(fp8_checked),
                        static_cast<unsigned long long>(checked - fp8_checked), static_cast<unsigned long long>(bad))};
}

// ---------------------------------------------------------------------------

using LMatrix = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, Eigen::Dynamic>;

CVector<double> inverse_oracle(const DetectionProblem& p) {
  const LMatrix H = p.H.cast<std::complex<long double>>();
  const LMatrix y = p.y.cast<std::complex<long double>>();
  LMatrix G = H.adjoint() * H;
  G.diagonal().array() += static_cast<long double>(p.sigma2);
  const LMatrix x = G.fullPivLu().inverse() * (H.adjoint() * y);
  return x.col(0).cast<std::complex<double>>();
}

Outcome golden() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> logs(std::log(0.05), 0.0);
  double worst = 0;
  int over = 0;
  for (int n : {2, 4, 8, 16, 32})
    for (int t = 0; t < kGoldenProblems; ++t) {
      const DetectionProblem p = testing::random_problem(rng, n, n, std::exp(logs(rng)));
      const CVector<double> ref = inverse_oracle(p);
      const double rel = (golden_mmse(p) - ref).norm() / ref.norm();
      worst = std::max(worst, rel);
      over += rel > kGoldenRelTol;
    }
  return {over == 0, fmt("5 sizes x %d problems, worst relative error %.2e (limit %.0e), %d over",
                         kGoldenProblems, worst, kGoldenRelTol, over)};
}

// ---------------------------------------------------------------------------

Outcome equivalence() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> logs(std::log(1e-3), std::log(2.0));
  int runs = 0, mismatches = 0, problems = 0;
  for (Variant v : kDeviceVariants)
    for (int nt : {2, 4})
      for (int nr : {nt, nt + 2}) {
        KernelSpec s;
        s.variant = v;
        s.n_tx = nt;
        s.n_rx = nr;
        s.harts = 16;
        s.batch = kEquivProblems / s.harts;
        const ClusterConfig cfg;
        const KernelProgram k = generate_kernel(s, cfg);
        std::vector<QuantizedProblem> qs;
        for (int i = 0; i < kEquivProblems; ++i)
          qs.push_back(quantize(testing::random_problem(rng, nt, nr, std::exp(logs(rng))), v));
        const EmulatedRun r = run_emulated(k, cfg, LatencyTable::defaults(), qs);
        ++runs;
        if (!r.report.ok()) {
          mismatches += kEquivProblems;
          continue;
        }
        for (int i = 0; i < kEquivProblems; ++i) {
          ++problems;
          mismatches += !(r.results[static_cast<std::size_t>(i)] == functional_run(qs[static_cast<std::size_t>(i)]));
        }
      }
  return {mismatches == 0, fmt("%d kernels, %d problems, %d output or status mismatches", runs, problems, mismatches)};
}

// ---------------------------------------------------------------------------

Outcome timing() {
  std::vector<std::string> fails;
  std::ostringstream info;

  // (a) unit latencies: cycles equal issued instructions on every kernel
  int a_runs = 0;
  for (Variant v : kDeviceVariants) {
    KernelSpec s;
    s.variant = v;
    s.harts = 8;
    s.batch = 2;
    const CycleReport r = cycle_report(s, ClusterConfig{}, LatencyTable::unit());
    for (const auto& h : r.run.harts)
      if (h.cycles != h.instructions) fails.push_back(fmt("(a) %s hart %d", variant_name(v).data(), h.hart_id));
    ++a_runs;
  }

  // (b) a load feeding the next instruction stalls for the memory latency minus one
  LatencyTable t = LatencyTable::defaults();
  t.memory_mode = MemoryLatencyMode::ConservativeUniform;
  t.uniform_latency = kMemLatency;
  const std::string head = "  li a0, 0x10000000\n  lw t0, 0(a0)\n";
  auto dep = testing::run_source(head + "  addi t1, t0, 1\n  halt\n", 1, t);
  auto ind = testing::run_source(head + "  addi t1, a0, 1\n  halt\n", 1, t);
  const auto stall = static_cast<long long>(dep.report.harts[0].cycles) -
                     static_cast<long long>(ind.report.harts[0].cycles);
  if (stall != kMemLatency - 1) fails.push_back(fmt("(b) stall %lld", stall));
  info << "(b) dependent-load stall " << stall << "; ";

  // (c) harts with unequal work leave the barrier on the same cycle
  const std::string uneven =
      "  csrr t0, mhartid\n  slli t0, t0, 3\nspin:\n  addi t0, t0, -1\n  bge t0, zero, spin\n"
      "  barrier\n  csrr t1, cycle\n  csrr t3, mhartid\n  slli t3, t3, 2\n"
      "  li t4, 0x10000000\n  add t4, t4, t3\n  sw t1, 0(t4)\n  halt\n";
  auto bar = testing::run_source(uneven, 8, t);
  std::set<Bits> after;
  for (int h = 0; h < 8; ++h) after.insert(bar.cluster.memory().read(kL1Base + 4u * static_cast<Bits>(h), 4));
  if (!bar.report.ok() || after.size() != 1) fails.push_back("(c) post-barrier cycles differ");

  // (d) the conservative model never undercuts the region model
  LatencyTable region = LatencyTable::defaults();
  region.memory_mode = MemoryLatencyMode::RegionBased;
  int d_points = 0;
  for (Variant v : kDeviceVariants)
    for (int n : {2, 4, 8})
      for (int harts : {1, 16}) {
        KernelSpec s;
        s.variant = v;
        s.n_tx = s.n_rx = n;
        s.harts = harts;
        const CycleReport c = cycle_report(s, ClusterConfig{}, LatencyTable::defaults());
        const CycleReport r = cycle_report(s, ClusterConfig{}, region);
        for (std::size_t h = 0; h < c.run.harts.size(); ++h) {
          ++d_points;
          if (c.run.harts[h].cycles < r.run.harts[h].cycles)
            fails.push_back(fmt("(d) %s %dx%d hart %zu", variant_name(v).data(), n, n, h));
        }
      }
  info << "(a) " << a_runs << " kernels; (d) " << d_points << " hart timings";
  std::string detail = info.str();
  if (!fails.empty()) detail += "; failed: " + fails.front() + (fails.size() > 1 ? " and more" : "");
  return {fails.empty(), detail};
}

// ---------------------------------------------------------------------------

Outcome ordering() {
  const Variant order[] = {Variant::CDotp16, Variant::WDotp8, Variant::WDotp16, Variant::Half16};
  std::map<Variant, CycleReport> r;
  for (Variant v : order) {
    KernelSpec s;
    s.variant = v;
    s.n_tx = s.n_rx = 32;
    r[v] = cycle_report(s, ClusterConfig{}, LatencyTable::defaults());
  }
  bool ok = true;
  for (int i = 0; i + 1 < 4; ++i) ok &= r[order[i]].total_instructions < r[order[i + 1]].total_instructions;
  auto ratio = [&](Variant v, bool cycles) {
    const auto& h = r[Variant::Half16];
    return cycles ? static_cast<double>(h.total_cycles) / static_cast<double>(r[v].total_cycles)
                  : static_cast<double>(h.total_instructions) / static_cast<double>(r[v].total_instructions);
  };
  return {ok, fmt("issued cdotp16 %llu < wdotp8 %llu < wdotp16 %llu < half16 %llu; half16 over "
                  "wdotp16/cdotp16/wdotp8: issue %.2f/%.2f/%.2f (reference 1.15/1.84/1.37), "
                  "cycles %.2f/%.2f/%.2f (reference 1.05/1.54/1.07)",
                  static_cast<unsigned long long>(r[Variant::CDotp16].total_instructions),
                  static_cast<unsigned long long>(r[Variant::WDotp8].total_instructions),
                  static_cast<unsigned long long>(r[Variant::WDotp16].total_instructions),
                  static_cast<unsigned long long>(r[Variant::Half16].total_instructions),
                  ratio(Variant::WDotp16, false), ratio(Variant::CDotp16, false), ratio(Variant::WDotp8, false),
                  ratio(Variant::WDotp16, true), ratio(Variant::CDotp16, true), ratio(Variant::WDotp8, true))};
}

// ---------------------------------------------------------------------------

std::vector<BerPoint> sweep(Engine e, Variant v, ChannelKind ch, const std::vector<double>& snr) {
  SweepConfig c;
  c.engine = e;
  c.variant = v;
  c.channel = ch;
  c.snr_db = snr;
  c.target_bit_errors = kBerTarget;
  c.max_trials = 2000;
  c.master_seed = 2024;
  return ber_sweep(c);
}

// Distance between two estimates in combined standard errors.
double sigmas(const BerPoint& a, const BerPoint& b) {
  const double se = std::hypot(a.std_error(), b.std_error());
  return se > 0 ? std::abs(a.ber() - b.ber()) / se : 0.0;
}

std::string curve(const char* name, const std::vector<BerPoint>& pts) {
  std::string s = std::string(name) + " [";
  for (std::size_t i = 0; i < pts.size(); ++i) s += fmt("%s%.2e", i ? " " : "", pts[i].ber());
  return s + "]";
}

Outcome ber_awgn() {
  const auto ref = sweep(Engine::GoldenDouble, Variant::Double64, ChannelKind::AwgnIdentity, kAwgnSnr);
  bool ok = true;
  std::string detail = fmt("snr %g..%g dB; ", kAwgnSnr.front(), kAwgnSnr.back()) + curve("golden", ref);
  for (const auto& p : ref) ok &= p.bit_errors >= 100;
  double worst = 0;
  for (Variant v : {Variant::Half16, Variant::WDotp16, Variant::CDotp16}) {
    const auto pts = sweep(Engine::HostFunctional, v, ChannelKind::AwgnIdentity, kAwgnSnr);
    for (std::size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, sigmas(pts[i], ref[i]));
  }
  ok &= worst <= kTrackSigmas;
  detail += fmt("; 16-bit worst deviation %.2f sigma", worst);
  for (Variant v : {Variant::Quarter8, Variant::WDotp8}) {
    const auto pts = sweep(Engine::HostFunctional, v, ChannelKind::AwgnIdentity, kAwgnSnr);
    const double loss = pts.back().ber() / ref.back().ber();
    ok &= loss >= k8BitLoss;
    detail += fmt("; %s loss at %g dB %.2fx (need %.0fx)", variant_name(v).data(), kAwgnSnr.back(), loss, k8BitLoss);
  }
  return {ok, detail};
}

Outcome ber_rayleigh() {
  const auto ref = sweep(Engine::GoldenDouble, Variant::Double64, ChannelKind::FlatRayleigh, kRayleighSnr);
  const auto half = sweep(Engine::HostFunctional, Variant::Half16, ChannelKind::FlatRayleigh, kRayleighSnr);
  bool ok = true;
  std::string detail = fmt("snr %g..%g dB; ", kRayleighSnr.front(), kRayleighSnr.back()) + curve("golden", ref) +
                       "; " + curve("half16", half);
  const BerPoint& h = half.back();
  for (Variant v : {Variant::WDotp16, Variant::CDotp16}) {
    const auto pts = sweep(Engine::HostFunctional, v, ChannelKind::FlatRayleigh, kRayleighSnr);
    double worst = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, sigmas(pts[i], ref[i]));
    const bool tracks = worst <= kTrackSigmas;
    const bool worse = h.ber() > pts.back().ber() && sigmas(h, pts.back()) > kTrackSigmas;
    ok &= tracks && worse;
    detail += fmt("; %s worst deviation %.2f sigma, half16 above it by %.2f sigma at %g dB", variant_name(v).data(),
                  worst, h.ber() > pts.back().ber() ? sigmas(h, pts.back()) : -sigmas(h, pts.back()),
                  kRayleighSnr.back());
    detail += "; " + curve(variant_name(v).data(), pts);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------

Outcome determinism() {
  std::vector<std::string> fails;
  SweepConfig c;
  c.variant = Variant::WDotp8;
  c.channel = ChannelKind::FlatRayleigh;
  c.snr_db = {5, 15, 25};
  c.n_sc = 256;
  c.target_bit_errors = 300;
  c.max_trials = 20;
  c.workers = 1;
  const auto base = ber_sweep(c);
  for (int w : {4, 8}) {
    c.workers = w;
    if (ber_sweep(c) != base) fails.push_back(fmt("workers=%d", w));
  }

  KernelSpec s;
  s.variant = Variant::CDotp16;
  s.harts = 32;
  s.batch = 3;
  const ClusterConfig cfg;
  const KernelProgram k = generate_kernel(s, cfg);
  std::mt19937_64 rng(13);
  std::vector<QuantizedProblem> qs;
  for (int i = 0; i < s.harts * s.batch; ++i) qs.push_back(quantize(testing::random_problem(rng, 4, 4, 0.1), s.variant));
  auto run = [&](std::uint64_t quantum) {
    RunOptions o;
    o.quantum = quantum;
    return run_emulated(k, cfg, LatencyTable::defaults(), qs, o);
  };
  auto same = [](const EmulatedRun& a, const EmulatedRun& b) {
    if (a.results != b.results || a.report.harts.size() != b.report.harts.size()) return false;
    for (std::size_t h = 0; h < a.report.harts.size(); ++h) {
      const auto &x = a.report.harts[h], &y = b.report.harts[h];
      if (x.cycles != y.cycles || x.instructions != y.instructions || x.raw_stalls != y.raw_stalls ||
          x.mem_stalls != y.mem_stalls || x.barrier_wait != y.barrier_wait)
        return false;
    }
    return a.report.total_cycles == b.report.total_cycles;
  };
  const EmulatedRun ref = run(1);
  for (std::uint64_t q : {10ull, 1000ull})
    if (!same(run(q), ref)) fails.push_back(fmt("quantum=%llu", static_cast<unsigned long long>(q)));
  if (!same(run(1), ref)) fails.push_back("repeat run");
  std::string detail = "ber_sweep over workers 1/4/8, 32-hart kernel over quanta 1/10/1000 and a repeat";
  if (!fails.empty()) detail += "; differs at " + fails.front();
  return {fails.empty(), detail};
}

Outcome throughput() {
  KernelSpec s;
  s.variant = Variant::Half16;
  s.n_tx = s.n_rx = 32;
  s.batch = 4;
  const CycleReport r = cycle_report(s, ClusterConfig{}, LatencyTable::defaults());
  return {r.run.ok() && r.mips > 0,
          fmt("single worker %.2f MIPS over %llu instructions (reference %.2f MIPS; informational)", r.mips,
              static_cast<unsigned long long>(r.total_instructions), kReferenceMips)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only, known_red;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--known-red", known_red, "Criteria whose failure does not fail the run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"bit-exact FP8/FP16 arithmetic", arithmetic},
      {"reference detector vs direct inverse", golden},
      {"emulated kernels vs bit-true model", equivalence},
      {"timing model properties", timing},
      {"32x32 issue-count ordering", ordering},
      {"AWGN 16-QAM 4x4 BER", ber_awgn},
      {"Rayleigh 16-QAM 4x4 BER", ber_rayleigh},
      {"determinism and worker invariance", determinism},
      {"emulation throughput", throughput},
  };
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = criteria[i].second();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool red_ok = std::find(known_red.begin(), known_red.end(), id) != known_red.end();
    std::printf("%s %d %s: %s (%.1fs)%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(), dt,
                !o.pass && red_ok ? " [known red]" : "");
    std::fflush(stdout);
    unexpected += !o.pass && !red_ok;
  }
  return unexpected == 0 ? 0 : 1;
}
