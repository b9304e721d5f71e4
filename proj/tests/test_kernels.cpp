#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "problems.hpp"
#include "sdrsim/kernels.hpp"

using namespace sdrsim;
using testing::random_problem;

namespace {

// Every variant, bit-exact against the host model on the default cluster.
void check_equivalence(Variant v, int n_tx, int n_rx, int harts, int batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<QuantizedProblem> qs;
  for (int p = 0; p < harts * batch; ++p) {
    const double s2 = std::pow(10.0, -std::uniform_real_distribution<double>(-0.5, 3.0)(rng));
    qs.push_back(quantize(random_problem(rng, n_tx, n_rx, s2), v));
  }
  const ClusterConfig cfg;
  const KernelProgram k = generate_kernel({v, n_tx, n_rx, batch, harts}, cfg);
  const EmulatedRun run = run_emulated(k, cfg, LatencyTable::defaults(), qs);
  REQUIRE(run.report.outcome == RunOutcome::Completed);
  int mismatches = 0;
  for (std::size_t p = 0; p < qs.size(); ++p) {
    const FunctionalResult ref = functional_run(qs[p]);
    if (!(ref == run.results[p])) {
      ++mismatches;
      if (mismatches < 4) {
        INFO("problem " << p << " status " << ref.status << " vs " << run.results[p].status);
        for (std::size_t i = 0; i < ref.xhat.size(); ++i)
          INFO(std::hex << ref.xhat[i] << " vs " << run.results[p].xhat[i]);
        CHECK(ref == run.results[p]);
      }
    }
  }
  CHECK(mismatches == 0);
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("emulated kernel matches functional model bit for bit") {
    for (Variant v : kDeviceVariants) {
      CAPTURE(variant_name(v));
      check_equivalence(v, 2, 2, 50, 2, 11);
      check_equivalence(v, 4, 4, 25, 4, 12);
      check_equivalence(v, 2, 3, 20, 1, 13);
      check_equivalence(v, 4, 6, 20, 1, 14);
    }
  }

  TEST_CASE("larger sizes exercise the unrolled loops") {
    for (Variant v : kDeviceVariants) {
      CAPTURE(variant_name(v));
      check_equivalence(v, 8, 8, 4, 2, 21);
      check_equivalence(v, 9, 13, 3, 1, 22);
    }
  }
}

namespace {

CVector<double> direct_inverse_solve(const DetectionProblem& p) {
  CMatrix<double> G = p.H.adjoint() * p.H;
  G.diagonal().array() += p.sigma2;
  return G.fullPivLu().inverse() * (p.H.adjoint() * p.y);
}

double rel(const CVector<double>& a, const CVector<double>& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_SUITE("golden") {
  TEST_CASE("closed-form examples") {
    DetectionProblem p;
    p.H = CMatrix<double>::Identity(2, 2);
    p.y = CVector<double>(2);
    p.y << std::complex<double>(0.3, -1.2), std::complex<double>(2.0, 0.5);
    p.sigma2 = 1e-12;
    CHECK(rel(golden_mmse(p), p.y) < 1e-11);

    DetectionProblem s;
    s.H = CMatrix<double>::Identity(1, 1);
    s.y = CVector<double>::Constant(1, 2.0);
    s.sigma2 = 1;
    CHECK(std::abs(golden_mmse(s)(0) - 1.0) < 1e-15);
  }

  TEST_CASE("cholesky examples") {
    CHECK(cholesky<double>(CMatrix<double>::Identity(3, 3)) == CMatrix<double>::Identity(3, 3));
    CMatrix<double> G = CMatrix<double>::Zero(2, 2);
    G(0, 0) = 4;
    G(1, 1) = 9;
    const CMatrix<double> L = cholesky(G);
    CHECK(L(0, 0) == std::complex<double>(2, 0));
    CHECK(L(1, 1) == std::complex<double>(3, 0));
    CHECK(L(1, 0) == std::complex<double>(0, 0));
  }

  TEST_CASE("non-positive pivot reports its column") {
    CMatrix<double> G = CMatrix<double>::Identity(3, 3);
    G(2, 2) = -1;
    try {
      (void)cholesky(G);
      FAIL("expected NonPositiveDiagonal");
    } catch (const NonPositiveDiagonal& e) {
      CHECK(e.index == 2);
    }
  }

  TEST_CASE("cholesky path agrees with a direct inverse") {
    std::mt19937_64 rng(3);
    for (int n : {1, 2, 4, 8, 16, 32}) {
      for (int t = 0; t < 5; ++t) {
        const DetectionProblem p = random_problem(rng, n, n + t % 3, 0.5);
        CAPTURE(n);
        CHECK(rel(golden_mmse(p), direct_inverse_solve(p)) < 1e-12);
        const auto st = mmse_steps<double>(p.H, p.y, p.sigma2);
        CHECK(st.G == st.G.adjoint());
        CHECK((st.L * st.L.adjoint() - st.G).norm() / st.G.norm() < 1e-14);
        for (int i = 0; i < n; ++i) {
          CHECK(st.L(i, i).imag() == 0.0);
          CHECK(st.L(i, i).real() > 0.0);
          for (int j = i + 1; j < n; ++j) CHECK(st.L(i, j) == std::complex<double>(0, 0));
        }
      }
    }
  }

  TEST_CASE("templated on the scalar type") {
    std::mt19937_64 rng(4);
    const DetectionProblem p = random_problem(rng, 4, 4, 0.2);
    const CMatrix<float> Hf = p.H.cast<std::complex<float>>();
    const CVector<float> yf = p.y.cast<std::complex<float>>();
    const auto xf = mmse_steps<float>(Hf, yf, static_cast<float>(p.sigma2)).x;
    CHECK(rel(xf.cast<std::complex<double>>(), golden_mmse(p)) < 1e-4);
  }

  TEST_CASE("problem validation") {
    DetectionProblem p;
    p.H = CMatrix<double>::Identity(2, 3);
    p.y = CVector<double>::Zero(2);
    p.sigma2 = 1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.H = CMatrix<double>::Identity(3, 2);
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.y = CVector<double>::Zero(3);
    p.sigma2 = -1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.sigma2 = 1;
    CHECK_NOTHROW(p.validate());
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("identity problem is exact in every variant") {
    DetectionProblem p;
    p.H = CMatrix<double>::Identity(1, 1);
    p.y = CVector<double>::Constant(1, std::complex<double>(3.0, -1.0));
    p.sigma2 = 1;
    for (Variant v : kDeviceVariants) {
      CAPTURE(variant_name(v));
      const auto x = functional_mmse(p, v);
      CHECK(x(0) == std::complex<double>(1.5, -0.5));
      const FunctionalResult r = functional_run(quantize(p, v));
      CHECK(r.xhat[0] == (encode_fp(1.5, FpFormat::FP16) | (encode_fp(-0.5, FpFormat::FP16) << 16)));
    }
  }

  TEST_CASE("wide fp8 products agree with fp8 scalar ops when sums are exact") {
    // Scaled signed permutations: every product and partial sum is a power
    // of two or zero, so both 8-bit paths round nothing.
    std::mt19937_64 rng(8);
    auto pow2 = [&] { return std::ldexp(1.0, static_cast<int>(rng() % 5) - 2) * (rng() % 2 ? 1 : -1); };
    for (int t = 0; t < 50; ++t) {
      const int n = 1 + static_cast<int>(rng() % 4);
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      DetectionProblem p;
      p.H = CMatrix<double>::Zero(n, n);
      p.y = CVector<double>(n);
      const double h = std::ldexp(1.0, static_cast<int>(rng() % 3) - 1);
      for (int i = 0; i < n; ++i) {
        p.H(perm[static_cast<std::size_t>(i)], i) = rng() % 2 ? std::complex<double>(h, 0) : std::complex<double>(0, -h);
        p.y(i) = rng() % 2 ? std::complex<double>(pow2(), 0) : std::complex<double>(0, pow2());
      }
      p.sigma2 = h * h;
      const auto q8 = functional_run(quantize(p, Variant::Quarter8));
      const auto w8 = functional_run(quantize(p, Variant::WDotp8));
      REQUIRE(q8.status == 0);
      REQUIRE(w8.status == 0);
      // signed zeros may differ; values may not
      CHECK(decode_xhat(q8.xhat) == decode_xhat(w8.xhat));
    }
  }

  TEST_CASE("reduced precision stays close to golden on well-conditioned data") {
    std::mt19937_64 rng(9);
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
      const DetectionProblem p = random_problem(rng, 4, 4, 0.5);
      worst = std::max(worst, rel(functional_mmse(p, Variant::Half16), golden_mmse(p)));
    }
    MESSAGE("worst Half16 relative error over 200 problems: " << worst);
    CHECK(worst < 0.05);
  }

  TEST_CASE("more precision never hurts on average") {
    std::mt19937_64 rng(10);
    double half = 0, quarter = 0;
    int n = 0;
    for (int t = 0; t < 300; ++t) {
      const DetectionProblem p = random_problem(rng, 4, 4, 0.1);
      const FunctionalResult q = functional_run(quantize(p, Variant::Quarter8));
      if (q.status != 0) continue;
      const auto g = golden_mmse(p);
      half += rel(functional_mmse(p, Variant::Half16), g);
      quarter += rel(decode_xhat(q.xhat), g);
      ++n;
    }
    REQUIRE(n > 100);
    CHECK(half / n <= quarter / n);
  }

  TEST_CASE("singular input aborts with a status word in both models") {
    DetectionProblem p;
    // G = [[4,4],[4,4]]: the second pivot is exactly zero in every format
    p.H = CMatrix<double>::Ones(4, 2);
    p.y = CVector<double>::Ones(4);
    p.sigma2 = 0;
    for (Variant v : kDeviceVariants) {
      CAPTURE(variant_name(v));
      const QuantizedProblem q = quantize(p, v);
      const FunctionalResult ref = functional_run(q);
      CHECK(ref.status == 2);
      for (Bits w : ref.xhat) CHECK(w == kCanary);
      CHECK_THROWS_AS((void)functional_mmse(p, v), NonPositiveDiagonal);
      const ClusterConfig cfg;
      const KernelProgram k = generate_kernel({v, 2, 4, 1, 1}, cfg);
      CHECK(run_emulated(k, cfg, LatencyTable::defaults(), {q}).results[0] == ref);
    }
  }

  TEST_CASE("variant names round-trip") {
    for (Variant v : {Variant::Double64, Variant::Half16, Variant::WDotp16, Variant::CDotp16, Variant::Quarter8,
                      Variant::WDotp8})
      CHECK(parse_variant(variant_name(v)) == v);
    CHECK_THROWS_AS(parse_variant("fp4"), ConfigError);
  }
}

TEST_SUITE("kernel-layout") {
  TEST_CASE("fields are contiguous per problem") {
    const ClusterConfig cfg;
    const LayoutDescriptor l = make_layout({Variant::Half16, 4, 4, 3, 16}, cfg);
    CHECK(l.off_y == 0);
    CHECK(l.off_sigma2 == 16);
    CHECK(l.off_xhat == 20);
    CHECK(l.off_h == 36);
    CHECK(l.off_status == 100);
    CHECK(l.problem_bytes == 104);
    CHECK(l.ws_offset == 3 * 104);
    CHECK(l.slice_bytes == cfg.l1_bytes() / 16);
    CHECK(l.problem_base(2, 1) == kL1Base + 2 * l.slice_bytes + 104);

    const LayoutDescriptor q = make_layout({Variant::WDotp8, 3, 5, 1, 1}, cfg);
    CHECK(q.off_sigma2 == 12);  // 5 fp8 pairs, padded
    CHECK(q.off_status == q.off_h + 32);
  }

  TEST_CASE("32x32 capacity arithmetic") {
    const ClusterConfig cfg;
    const LayoutDescriptor l = make_layout({Variant::Half16, 32, 32, 1, 1}, cfg);
    // Ĥ, G/L shared in place, and the vectors y, x̂, w/v plus s2 and status
    CHECK(l.required_bytes() == 32 * 32 * 4 + 32 * 32 * 4 + 3 * 32 * 4 + 8);
    const std::uint32_t fit = cfg.l1_bytes() / l.required_bytes();
    CHECK_NOTHROW(make_layout({Variant::Half16, 32, 32, 1, static_cast<int>(fit)}, cfg));
    try {
      (void)make_layout({Variant::Half16, 32, 32, 1, static_cast<int>(fit + 1)}, cfg);
      FAIL("expected CapacityError");
    } catch (const CapacityError& e) {
      CHECK(e.required == l.required_bytes());
      CHECK(e.available == ((cfg.l1_bytes() / (fit + 1)) & ~3u));
    }
  }

  TEST_CASE("bad specs are rejected") {
    const ClusterConfig cfg;
    CHECK_THROWS_AS(make_layout({Variant::Double64, 4, 4, 1, 1}, cfg), ConfigError);
    CHECK_THROWS_AS(make_layout({Variant::Half16, 4, 3, 1, 1}, cfg), ConfigError);
    CHECK_THROWS_AS(make_layout({Variant::Half16, 4, 4, 0, 1}, cfg), ConfigError);
    CHECK_THROWS_AS(make_layout({Variant::Half16, 4, 4, 1, cfg.cores() + 1}, cfg), ConfigError);
  }

  TEST_CASE("layout text round-trip") {
    for (Variant v : kDeviceVariants) {
      const LayoutDescriptor l = make_layout({v, 4, 6, 2, 8}, ClusterConfig{});
      CHECK(parse_layout(format_layout(l)) == l);
    }
    CHECK_THROWS_AS(parse_layout("bogus = 1\n"), ConfigError);
  }

  TEST_CASE("load writes inputs byte-exactly and extraction sees the canary") {
    const ClusterConfig cfg;
    std::mt19937_64 rng(15);
    for (Variant v : kDeviceVariants) {
      const LayoutDescriptor l = make_layout({v, 3, 5, 2, 4}, cfg);
      ClusterMemory mem(cfg);
      const QuantizedProblem q = quantize(random_problem(rng, 3, 5, 0.1), v);
      load_problem(mem, l, 3, 1, q);
      const std::uint32_t base = l.problem_base(3, 1);
      const int esz = is_8bit(v) ? 2 : 4;
      for (int k = 0; k < 5; ++k) CHECK(mem.read(base + l.off_y + static_cast<std::uint32_t>(k * esz), esz) == q.y[static_cast<std::size_t>(k)]);
      for (std::size_t e = 0; e < q.H.size(); ++e)
        CHECK(mem.read(base + l.off_h + static_cast<std::uint32_t>(e) * static_cast<std::uint32_t>(esz), esz) == q.H[e]);
      CHECK(mem.read(base + l.off_sigma2, 4) == q.sigma2);
      const FunctionalResult r = extract_result(mem, l, 3, 1);
      CHECK(r.status == 0);
      for (Bits w : r.xhat) CHECK(w == kCanary);
      CHECK_THROWS_AS(load_problem(mem, l, 4, 0, q), ConfigError);
    }
  }
}

TEST_SUITE("kernel-program") {
  TEST_CASE("program shape") {
    const KernelProgram k = generate_kernel({Variant::CDotp16, 4, 4, 2, 8}, ClusterConfig{});
    CHECK(k.assembly.find("csrr a2, mhartid") != std::string::npos);
    CHECK(k.assembly.find("barrier\n    halt") != std::string::npos);
    CHECK(assemble(disassemble(k.image)).text == k.image.text);
    CHECK(k.image.entry == kTextBase);
  }

  TEST_CASE("instruction counts order the variants at 32x32") {
    std::map<Variant, std::uint64_t> issued;
    for (Variant v : kDeviceVariants) {
      if (v == Variant::Quarter8) continue;
      std::mt19937_64 rng(32);
      const ClusterConfig cfg;
      const QuantizedProblem q = quantize(random_problem(rng, 32, 32, 1.0), v);
      const auto run = run_emulated(generate_kernel({v, 32, 32, 1, 1}, cfg), cfg, LatencyTable::defaults(), {q});
      REQUIRE(run.results[0].status == 0);
      issued[v] = run.report.total_instructions;
    }
    CHECK(issued[Variant::CDotp16] < issued[Variant::WDotp8]);
    CHECK(issued[Variant::WDotp8] < issued[Variant::WDotp16]);
    CHECK(issued[Variant::WDotp16] < issued[Variant::Half16]);
  }

  TEST_CASE("cycles grow linearly with the batch") {
    const ClusterConfig cfg;
    std::mt19937_64 rng(33);
    for (Variant v : kDeviceVariants) {
      CAPTURE(variant_name(v));
      std::vector<QuantizedProblem> qs;
      for (int p = 0; p < 8; ++p) qs.push_back(quantize(random_problem(rng, 4, 4, 1.0), v));
      auto cycles = [&](int batch) {
        std::vector<QuantizedProblem> sub(qs.begin(), qs.begin() + batch);
        return static_cast<double>(
            run_emulated(generate_kernel({v, 4, 4, batch, 1}, cfg), cfg, LatencyTable::defaults(), sub)
                .report.total_cycles);
      };
      const double c1 = cycles(1), c2 = cycles(2);
      const double per = c2 - c1, fixed = c1 - per;
      for (int k : {4, 8}) CHECK(std::abs(cycles(k) - (k * per + fixed)) <= 0.05 * cycles(k));
    }
  }
}
