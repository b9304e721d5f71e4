// Program generator for the MMSE kernels.
//
// Register plan (fixed for every variant):
//   s0 problem base      s1 Ĥ of the problem    s2 G/L workspace   s3 w/v
//   s4 problems left     s5 sign / conj const   s6 aux base, then pivot
//   s7 MAC mask or aux   a0 a1 accumulators     a2 a3 scratch
//   t0 t1 operand pointers, t2 loop end
//   a4-a7 / t3-t6 loaded operands, s8-s11 / ra sp gp tp derived operands
// Outer loops are expanded at generation time, so every address offset is
// a constant; inner loops over k run at kUnroll MACs per iteration.

#include <cstdio>
#include <functional>
#include <sstream>

#include "kernel_detail.hpp"
#include "sdrsim/config.hpp"

namespace sdrsim {

using namespace detail;

CapacityError::CapacityError(std::uint64_t req, std::uint64_t avail)
    : Error("kernel needs " + std::to_string(req) + " bytes but only " + std::to_string(avail) + " are available"),
      required(req),
      available(avail) {}

namespace {

std::uint32_t align4(std::uint32_t v) { return (v + 3u) & ~3u; }

const char* const kA[] = {"a4", "a5", "a6", "a7"};
const char* const kB[] = {"t3", "t4", "t5", "t6"};
const char* const kAI[] = {"s8", "s9", "s10", "s11"};
const char* const kBI[] = {"ra", "sp", "gp", "tp"};

bool fits12(std::int64_t v) { return v >= -2048 && v <= 2047; }

// Operand streams of one inner loop.
struct Stream {
  int a_stride = 4;
  int b_stride = 4;  // 0: a-only loop
  bool post = true;  // p.lw on words, else lhu with offsets
  std::function<void(int)> pre;
  std::function<void(int)> body;
};

class Gen {
 public:
  Gen(const LayoutDescriptor& l) : L(l), s(l.spec) {}

  std::string run() {
    prologue();
    line("problem_loop:");
    addr("s1", "s0", L.off_h);
    switch (s.variant) {
      case Variant::Half16: phase1_scalar(false); break;
      case Variant::Quarter8: phase1_scalar(true); break;
      case Variant::WDotp16: phase1_wdotp16(); break;
      case Variant::CDotp16: phase1_cdotp16(); break;
      case Variant::WDotp8: phase1_wdotp8(); break;
      case Variant::Double64: throw ConfigError("Double64 has no device kernel");
    }
    cholesky();
    forward();
    backward();
    line("    j problem_next");
    line("problem_fail:");
    mem("sw", "a2", "s0", L.off_status);
    line("problem_next:");
    addr("s0", "s0", L.problem_bytes);
    line("    addi s4, s4, -1");
    line("    beq s4, zero, all_done");
    line("    j problem_loop");
    line("all_done:");
    line("    barrier");
    line("    halt");
    return out.str();
  }

 private:
  const LayoutDescriptor& L;
  const KernelSpec& s;
  std::ostringstream out;
  int labels = 0;

  void line(const std::string& t) { out << t << '\n'; }
  void op(const std::string& t) { out << "    " << t << '\n'; }
  std::string fresh(const char* p) { return std::string(p) + std::to_string(labels++); }
  Linear idiom() const { return linear_idiom(s.variant); }
  int nt() const { return s.n_tx; }
  int nr() const { return s.n_rx; }

  // rd = base + off (a3 is the scratch when rd == base)
  void addr(const std::string& rd, const std::string& base, std::int64_t off) {
    if (fits12(off)) {
      if (off != 0 || rd != base) op("addi " + rd + ", " + base + ", " + std::to_string(off));
    } else if (rd != base) {
      op("li " + rd + ", " + std::to_string(off));
      op("add " + rd + ", " + base + ", " + rd);
    } else {
      op("li a3, " + std::to_string(off));
      op("add " + rd + ", " + base + ", a3");
    }
  }

  // load/store with an arbitrary offset (a3 scratch)
  void mem(const std::string& m, const std::string& r, const std::string& base, std::int64_t off) {
    if (fits12(off)) {
      op(m + " " + r + ", " + std::to_string(off) + "(" + base + ")");
    } else {
      addr("a3", base, off);
      op(m + " " + r + ", 0(a3)");
    }
  }

  void group(const Stream& st, int n) {
    const bool two = st.b_stride != 0;
    for (int k = 0; k < n; ++k) {
      if (st.post) {
        op("p.lw " + std::string(kA[k]) + ", " + std::to_string(st.a_stride) + "(t0!)");
        if (two) op("p.lw " + std::string(kB[k]) + ", " + std::to_string(st.b_stride) + "(t1!)");
      } else {
        op("lhu " + std::string(kA[k]) + ", " + std::to_string(k * st.a_stride) + "(t0)");
        if (two) op("lhu " + std::string(kB[k]) + ", " + std::to_string(k * st.b_stride) + "(t1)");
      }
    }
    if (!st.post) {
      op("addi t0, t0, " + std::to_string(n * st.a_stride));
      if (two) op("addi t1, t1, " + std::to_string(n * st.b_stride));
    }
    if (st.pre)
      for (int k = 0; k < n; ++k) st.pre(k);
    for (int k = 0; k < n; ++k) st.body(k);
  }

  // K MACs in order; t0 (and t1) must point at the first operands.
  void k_loop(int K, const Stream& st) {
    const int iters = K / kUnroll, rem = K % kUnroll;
    if (iters == 1) {
      group(st, kUnroll);
    } else if (iters > 1) {
      const std::string lbl = fresh("k");
      addr("t2", "t0", static_cast<std::int64_t>(iters) * kUnroll * st.a_stride);
      line(lbl + ":");
      group(st, kUnroll);
      op("bne t0, t2, " + lbl);
    }
    if (rem) group(st, rem);
  }

  void zero_acc() {
    op("mv a0, zero");
    op("mv a1, zero");
  }

  // ------------------------------------------------------------------
  void prologue() {
    line(".text 0x" + hex(kTextBase));
    line("_start:");
    op("csrr a2, mhartid");
    op("li a3, " + std::to_string(L.slice_bytes));
    op("mul a2, a2, a3");
    op("li s0, " + std::to_string(L.l1_base));
    op("add s0, s0, a2");
    addr("s2", "s0", L.ws_offset + L.off_gl);
    addr("s3", "s2", L.off_wv - L.off_gl);
    op("li s4, " + std::to_string(s.batch));
    switch (s.variant) {
      case Variant::WDotp16:
        op("li s5, 0x80000000");
        op("li s7, " + std::to_string(kSwapNeg16));
        break;
      case Variant::CDotp16:
        op("li s5, " + std::to_string(kConj16));
        op("li s7, " + std::to_string(kNegConj16));
        break;
      default: op("li s5, 0x8000"); break;
    }
  }

  static std::string hex(std::uint32_t v) {
    char b[16];
    std::snprintf(b, sizeof b, "%08x", v);
    return b;
  }

  // ------------------------------------------------------------------
  // Gram matrix and matched filter.

  Stream scalar_stream(bool b8, bool diag, int sa, int sb) {
    const int sh = b8 ? 8 : 16;
    const std::string sfx = b8 ? ".b" : ".h";
    Stream st;
    st.a_stride = sa;
    st.b_stride = diag ? 0 : sb;
    st.post = !b8;
    if (diag) {
      st.pre = [=, this](int k) { op("srli " + std::string(kAI[k]) + ", " + kA[k] + ", " + std::to_string(sh)); };
      st.body = [=, this](int k) {
        op("fmadd" + sfx + " a0, " + kA[k] + ", " + kA[k] + ", a0");
        op("fmadd" + sfx + " a0, " + kAI[k] + ", " + kAI[k] + ", a0");
      };
    } else {
      st.pre = [=, this](int k) {
        op("srli " + std::string(kAI[k]) + ", " + kA[k] + ", " + std::to_string(sh));
        op("srli " + std::string(kBI[k]) + ", " + kB[k] + ", " + std::to_string(sh));
      };
      st.body = [=, this](int k) {
        const std::string a = kA[k], ai = kAI[k], b = kB[k], bi = kBI[k];
        op("fmadd" + sfx + " a0, " + a + ", " + b + ", a0");
        op("fmsub" + sfx + " a1, " + ai + ", " + b + ", a1");
        op("fmadd" + sfx + " a0, " + ai + ", " + bi + ", a0");
        op("fmsub" + sfx + " a1, " + a + ", " + bi + ", a1");
      };
    }
    return st;
  }

  std::int64_t g_off(int i, int j) const { return static_cast<std::int64_t>(i * nt() + j) * 4; }

  void store_pair(const std::string& re, const std::string& im, const std::string& base, std::int64_t off) {
    if (fits12(off + 2)) {
      op("sh " + re + ", " + std::to_string(off) + "(" + base + ")");
      op("sh " + im + ", " + std::to_string(off + 2) + "(" + base + ")");
    } else {
      addr("t2", base, off);
      op("sh " + re + ", 0(t2)");
      op("sh " + im + ", 2(t2)");
    }
  }

  void phase1_scalar(bool b8) {
    const int esz = b8 ? 2 : 4;
    const int row = nt() * esz;
    for (int i = 0; i < nt(); ++i) {
      for (int j = 0; j <= i; ++j) {
        addr("t0", "s1", i * esz);
        if (i == j) {
          mem("lw", "a0", "s0", L.off_sigma2);
          k_loop(nr(), scalar_stream(b8, true, row, row));
          if (b8) op("fcvt.h.b a0, a0");
          mem("sw", "a0", "s2", g_off(i, i));
        } else {
          addr("t1", "s1", j * esz);
          zero_acc();
          k_loop(nr(), scalar_stream(b8, false, row, row));
          if (b8) {
            op("fcvt.h.b a0, a0");
            op("fcvt.h.b a1, a1");
          }
          store_pair("a0", "a1", "s2", g_off(i, j));
        }
      }
      addr("t0", "s0", L.off_y);
      addr("t1", "s1", i * esz);
      zero_acc();
      k_loop(nr(), scalar_stream(b8, false, esz, row));
      if (b8) {
        op("fcvt.h.b a0, a0");
        op("fcvt.h.b a1, a1");
      }
      store_pair("a0", "a1", "s3", i * 4);
    }
  }

  Stream wdotp16_stream(bool diag, int sa, int sb) {
    Stream st;
    st.a_stride = sa;
    if (diag) {
      st.b_stride = 0;
      st.body = [this](int k) { op("wdotp.h a0, " + std::string(kA[k]) + ", " + kA[k] + ", a0"); };
    } else {
      st.b_stride = sb;
      st.pre = [this](int k) {
        op("shuffle.h " + std::string(kBI[k]) + ", " + kB[k] + ", " + kB[k] + ", s7");
      };
      st.body = [this](int k) {
        op("wdotp.h a0, " + std::string(kA[k]) + ", " + kB[k] + ", a0");
        op("wdotp.h a1, " + std::string(kA[k]) + ", " + kBI[k] + ", a1");
      };
    }
    return st;
  }

  void phase1_wdotp16() {
    const int row = nt() * 4;
    for (int i = 0; i < nt(); ++i) {
      for (int j = 0; j <= i; ++j) {
        addr("t0", "s1", i * 4);
        if (i == j) {
          mem("lw", "a0", "s0", L.off_sigma2);
          op("fcvt.s.h a0, a0");
          k_loop(nr(), wdotp16_stream(true, row, row));
          op("fcvt.h.s a0, a0");
          mem("sw", "a0", "s2", g_off(i, i));
        } else {
          addr("t1", "s1", j * 4);
          zero_acc();
          k_loop(nr(), wdotp16_stream(false, row, row));
          op("fcvt.h.s a0, a0");
          op("fcvt.h.s a1, a1");
          store_pair("a0", "a1", "s2", g_off(i, j));
        }
      }
      addr("t0", "s0", L.off_y);
      addr("t1", "s1", i * 4);
      zero_acc();
      k_loop(nr(), wdotp16_stream(false, 4, row));
      op("fcvt.h.s a0, a0");
      op("fcvt.h.s a1, a1");
      store_pair("a0", "a1", "s3", i * 4);
    }
  }

  // Copies `count` words from t0 to t1 through a per-word shuffle.
  void shuffled_copy(int count, const std::string& mask) {
    Stream st;
    st.b_stride = 0;
    st.pre = [=, this](int k) {
      op("shuffle.h " + std::string(kB[k]) + ", " + kA[k] + ", " + kA[k] + ", " + mask);
    };
    st.body = [this](int k) { op("p.sw " + std::string(kB[k]) + ", 4(t1!)"); };
    k_loop(count, st);
  }

  Stream cdotp_stream(int sa, int sb, bool shuffle_a) {
    Stream st;
    st.a_stride = sa;
    st.b_stride = sb;
    if (shuffle_a)
      st.pre = [this](int k) {
        op("shuffle.h " + std::string(kAI[k]) + ", " + kA[k] + ", " + kA[k] + ", s7");
      };
    st.body = [=, this](int k) {
      op("cdotp.h a0, " + std::string(shuffle_a ? kAI[k] : kA[k]) + ", " + kB[k] + ", a0");
    };
    return st;
  }

  void phase1_cdotp16() {
    const int row = nt() * 4;
    const std::int64_t cy = static_cast<std::int64_t>(L.off_aux1) - L.off_gl;
    addr("s6", "s2", static_cast<std::int64_t>(L.off_aux0) - L.off_gl);
    // conj(Ĥ) and conj(y)
    op("mv t0, s1");
    op("mv t1, s6");
    shuffled_copy(nr() * nt(), "s5");
    addr("t0", "s0", L.off_y);
    addr("t1", "s2", cy);
    shuffled_copy(nr(), "s5");
    for (int i = 0; i < nt(); ++i) {
      for (int j = 0; j <= i; ++j) {
        addr("t0", "s6", i * 4);
        addr("t1", "s1", j * 4);
        if (i == j) mem("lw", "a0", "s0", L.off_sigma2);
        else op("mv a0, zero");
        k_loop(nr(), cdotp_stream(row, row, false));
        mem("sw", "a0", "s2", g_off(i, j));
      }
      addr("t0", "s2", cy);
      addr("t1", "s1", i * 4);
      op("mv a0, zero");
      k_loop(nr(), cdotp_stream(4, row, false));
      op("sw a0, " + std::to_string(i * 4) + "(s3)");
    }
  }

  // Widening operands for `count` packed fp8 elements at t0: X words go to
  // t1, Y words (if wanted) to a0.
  void widen8(int count, bool with_y) {
    const int words = count / 2;
    auto one_word = [&] {
      op("p.lw a4, 4(t0!)");
      op("shuffle.b t3, a4, a4, s8");
      op("shuffle.b t4, a4, a4, s10");
      if (with_y) {
        op("shuffle.b t5, a4, a4, s9");
        op("shuffle.b t6, a4, a4, s11");
      }
      op("p.sw t3, 4(t1!)");
      op("p.sw t4, 4(t1!)");
      if (with_y) {
        op("p.sw t5, 4(a0!)");
        op("p.sw t6, 4(a0!)");
      }
    };
    if (words == 1) {
      one_word();
    } else if (words > 1) {
      const std::string lbl = fresh("w");
      addr("t2", "t0", words * 4);
      line(lbl + ":");
      one_word();
      op("bne t0, t2, " + lbl);
    }
    if (count % 2) {
      op("lhu a4, 0(t0)");
      op("shuffle.b t3, a4, a4, s8");
      op("sw t3, 0(t1)");
      if (with_y) {
        op("shuffle.b t5, a4, a4, s9");
        op("sw t5, 0(a0)");
      }
    }
  }

  void phase1_wdotp8() {
    const int row = nt() * 4;
    const std::int64_t xy = static_cast<std::int64_t>(L.off_aux2) - L.off_gl;
    addr("s6", "s2", static_cast<std::int64_t>(L.off_aux0) - L.off_gl);
    addr("s7", "s2", static_cast<std::int64_t>(L.off_aux1) - L.off_gl);
    op("li s8, " + std::to_string(kX8Lo));
    op("li s9, " + std::to_string(kY8Lo));
    op("li s10, " + std::to_string(kX8Hi));
    op("li s11, " + std::to_string(kY8Hi));
    op("mv t0, s1");
    op("mv t1, s6");
    op("mv a0, s7");
    widen8(nr() * nt(), true);
    addr("t0", "s0", L.off_y);
    addr("t1", "s2", xy);
    widen8(nr(), false);

    Stream st;
    st.body = [this](int k) { op("wdotp.b a0, " + std::string(kA[k]) + ", " + kB[k] + ", a0"); };
    for (int i = 0; i < nt(); ++i) {
      for (int j = 0; j <= i; ++j) {
        addr("t0", "s6", i * 4);
        addr("t1", "s7", j * 4);
        if (i == j) {
          mem("lw", "a0", "s0", L.off_sigma2);
          op("fcvt.h.b a0, a0");
        } else {
          op("mv a0, zero");
        }
        st.a_stride = st.b_stride = row;
        k_loop(nr(), st);
        if (i == j) {
          op("slli a0, a0, 16");
          op("srli a0, a0, 16");
        }
        mem("sw", "a0", "s2", g_off(i, j));
      }
      addr("t0", "s2", xy);
      addr("t1", "s7", i * 4);
      op("mv a0, zero");
      st.a_stride = 4;
      st.b_stride = row;
      k_loop(nr(), st);
      op("sw a0, " + std::to_string(i * 4) + "(s3)");
    }
  }

  // ------------------------------------------------------------------
  // Linear-system phase on fp16 G, w.

  // c - sum_k conj(a_k) b_k over K terms, c already in a2. Returns the
  // registers holding (re, im): fp16 for Half/CDot, fp32 for WDot.
  std::pair<std::string, std::string> reduce(int K, int sa, int sb, bool conj_c) {
    switch (idiom()) {
      case Linear::Half: {
        if (K > 0) zero_acc();
        k_loop(K, scalar_stream(false, false, sa, sb));
        op("srli a3, a2, 16");
        if (K > 0) {
          op("fsub.h a2, a2, a0");
          op(conj_c ? "fadd.h a3, a3, a1" : "fsub.h a3, a3, a1");
        }
        if (conj_c) op("xor a3, a3, s5");
        return {"a2", "a3"};
      }
      case Linear::WDot: {
        if (K > 0) zero_acc();
        k_loop(K, wdotp16_stream(false, sa, sb));
        op("srli a3, a2, 16");
        op("fcvt.s.h a2, a2");
        op("fcvt.s.h a3, a3");
        if (K > 0) {
          op("fsub.s a2, a2, a0");
          op(conj_c ? "fadd.s a3, a3, a1" : "fsub.s a3, a3, a1");
        }
        if (conj_c) op("xor a3, a3, s5");
        return {"a2", "a3"};
      }
      case Linear::CDot: {
        op(conj_c ? "shuffle.h a0, a2, a2, s5" : "mv a0, a2");
        k_loop(K, cdotp_stream(sa, sb, true));
        op("srli a3, a0, 16");
        return {"a0", "a3"};
      }
    }
    return {};
  }

  // Divides (re, im) by the pivot in s6 and stores the fp16 pair.
  void divide_store(const std::pair<std::string, std::string>& t, const std::string& base, std::int64_t off) {
    if (idiom() == Linear::WDot) {
      op("fdiv.s a2, " + t.first + ", s6");
      op("fdiv.s a3, " + t.second + ", s6");
      op("fcvt.h.s a2, a2");
      op("fcvt.h.s a3, a3");
    } else {
      op("fdiv.h a2, " + t.first + ", s6");
      op("fdiv.h a3, " + t.second + ", s6");
    }
    store_pair("a2", "a3", base, off);
  }

  void cholesky() {
    const Linear id = idiom();
    for (int j = 0; j < nt(); ++j) {
      // pivot: d = G_jj - sum |L_jk|^2
      addr("t0", "s2", g_off(j, 0));
      op("lw a2, " + std::to_string(j * 4) + "(t0)");
      if (id == Linear::Half) {
        if (j > 0) op("mv a0, zero");
        k_loop(j, scalar_stream(false, true, 4, 0));
        if (j > 0) op("fsub.h a2, a2, a0");
      } else if (id == Linear::WDot) {
        if (j > 0) op("mv a0, zero");
        k_loop(j, wdotp16_stream(true, 4, 0));
        op("fcvt.s.h a2, a2");
        if (j > 0) op("fsub.s a2, a2, a0");
      } else {
        Stream st;
        st.b_stride = 0;
        st.pre = [this](int k) {
          op("shuffle.h " + std::string(kAI[k]) + ", " + kA[k] + ", " + kA[k] + ", s7");
        };
        st.body = [this](int k) { op("cdotp.h a0, " + std::string(kAI[k]) + ", " + kA[k] + ", a0"); };
        op("mv a0, a2");
        k_loop(j, st);
        op("slli a2, a0, 16");
        op("srli a2, a2, 16");
      }
      const std::string ok = fresh("pos");
      if (id == Linear::WDot) op("li a3, 0x7F800000");
      else op("li a3, 0x7C00");
      op("addi a1, a2, -1");
      op("bltu a1, a3, " + ok);
      op("li a2, " + std::to_string(j + 1));
      op("j problem_fail");
      line(ok + ":");
      if (id == Linear::WDot) {
        op("fsqrt.s a2, a2");
        op("fcvt.h.s a2, a2");
        op("sw a2, 0(t0)");
        op("fcvt.s.h s6, a2");
      } else {
        op("fsqrt.h a2, a2");
        op("sw a2, 0(t0)");
        op("mv s6, a2");
      }
      for (int i = j + 1; i < nt(); ++i) {
        addr("t0", "s2", g_off(j, 0));
        addr("t1", "s2", g_off(i, 0));
        op("lw a2, " + std::to_string(j * 4) + "(t1)");
        divide_store(reduce(j, 4, 4, false), "s2", g_off(i, j));
      }
    }
  }

  void forward() {
    for (int i = 0; i < nt(); ++i) {
      addr("t0", "s2", g_off(i, 0));
      op("mv t1, s3");
      op("lw s6, " + std::to_string(i * 4) + "(t0)");
      op("lw a2, " + std::to_string(i * 4) + "(s3)");
      const auto t = reduce(i, 4, 4, false);
      if (idiom() == Linear::WDot) op("fcvt.s.h s6, s6");
      divide_store(t, "s3", i * 4);
    }
  }

  void backward() {
    for (int i = nt() - 1; i >= 0; --i) {
      const int K = nt() - 1 - i;
      mem("lw", "s6", "s2", g_off(i, i));
      if (K > 0) {
        addr("t0", "s2", g_off(i + 1, i));
        addr("t1", "s0", L.off_xhat + static_cast<std::int64_t>(i + 1) * 4);
      }
      op("lw a2, " + std::to_string(i * 4) + "(s3)");
      const auto t = reduce(K, nt() * 4, 4, true);
      if (idiom() == Linear::WDot) op("fcvt.s.h s6, s6");
      divide_store(t, "s0", L.off_xhat + static_cast<std::int64_t>(i) * 4);
    }
  }
};

}  // namespace

LayoutDescriptor make_layout(const KernelSpec& spec, const ClusterConfig& cfg) {
  if (spec.variant == Variant::Double64) throw ConfigError("Double64 has no device kernel");
  if (spec.n_tx < 1 || spec.n_rx < spec.n_tx) throw ConfigError("kernel needs n_rx >= n_tx >= 1");
  if (spec.n_tx > 64 || spec.n_rx > 64) throw ConfigError("kernel sizes above 64 are not supported");
  if (spec.batch < 1) throw ConfigError("batch must be at least 1");
  if (spec.harts < 1 || spec.harts > cfg.cores())
    throw ConfigError("hart count " + std::to_string(spec.harts) + " outside [1, " + std::to_string(cfg.cores()) +
                      "]");
  const std::uint32_t nt = static_cast<std::uint32_t>(spec.n_tx), nr = static_cast<std::uint32_t>(spec.n_rx);
  const std::uint32_t esz = is_8bit(spec.variant) ? 2 : 4;
  LayoutDescriptor l;
  l.spec = spec;
  l.l1_base = kL1Base;
  l.slice_bytes = (cfg.l1_bytes() / static_cast<std::uint32_t>(spec.harts)) & ~3u;
  l.off_y = 0;
  l.off_sigma2 = align4(nr * esz);
  l.off_xhat = l.off_sigma2 + 4;
  l.off_h = l.off_xhat + nt * 4;
  l.off_status = l.off_h + align4(nr * nt * esz);
  l.problem_bytes = l.off_status + 4;
  l.ws_offset = static_cast<std::uint32_t>(spec.batch) * l.problem_bytes;
  l.off_gl = 0;
  l.off_wv = nt * nt * 4;
  const std::uint32_t aux = l.off_wv + nt * 4;
  l.off_aux0 = l.off_aux1 = l.off_aux2 = aux;
  l.ws_bytes = aux;
  if (spec.variant == Variant::CDotp16) {
    l.off_aux1 = aux + nr * nt * 4;
    l.off_aux2 = l.off_aux1 + nr * 4;
    l.ws_bytes = l.off_aux2;
  } else if (spec.variant == Variant::WDotp8) {
    l.off_aux1 = aux + nr * nt * 4;
    l.off_aux2 = l.off_aux1 + nr * nt * 4;
    l.ws_bytes = l.off_aux2 + nr * 4;
  }
  if (l.required_bytes() > l.slice_bytes) throw CapacityError(l.required_bytes(), l.slice_bytes);
  return l;
}

KernelProgram generate_kernel(const KernelSpec& spec, const ClusterConfig& cfg) {
  KernelProgram p;
  p.layout = make_layout(spec, cfg);
  p.assembly = Gen(p.layout).run();
  p.image = assemble(p.assembly);
  const std::uint64_t text_bytes = 4ull * p.image.text.size();
  if (text_bytes > kTextBytes) throw CapacityError(text_bytes, kTextBytes);
  return p;
}

namespace {

void put_word(ClusterMemory& mem, std::uint32_t addr, Bits w) { mem.write(addr, 4, w); }

}  // namespace

void load_problem(ClusterMemory& mem, const LayoutDescriptor& l, int hart, int b, const QuantizedProblem& q) {
  const KernelSpec& s = l.spec;
  if (q.variant != s.variant || q.n_tx != s.n_tx || q.n_rx != s.n_rx)
    throw ConfigError("problem does not match the kernel layout");
  if (hart < 0 || hart >= s.harts || b < 0 || b >= s.batch) throw ConfigError("problem slot out of range");
  const std::uint32_t base = l.problem_base(hart, b);
  const int esz = is_8bit(s.variant) ? 2 : 4;
  auto put_elems = [&](std::uint32_t at, const std::vector<Bits>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) mem.write(at + static_cast<std::uint32_t>(i * esz), esz, v[i]);
  };
  put_elems(base + l.off_y, q.y);
  put_word(mem, base + l.off_sigma2, q.sigma2);
  for (int i = 0; i < s.n_tx; ++i) put_word(mem, base + l.off_xhat + static_cast<std::uint32_t>(4 * i), kCanary);
  put_elems(base + l.off_h, q.H);
  put_word(mem, base + l.off_status, 0);
}

FunctionalResult extract_result(const ClusterMemory& mem, const LayoutDescriptor& l, int hart, int b) {
  const std::uint32_t base = l.problem_base(hart, b);
  FunctionalResult r;
  for (int i = 0; i < l.spec.n_tx; ++i) r.xhat.push_back(mem.read(base + l.off_xhat + static_cast<std::uint32_t>(4 * i), 4));
  r.status = static_cast<int>(mem.read(base + l.off_status, 4));
  return r;
}

std::string format_layout(const LayoutDescriptor& l) {
  std::ostringstream o;
  o << "variant = " << variant_name(l.spec.variant) << "\n"
    << "n_tx = " << l.spec.n_tx << "\nn_rx = " << l.spec.n_rx << "\nbatch = " << l.spec.batch
    << "\nharts = " << l.spec.harts << "\nl1_base = " << l.l1_base << "\nslice_bytes = " << l.slice_bytes
    << "\noff_y = " << l.off_y << "\noff_sigma2 = " << l.off_sigma2 << "\noff_xhat = " << l.off_xhat
    << "\noff_h = " << l.off_h << "\noff_status = " << l.off_status << "\nproblem_bytes = " << l.problem_bytes
    << "\nws_offset = " << l.ws_offset << "\noff_gl = " << l.off_gl << "\noff_wv = " << l.off_wv
    << "\noff_aux0 = " << l.off_aux0 << "\noff_aux1 = " << l.off_aux1 << "\noff_aux2 = " << l.off_aux2
    << "\nws_bytes = " << l.ws_bytes << "\n";
  return o.str();
}

LayoutDescriptor parse_layout(std::string_view text) {
  LayoutDescriptor l;
  for (const auto& e : parse_entries(text)) {
    auto u32 = [&] { return static_cast<std::uint32_t>(parse_int(e, 0, 0xFFFFFFFFll)); };
    auto pos = [&] { return static_cast<int>(parse_int(e, 1, 65536)); };
    if (e.key == "variant") l.spec.variant = parse_variant(e.value);
    else if (e.key == "n_tx") l.spec.n_tx = pos();
    else if (e.key == "n_rx") l.spec.n_rx = pos();
    else if (e.key == "batch") l.spec.batch = pos();
    else if (e.key == "harts") l.spec.harts = pos();
    else if (e.key == "l1_base") l.l1_base = u32();
    else if (e.key == "slice_bytes") l.slice_bytes = u32();
    else if (e.key == "off_y") l.off_y = u32();
    else if (e.key == "off_sigma2") l.off_sigma2 = u32();
    else if (e.key == "off_xhat") l.off_xhat = u32();
    else if (e.key == "off_h") l.off_h = u32();
    else if (e.key == "off_status") l.off_status = u32();
    else if (e.key == "problem_bytes") l.problem_bytes = u32();
    else if (e.key == "ws_offset") l.ws_offset = u32();
    else if (e.key == "off_gl") l.off_gl = u32();
    else if (e.key == "off_wv") l.off_wv = u32();
    else if (e.key == "off_aux0") l.off_aux0 = u32();
    else if (e.key == "off_aux1") l.off_aux1 = u32();
    else if (e.key == "off_aux2") l.off_aux2 = u32();
    else if (e.key == "ws_bytes") l.ws_bytes = u32();
    else throw ConfigError("line " + std::to_string(e.line) + ": unknown layout key '" + e.key + "'");
  }
  return l;
}

EmulatedRun run_emulated(const KernelProgram& k, const ClusterConfig& cfg, const LatencyTable& table,
                         const std::vector<QuantizedProblem>& problems, const RunOptions& opts) {
  const LayoutDescriptor& l = k.layout;
  const int slots = l.spec.harts * l.spec.batch;
  if (static_cast<int>(problems.size()) > slots)
    throw ConfigError(std::to_string(problems.size()) + " problems exceed " + std::to_string(slots) + " kernel slots");
  Cluster c(cfg, table);
  c.load(k.image, l.spec.harts);
  QuantizedProblem filler;
  if (static_cast<int>(problems.size()) < slots) {
    DetectionProblem d;
    d.H = CMatrix<double>::Identity(l.spec.n_rx, l.spec.n_tx);
    d.y = CVector<double>::Ones(l.spec.n_rx);
    d.sigma2 = 1;
    filler = quantize(d, l.spec.variant);
  }
  for (int p = 0; p < slots; ++p) {
    const auto& q = p < static_cast<int>(problems.size()) ? problems[static_cast<std::size_t>(p)] : filler;
    load_problem(c.memory(), l, p % l.spec.harts, p / l.spec.harts, q);
  }
  EmulatedRun r;
  r.report = run_cluster(c, opts);
  for (std::size_t p = 0; p < problems.size(); ++p)
    r.results.push_back(extract_result(c.memory(), l, static_cast<int>(p) % l.spec.harts,
                                       static_cast<int>(p) / l.spec.harts));
  return r;
}

}  // namespace sdrsim
