// Bit-true host model. Each step mirrors one instruction (or a fixed group of
// instructions) of the generated kernel, in the same order.

#include <stdexcept>

#include "kernel_detail.hpp"

namespace sdrsim {

using namespace detail;

namespace {

constexpr FpFormat F32 = FpFormat::FP32;
constexpr FpFormat F16 = FpFormat::FP16;
constexpr FpFormat F8 = FpFormat::FP8;

Bits lo16(Bits w) { return w & 0xFFFFu; }
Bits hi16(Bits w) { return w >> 16; }
Bits pack(Bits re, Bits im) { return (re & 0xFFFFu) | (im << 16); }
Bits flip16(Bits b) { return b ^ 0x8000u; }
Bits flip32(Bits b) { return b ^ 0x80000000u; }
Bits cvt_s(Bits h) { return fp_cast(h & 0xFFFFu, F16, F32); }
Bits cvt_h(Bits s) { return fp_cast(s, F32, F16); }

Bits shuf16(Bits w, Bits mask) { return shuffle({w, LaneFormat::FP16}, {w, LaneFormat::FP16}, mask)->bits; }
Bits shuf8(Bits w, Bits mask) { return shuffle({w, LaneFormat::FP8}, {w, LaneFormat::FP8}, mask)->bits; }
Bits cdotp(Bits a, Bits b, Bits acc) {
  return complex_dotprod16({a, LaneFormat::FP16}, {b, LaneFormat::FP16}, {acc, LaneFormat::FP16}).bits;
}
Bits wdotp16(Bits a, Bits b, Bits acc) {
  return widening_dotprod({a, LaneFormat::FP16}, {b, LaneFormat::FP16}, {acc, LaneFormat::FP32}, F16).bits;
}
Bits wdotp8(Bits a, Bits b, Bits acc) {
  return widening_dotprod({a, LaneFormat::FP8}, {b, LaneFormat::FP8}, {acc, LaneFormat::FP16}, F8).bits;
}

// Scalar-FMA complex MAC on element words split into (re, im) with `shift`.
struct ScalarAcc {
  Bits r = 0, i = 0;
};

void scalar_mac(ScalarAcc& s, Bits a, Bits b, int shift, FpFormat f) {
  const Bits m = format_mask(f);
  const Bits ar = a & m, ai = (a >> shift) & m, br = b & m, bi = (b >> shift) & m;
  s.r = fp_fma(ar, br, s.r, f);
  s.i = fp_fms(ai, br, s.i, f);
  s.r = fp_fma(ai, bi, s.r, f);
  s.i = fp_fms(ar, bi, s.i, f);
}

void scalar_norm(ScalarAcc& s, Bits a, int shift, FpFormat f) {
  const Bits m = format_mask(f);
  const Bits ar = a & m, ai = (a >> shift) & m;
  s.r = fp_fma(ar, ar, s.r, f);
  s.r = fp_fma(ai, ai, s.r, f);
}

struct Work {
  int n;
  std::vector<Bits> gl;  // n x n, G overwritten by L
  std::vector<Bits> wv;  // w overwritten by v
  Bits& at(int i, int j) { return gl[static_cast<std::size_t>(i * n + j)]; }
};

// ---------------------------------------------------------------------------
// Gram matrix and matched filter.

void phase1(const QuantizedProblem& q, Work& w) {
  const int nt = q.n_tx, nr = q.n_rx;
  auto H = [&](int k, int i) { return q.H[static_cast<std::size_t>(k * nt + i)]; };

  switch (q.variant) {
    case Variant::Half16:
    case Variant::Quarter8: {
      const bool b8 = q.variant == Variant::Quarter8;
      const FpFormat f = b8 ? F8 : F16;
      const int sh = b8 ? 8 : 16;
      auto widen = [&](Bits v) { return b8 ? fp_cast(v, F8, F16) : v; };
      for (int i = 0; i < nt; ++i) {
        for (int j = 0; j <= i; ++j) {
          ScalarAcc s;
          if (i == j) {
            s.r = q.sigma2;
            for (int k = 0; k < nr; ++k) scalar_norm(s, H(k, i), sh, f);
            w.at(i, i) = widen(s.r);
          } else {
            for (int k = 0; k < nr; ++k) scalar_mac(s, H(k, i), H(k, j), sh, f);
            w.at(i, j) = pack(widen(s.r), widen(s.i));
          }
        }
        ScalarAcc s;
        for (int k = 0; k < nr; ++k) scalar_mac(s, q.y[static_cast<std::size_t>(k)], H(k, i), sh, f);
        w.wv[static_cast<std::size_t>(i)] = pack(widen(s.r), widen(s.i));
      }
      break;
    }
    case Variant::WDotp16: {
      for (int i = 0; i < nt; ++i) {
        for (int j = 0; j <= i; ++j) {
          if (i == j) {
            Bits sr = cvt_s(q.sigma2);
            for (int k = 0; k < nr; ++k) sr = wdotp16(H(k, i), H(k, i), sr);
            w.at(i, i) = cvt_h(sr);
          } else {
            Bits sr = 0, si = 0;
            for (int k = 0; k < nr; ++k) {
              sr = wdotp16(H(k, i), H(k, j), sr);
              si = wdotp16(H(k, i), shuf16(H(k, j), kSwapNeg16), si);
            }
            w.at(i, j) = pack(cvt_h(sr), cvt_h(si));
          }
        }
        Bits sr = 0, si = 0;
        for (int k = 0; k < nr; ++k) {
          const Bits y = q.y[static_cast<std::size_t>(k)];
          sr = wdotp16(y, H(k, i), sr);
          si = wdotp16(y, shuf16(H(k, i), kSwapNeg16), si);
        }
        w.wv[static_cast<std::size_t>(i)] = pack(cvt_h(sr), cvt_h(si));
      }
      break;
    }
    case Variant::CDotp16: {
      for (int i = 0; i < nt; ++i) {
        for (int j = 0; j <= i; ++j) {
          Bits acc = i == j ? q.sigma2 : 0;
          for (int k = 0; k < nr; ++k) acc = cdotp(shuf16(H(k, i), kConj16), H(k, j), acc);
          w.at(i, j) = acc;
        }
        Bits acc = 0;
        for (int k = 0; k < nr; ++k) acc = cdotp(shuf16(q.y[static_cast<std::size_t>(k)], kConj16), H(k, i), acc);
        w.wv[static_cast<std::size_t>(i)] = acc;
      }
      break;
    }
    case Variant::WDotp8: {
      for (int i = 0; i < nt; ++i) {
        for (int j = 0; j <= i; ++j) {
          Bits acc = i == j ? fp_cast(q.sigma2, F8, F16) : 0;
          for (int k = 0; k < nr; ++k) acc = wdotp8(shuf8(H(k, i), kX8Lo), shuf8(H(k, j), kY8Lo), acc);
          w.at(i, j) = i == j ? lo16(acc) : acc;
        }
        Bits acc = 0;
        for (int k = 0; k < nr; ++k)
          acc = wdotp8(shuf8(q.y[static_cast<std::size_t>(k)], kX8Lo), shuf8(H(k, i), kY8Lo), acc);
        w.wv[static_cast<std::size_t>(i)] = acc;
      }
      break;
    }
    case Variant::Double64: throw ConfigError("Double64 has no device kernel");
  }
}

// ---------------------------------------------------------------------------
// Cholesky and the two solves. `dot(c, terms)` returns c - sum conj(a) b in
// the idiom's intermediate form; `finish` divides by the pivot.

struct LinearPhase {
  Linear id;
  Work& w;
  std::vector<Bits>& x;

  using Terms = std::vector<std::pair<Bits, Bits>>;

  // c - sum; result as (re, im) in fp16 (Half, CDot) or fp32 (WDot).
  // conj_c requests conj(c) as the constant term.
  std::pair<Bits, Bits> reduce(Bits c, const Terms& t, bool conj_c) const {
    switch (id) {
      case Linear::Half: {
        if (t.empty()) return {lo16(c), conj_c ? flip16(hi16(c)) : hi16(c)};
        ScalarAcc s;
        for (auto [a, b] : t) scalar_mac(s, a, b, 16, F16);
        const Bits re = fp_sub(lo16(c), s.r, F16);
        const Bits im = conj_c ? flip16(fp_add(hi16(c), s.i, F16)) : fp_sub(hi16(c), s.i, F16);
        return {re, im};
      }
      case Linear::CDot: {
        Bits acc = conj_c ? shuf16(c, kConj16) : c;
        for (auto [a, b] : t) acc = cdotp(shuf16(a, kNegConj16), b, acc);
        return {lo16(acc), hi16(acc)};
      }
      case Linear::WDot: {
        const Bits cr = cvt_s(lo16(c)), ci = cvt_s(hi16(c));
        if (t.empty()) return {cr, conj_c ? flip32(ci) : ci};
        Bits sr = 0, si = 0;
        for (auto [a, b] : t) {
          sr = wdotp16(a, b, sr);
          si = wdotp16(a, shuf16(b, kSwapNeg16), si);
        }
        return {fp_sub(cr, sr, F32), conj_c ? flip32(fp_add(ci, si, F32)) : fp_sub(ci, si, F32)};
      }
    }
    return {};
  }

  // Real part of c - sum |a|^2; fp16 or fp32 bits.
  Bits reduce_norm(Bits c, const std::vector<Bits>& a) const {
    switch (id) {
      case Linear::Half: {
        if (a.empty()) return lo16(c);
        ScalarAcc s;
        for (Bits e : a) scalar_norm(s, e, 16, F16);
        return fp_sub(lo16(c), s.r, F16);
      }
      case Linear::CDot: {
        Bits acc = c;
        for (Bits e : a) acc = cdotp(shuf16(e, kNegConj16), e, acc);
        return lo16(acc);
      }
      case Linear::WDot: {
        if (a.empty()) return cvt_s(lo16(c));
        Bits sr = 0;
        for (Bits e : a) sr = wdotp16(e, e, sr);
        return fp_sub(cvt_s(lo16(c)), sr, F32);
      }
    }
    return 0;
  }

  Bits divide(std::pair<Bits, Bits> t, Bits pivot16) const {
    if (id == Linear::WDot) {
      const Bits p = cvt_s(pivot16);
      return pack(cvt_h(fp_div(t.first, p, F32)), cvt_h(fp_div(t.second, p, F32)));
    }
    return pack(fp_div(t.first, pivot16, F16), fp_div(t.second, pivot16, F16));
  }

  // Returns 0 or 1 + failing column.
  int run() {
    const int n = w.n;
    for (int j = 0; j < n; ++j) {
      std::vector<Bits> row;
      for (int k = 0; k < j; ++k) row.push_back(w.at(j, k));
      const Bits d = reduce_norm(w.at(j, j), row);
      Bits ljj;
      if (id == Linear::WDot) {
        if (!positive_fp32(d)) return j + 1;
        ljj = cvt_h(fp_sqrt(d, F32));
      } else {
        if (!positive_fp16(d)) return j + 1;
        ljj = fp_sqrt(d, F16);
      }
      w.at(j, j) = ljj;
      for (int i = j + 1; i < n; ++i) {
        Terms t;
        for (int k = 0; k < j; ++k) t.emplace_back(w.at(j, k), w.at(i, k));
        w.at(i, j) = divide(reduce(w.at(i, j), t, false), ljj);
      }
    }
    for (int i = 0; i < n; ++i) {
      Terms t;
      for (int k = 0; k < i; ++k) t.emplace_back(w.at(i, k), w.wv[static_cast<std::size_t>(k)]);
      w.wv[static_cast<std::size_t>(i)] = divide(reduce(w.wv[static_cast<std::size_t>(i)], t, false), w.at(i, i));
    }
    for (int i = n - 1; i >= 0; --i) {
      Terms t;
      for (int k = i + 1; k < n; ++k) t.emplace_back(w.at(k, i), x[static_cast<std::size_t>(k)]);
      x[static_cast<std::size_t>(i)] = divide(reduce(w.wv[static_cast<std::size_t>(i)], t, true), w.at(i, i));
    }
    return 0;
  }
};

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Double64: return "double64";
    case Variant::Half16: return "half16";
    case Variant::WDotp16: return "wdotp16";
    case Variant::CDotp16: return "cdotp16";
    case Variant::Quarter8: return "quarter8";
    case Variant::WDotp8: return "wdotp8";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::Double64, Variant::Half16, Variant::WDotp16, Variant::CDotp16, Variant::Quarter8,
                    Variant::WDotp8})
    if (variant_name(v) == s) return v;
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

FpFormat input_format(Variant v) {
  if (v == Variant::Double64) throw ConfigError("Double64 has no storage format");
  return is_8bit(v) ? F8 : F16;
}

QuantizedProblem quantize(const DetectionProblem& p, Variant v) {
  p.validate();
  const FpFormat f = input_format(v);
  const int sh = is_8bit(v) ? 8 : 16;
  auto enc = [&](std::complex<double> c) { return encode_fp(c.real(), f) | (encode_fp(c.imag(), f) << sh); };
  QuantizedProblem q;
  q.variant = v;
  q.n_tx = p.n_tx();
  q.n_rx = p.n_rx();
  for (int k = 0; k < q.n_rx; ++k)
    for (int i = 0; i < q.n_tx; ++i) q.H.push_back(enc(p.H(k, i)));
  for (int k = 0; k < q.n_rx; ++k) q.y.push_back(enc(p.y(k)));
  q.sigma2 = encode_fp(p.sigma2, f);
  return q;
}

FunctionalResult functional_run(const QuantizedProblem& q) {
  if (q.n_tx < 1 || q.n_rx < q.n_tx) throw ConfigError("problem needs n_rx >= n_tx >= 1");
  if (q.H.size() != static_cast<std::size_t>(q.n_rx * q.n_tx) || q.y.size() != static_cast<std::size_t>(q.n_rx))
    throw ConfigError("quantized problem sizes do not match n_tx/n_rx");
  Work w{q.n_tx, std::vector<Bits>(static_cast<std::size_t>(q.n_tx * q.n_tx), 0),
         std::vector<Bits>(static_cast<std::size_t>(q.n_tx), 0)};
  phase1(q, w);
  FunctionalResult r;
  r.xhat.assign(static_cast<std::size_t>(q.n_tx), kCanary);
  LinearPhase lp{linear_idiom(q.variant), w, r.xhat};
  r.status = lp.run();
  return r;
}

CVector<double> decode_xhat(const std::vector<Bits>& words) {
  CVector<double> x(static_cast<Eigen::Index>(words.size()));
  for (std::size_t i = 0; i < words.size(); ++i)
    x(static_cast<Eigen::Index>(i)) = {decode_fp(lo16(words[i]), F16), decode_fp(hi16(words[i]), F16)};
  return x;
}

CVector<double> functional_mmse(const DetectionProblem& p, Variant v) {
  if (v == Variant::Double64) return golden_mmse(p);
  const FunctionalResult r = functional_run(quantize(p, v));
  if (r.status != 0) throw NonPositiveDiagonal(r.status - 1);
  return decode_xhat(r.xhat);
}

}  // namespace sdrsim
