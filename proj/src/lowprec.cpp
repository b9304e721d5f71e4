#include "sdrsim/lowprec.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace sdrsim {

namespace {

using u128 = unsigned __int128;

// value = (-1)^neg * mag * 2^exp
struct Exact {
  bool neg = false;
  u128 mag = 0;
  int exp = 0;
};

int msb_index(u128 v) {
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  if (hi != 0) return 127 - std::countl_zero(hi);
  return 63 - std::countl_zero(static_cast<std::uint64_t>(v));
}

float as_float(Bits b) { return std::bit_cast<float>(b); }
Bits as_bits(float f) { return std::bit_cast<Bits>(f); }

Bits canonical32(float f) {
  return std::isnan(f) ? quiet_nan(FpFormat::FP32) : as_bits(f);
}

Exact decode_exact(Bits bits, FpFormat f) {
  const auto fi = format_info(f);
  const Bits mant_mask = (1u << fi.mant_bits) - 1u;
  const Bits e = (bits >> fi.mant_bits) & ((1u << fi.exp_bits) - 1u);
  Exact x;
  x.neg = (bits & sign_mask(f)) != 0;
  if (e == 0) {
    x.mag = bits & mant_mask;
    x.exp = 1 - fi.bias - fi.mant_bits;
  } else {
    x.mag = (bits & mant_mask) | (1u << fi.mant_bits);
    x.exp = static_cast<int>(e) - fi.bias - fi.mant_bits;
  }
  return x;
}

Exact exact_from_double(double v) {
  Exact x;
  x.neg = std::signbit(v);
  if (v == 0.0) return x;
  int e = 0;
  const double m = std::frexp(std::fabs(v), &e);  // m in [0.5, 1)
  x.mag = static_cast<u128>(static_cast<std::uint64_t>(std::ldexp(m, 53)));
  x.exp = e - 53;
  return x;
}

// Round-to-nearest-even of a finite exact value. A zero magnitude produces a
// zero carrying x.neg.
Bits round_exact(const Exact& x, FpFormat f) {
  const auto fi = format_info(f);
  const Bits sign = x.neg ? sign_mask(f) : 0u;
  if (x.mag == 0) return sign;
  const int msb = msb_index(x.mag);
  const int e_msb = x.exp + msb;
  const int sub_lsb = 1 - fi.bias - fi.mant_bits;
  int lsb = std::max(e_msb - fi.mant_bits, sub_lsb);
  const int shift = lsb - x.exp;
  u128 q = 0;
  if (shift <= 0) {
    q = x.mag << (-shift);
  } else if (shift < 128) {
    q = x.mag >> shift;
    const u128 rem = x.mag & ((u128{1} << shift) - 1);
    const u128 half = u128{1} << (shift - 1);
    if (rem > half || (rem == half && (q & 1) != 0)) ++q;
  } else if (shift == 128 && x.mag > (u128{1} << 127)) {
    q = 1;
  }
  if (q == (u128{1} << (fi.mant_bits + 1))) {
    q >>= 1;
    ++lsb;
  }
  const u128 hidden = u128{1} << fi.mant_bits;
  const int e_field = q >= hidden ? lsb + fi.mant_bits + fi.bias : 0;
  if (e_field >= (1 << fi.exp_bits) - 1) return infinity_bits(f, x.neg);
  return sign | (static_cast<Bits>(e_field) << fi.mant_bits) |
         (static_cast<Bits>(q) & static_cast<Bits>(hidden - 1));
}

// Exact sum. Inputs carry at most 64 significant bits. An operand far below
// the other's leading bit is replaced by a sticky unit; every rounding target
// here has at most 24 significant bits, so the rounding decision is unchanged.
Exact add_exact(Exact x, Exact y) {
  if (x.mag == 0 && y.mag == 0) return Exact{x.neg && y.neg, 0, 0};
  if (x.mag == 0) return y;
  if (y.mag == 0) return x;
  const int ex = x.exp + msb_index(x.mag);
  const int ey = y.exp + msb_index(y.mag);
  if (ex - ey > 64) {
    y.mag = 1;
    y.exp = ex - 100;
  } else if (ey - ex > 64) {
    x.mag = 1;
    x.exp = ey - 100;
  }
  const int e = std::min(x.exp, y.exp);
  const u128 mx = x.mag << (x.exp - e);
  const u128 my = y.mag << (y.exp - e);
  Exact r;
  r.exp = e;
  if (x.neg == y.neg) {
    r.neg = x.neg;
    r.mag = mx + my;
  } else if (mx >= my) {
    r.neg = x.neg;
    r.mag = mx - my;
  } else {
    r.neg = y.neg;
    r.mag = my - mx;
  }
  if (r.mag == 0) r.neg = false;
  return r;
}

Exact mul_exact(const Exact& x, const Exact& y) {
  return Exact{x.neg != y.neg, x.mag * y.mag, x.exp + y.exp};
}

u128 isqrt(u128 v) {
  u128 res = 0;
  u128 bit = u128{1} << 126;
  while (bit > v) bit >>= 2;
  while (bit != 0) {
    if (v >= res + bit) {
      v -= res + bit;
      res = (res >> 1) + bit;
    } else {
      res >>= 1;
    }
    bit >>= 2;
  }
  return res;
}

enum class Cls { Zero, Finite, Inf, NaN };

Cls classify(Bits b, FpFormat f) {
  if (is_nan(b, f)) return Cls::NaN;
  if (is_inf(b, f)) return Cls::Inf;
  if (is_zero(b, f)) return Cls::Zero;
  return Cls::Finite;
}

bool negative(Bits b, FpFormat f) { return (b & sign_mask(f)) != 0; }

}  // namespace

std::string_view format_name(FpFormat f) {
  switch (f) {
    case FpFormat::FP32: return "fp32";
    case FpFormat::FP16: return "fp16";
    case FpFormat::FP8: return "fp8";
  }
  return "?";
}

Bits quiet_nan(FpFormat f) {
  const auto fi = format_info(f);
  return (((1u << fi.exp_bits) - 1u) << fi.mant_bits) | (1u << (fi.mant_bits - 1));
}

Bits infinity_bits(FpFormat f, bool neg) {
  const auto fi = format_info(f);
  return (neg ? sign_mask(f) : 0u) | (((1u << fi.exp_bits) - 1u) << fi.mant_bits);
}

bool is_nan(Bits b, FpFormat f) {
  const Bits mag = b & format_mask(f) & ~sign_mask(f);
  return mag > infinity_bits(f);
}

bool is_inf(Bits b, FpFormat f) {
  return (b & format_mask(f) & ~sign_mask(f)) == infinity_bits(f);
}

bool is_zero(Bits b, FpFormat f) { return (b & format_mask(f) & ~sign_mask(f)) == 0; }

double decode_fp(Bits bits, FpFormat f) {
  bits &= format_mask(f);
  if (f == FpFormat::FP32) return static_cast<double>(as_float(bits));
  if (is_nan(bits, f)) return std::numeric_limits<double>::quiet_NaN();
  const bool neg = negative(bits, f);
  if (is_inf(bits, f)) return neg ? -HUGE_VAL : HUGE_VAL;
  const Exact x = decode_exact(bits, f);
  const double v = std::ldexp(static_cast<double>(static_cast<std::uint64_t>(x.mag)), x.exp);
  return neg ? -v : v;
}

Bits encode_fp(double value, FpFormat f) {
  if (std::isnan(value)) return quiet_nan(f);
  if (f == FpFormat::FP32) return as_bits(static_cast<float>(value));
  if (std::isinf(value)) return infinity_bits(f, value < 0);
  return round_exact(exact_from_double(value), f);
}

Bits fp_add(Bits a, Bits b, FpFormat f) {
  if (f == FpFormat::FP32) return canonical32(as_float(a) + as_float(b));
  const Cls ca = classify(a, f), cb = classify(b, f);
  if (ca == Cls::NaN || cb == Cls::NaN) return quiet_nan(f);
  if (ca == Cls::Inf || cb == Cls::Inf) {
    if (ca == Cls::Inf && cb == Cls::Inf && negative(a, f) != negative(b, f)) return quiet_nan(f);
    return ca == Cls::Inf ? (a & format_mask(f)) : (b & format_mask(f));
  }
  return round_exact(add_exact(decode_exact(a, f), decode_exact(b, f)), f);
}

Bits fp_neg(Bits a, FpFormat f) {
  if (is_nan(a, f)) return quiet_nan(f);
  return (a ^ sign_mask(f)) & format_mask(f);
}

Bits fp_sub(Bits a, Bits b, FpFormat f) {
  if (f == FpFormat::FP32) return canonical32(as_float(a) - as_float(b));
  if (is_nan(b, f)) return quiet_nan(f);
  return fp_add(a, fp_neg(b, f), f);
}

Bits fp_mul(Bits a, Bits b, FpFormat f) {
  if (f == FpFormat::FP32) return canonical32(as_float(a) * as_float(b));
  const Cls ca = classify(a, f), cb = classify(b, f);
  if (ca == Cls::NaN || cb == Cls::NaN) return quiet_nan(f);
  const bool neg = negative(a, f) != negative(b, f);
  if (ca == Cls::Inf || cb == Cls::Inf) {
    if (ca == Cls::Zero || cb == Cls::Zero) return quiet_nan(f);
    return infinity_bits(f, neg);
  }
  Exact p = mul_exact(decode_exact(a, f), decode_exact(b, f));
  p.neg = neg;
  return round_exact(p, f);
}

Bits fp_fma(Bits a, Bits b, Bits c, FpFormat f) {
  if (f == FpFormat::FP32) return canonical32(std::fma(as_float(a), as_float(b), as_float(c)));
  const Cls ca = classify(a, f), cb = classify(b, f), cc = classify(c, f);
  if (ca == Cls::NaN || cb == Cls::NaN || cc == Cls::NaN) return quiet_nan(f);
  const bool pneg = negative(a, f) != negative(b, f);
  const bool pinf = ca == Cls::Inf || cb == Cls::Inf;
  if (pinf && (ca == Cls::Zero || cb == Cls::Zero)) return quiet_nan(f);
  if (pinf) {
    if (cc == Cls::Inf && negative(c, f) != pneg) return quiet_nan(f);
    return infinity_bits(f, pneg);
  }
  if (cc == Cls::Inf) return c & format_mask(f);
  Exact p = mul_exact(decode_exact(a, f), decode_exact(b, f));
  p.neg = pneg;
  return round_exact(add_exact(p, decode_exact(c, f)), f);
}

Bits fp_fms(Bits a, Bits b, Bits c, FpFormat f) {
  if (is_nan(c, f)) return quiet_nan(f);
  return fp_fma(a, b, fp_neg(c, f), f);
}

Bits fp_div(Bits a, Bits b, FpFormat f) {
  if (f == FpFormat::FP32) return canonical32(as_float(a) / as_float(b));
  const Cls ca = classify(a, f), cb = classify(b, f);
  if (ca == Cls::NaN || cb == Cls::NaN) return quiet_nan(f);
  const bool neg = negative(a, f) != negative(b, f);
  if (ca == Cls::Inf) return cb == Cls::Inf ? quiet_nan(f) : infinity_bits(f, neg);
  if (cb == Cls::Inf) return neg ? sign_mask(f) : 0u;
  if (cb == Cls::Zero) return ca == Cls::Zero ? quiet_nan(f) : infinity_bits(f, neg);
  if (ca == Cls::Zero) return neg ? sign_mask(f) : 0u;
  const Exact x = decode_exact(a, f), y = decode_exact(b, f);
  constexpr int kShift = 100;
  const u128 num = x.mag << kShift;
  const u128 q = num / y.mag;
  const bool sticky = (num % y.mag) != 0;
  return round_exact(Exact{neg, (q << 1) | (sticky ? 1 : 0), x.exp - y.exp - kShift - 1}, f);
}

Bits fp_sqrt(Bits a, FpFormat f) {
  if (f == FpFormat::FP32) return canonical32(std::sqrt(as_float(a)));
  const Cls ca = classify(a, f);
  if (ca == Cls::NaN) return quiet_nan(f);
  if (ca == Cls::Zero) return a & format_mask(f);
  if (negative(a, f)) return quiet_nan(f);
  if (ca == Cls::Inf) return infinity_bits(f);
  Exact x = decode_exact(a, f);
  if ((x.exp & 1) != 0) {
    x.mag <<= 1;
    x.exp -= 1;
  }
  constexpr int kHalfShift = 50;
  const u128 v = x.mag << (2 * kHalfShift);
  const u128 r = isqrt(v);
  const bool sticky = r * r != v;
  return round_exact(Exact{false, (r << 1) | (sticky ? 1 : 0), x.exp / 2 - kHalfShift - 1}, f);
}

Bits fp_cast(Bits bits, FpFormat from, FpFormat to) {
  if (from == to) return is_nan(bits, from) ? quiet_nan(to) : (bits & format_mask(to));
  const double v = decode_fp(bits, from);
  if (std::isnan(v)) return quiet_nan(to);
  return encode_fp(v, to);
}

// ---------------------------------------------------------------------------

Bits PackedWord::lane(int k) const {
  const int w = lane_bits(fmt);
  if (w == 32) return bits;
  return (bits >> (w * k)) & ((1u << w) - 1u);
}

void PackedWord::set_lane(int k, Bits v) {
  const int w = lane_bits(fmt);
  if (w == 32) {
    bits = v;
    return;
  }
  const Bits m = ((1u << w) - 1u) << (w * k);
  bits = (bits & ~m) | ((v << (w * k)) & m);
}

PackedWord PackedWord::pack16(Bits lo, Bits hi) {
  return PackedWord{(lo & 0xFFFFu) | ((hi & 0xFFFFu) << 16), LaneFormat::FP16};
}

PackedWord PackedWord::pack8(Bits l0, Bits l1, Bits l2, Bits l3) {
  return PackedWord{(l0 & 0xFFu) | ((l1 & 0xFFu) << 8) | ((l2 & 0xFFu) << 16) | ((l3 & 0xFFu) << 24),
                    LaneFormat::FP8};
}

namespace {

// acc + a*b with the product exact and one rounding to acc_fmt.
Bits mac_exact_product(Bits acc, Bits a, Bits b, FpFormat in_fmt, FpFormat acc_fmt) {
  const double da = decode_fp(a, in_fmt);
  const double db = decode_fp(b, in_fmt);
  const double dc = decode_fp(acc, acc_fmt);
  if (std::isnan(da) || std::isnan(db) || std::isnan(dc) || std::isinf(da) || std::isinf(db) ||
      std::isinf(dc)) {
    // Non-finite operands: IEEE double evaluation gives the same special value.
    return encode_fp(da * db + dc, acc_fmt);
  }
  Exact p = mul_exact(decode_exact(a, in_fmt), decode_exact(b, in_fmt));
  p.neg = negative(a, in_fmt) != negative(b, in_fmt);
  return round_exact(add_exact(decode_exact(acc, acc_fmt), p), acc_fmt);
}

}  // namespace

PackedWord widening_dotprod(PackedWord a, PackedWord b, PackedWord acc, FpFormat in_fmt) {
  if (in_fmt == FpFormat::FP16) {
    a.fmt = b.fmt = LaneFormat::FP16;
    // fp16 x fp16 products are exact in fp32; hardware fp32 adds are RNE.
    float s = as_float(acc.bits);
    for (int k = 0; k < 2; ++k) {
      const float p = static_cast<float>(decode_fp(a.lane(k), FpFormat::FP16)) *
                      static_cast<float>(decode_fp(b.lane(k), FpFormat::FP16));
      s = s + p;
    }
    return PackedWord{canonical32(s), LaneFormat::FP32};
  }
  a.fmt = b.fmt = LaneFormat::FP8;
  PackedWord out{acc.bits, LaneFormat::FP16};
  for (int k = 0; k < 2; ++k) {
    Bits s = out.lane(k);
    s = mac_exact_product(s, a.lane(2 * k), b.lane(2 * k), FpFormat::FP8, FpFormat::FP16);
    s = mac_exact_product(s, a.lane(2 * k + 1), b.lane(2 * k + 1), FpFormat::FP8, FpFormat::FP16);
    out.set_lane(k, s);
  }
  return out;
}

namespace {

// rnd16(c + s1*x1*y1 + s2*x2*y2) with one rounding.
Bits complex_component(Bits c, Bits x1, Bits y1, bool neg1, Bits x2, Bits y2, bool neg2) {
  constexpr auto F = FpFormat::FP16;
  const Cls cls[] = {classify(c, F), classify(x1, F), classify(y1, F), classify(x2, F), classify(y2, F)};
  for (Cls k : cls) {
    if (k == Cls::NaN || k == Cls::Inf) {
      const double p1 = decode_fp(x1, F) * decode_fp(y1, F);
      const double p2 = decode_fp(x2, F) * decode_fp(y2, F);
      return encode_fp(decode_fp(c, F) + (neg1 ? -p1 : p1) + (neg2 ? -p2 : p2), F);
    }
  }
  Exact p1 = mul_exact(decode_exact(x1, F), decode_exact(y1, F));
  p1.neg = (negative(x1, F) != negative(y1, F)) != neg1;
  Exact p2 = mul_exact(decode_exact(x2, F), decode_exact(y2, F));
  p2.neg = (negative(x2, F) != negative(y2, F)) != neg2;
  const Exact inner = add_exact(p1, p2);
  return round_exact(add_exact(decode_exact(c, F), inner), F);
}

}  // namespace

PackedWord complex_dotprod16(PackedWord a, PackedWord b, PackedWord acc) {
  a.fmt = b.fmt = acc.fmt = LaneFormat::FP16;
  const Bits ar = a.lane(0), ai = a.lane(1), br = b.lane(0), bi = b.lane(1);
  const Bits cr = complex_component(acc.lane(0), ar, br, false, ai, bi, true);
  const Bits ci = complex_component(acc.lane(1), ar, bi, false, ai, br, false);
  return PackedWord::pack16(cr, ci);
}

std::optional<PackedWord> shuffle(PackedWord a, PackedWord b, Bits mask) {
  const LaneFormat lf = a.fmt;
  if (lf == LaneFormat::FP32) return std::nullopt;
  b.fmt = lf;
  const int n = lane_count(lf);
  const int w = lane_bits(lf);
  PackedWord out{0, lf};
  for (int k = 0; k < 4; ++k) {
    const Bits byte = (mask >> (8 * k)) & 0xFFu;
    if (k >= n) {
      if (byte != 0) return std::nullopt;
      continue;
    }
    if ((byte & 0x78u) != 0) return std::nullopt;
    const int src = static_cast<int>(byte & 0x7u);
    if (src >= 2 * n) return std::nullopt;
    Bits v = src < n ? a.lane(src) : b.lane(src - n);
    if ((byte & 0x80u) != 0) v ^= 1u << (w - 1);
    out.set_lane(k, v);
  }
  return out;
}

}  // namespace sdrsim
