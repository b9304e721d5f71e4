#pragma once
// Bit-true fp32 / fp16 / fp8 arithmetic.
//
// All values travel as raw bit patterns (the low `width` bits of a uint32_t).
// Every operation rounds once, to nearest with ties to even, unless the
// operation explicitly documents a sequence of rounding steps (the widening
// dot product). Subnormals are supported in every format; NaN results are
// always the canonical quiet NaN of the target format.

#include <cstdint>
#include <optional>
#include <string_view>

namespace sdrsim {

using Bits = std::uint32_t;

enum class FpFormat : std::uint8_t { FP32, FP16, FP8 };

struct FormatInfo {
  int width;
  int exp_bits;
  int mant_bits;
  int bias;
};

constexpr FormatInfo format_info(FpFormat f) {
  switch (f) {
    case FpFormat::FP32: return {32, 8, 23, 127};
    case FpFormat::FP16: return {16, 5, 10, 15};
    case FpFormat::FP8: return {8, 4, 2, 7};
  }
  return {32, 8, 23, 127};
}

constexpr int format_width(FpFormat f) { return format_info(f).width; }

constexpr Bits format_mask(FpFormat f) {
  return f == FpFormat::FP32 ? 0xFFFFFFFFu : ((1u << format_width(f)) - 1u);
}

constexpr Bits sign_mask(FpFormat f) { return 1u << (format_width(f) - 1); }

std::string_view format_name(FpFormat f);

/// Canonical quiet NaN: exponent all ones, mantissa MSB set, sign clear.
Bits quiet_nan(FpFormat f);
Bits infinity_bits(FpFormat f, bool negative = false);

bool is_nan(Bits b, FpFormat f);
bool is_inf(Bits b, FpFormat f);
bool is_zero(Bits b, FpFormat f);

/// Exact value of an encoding as a double (every fp32/fp16/fp8 value is a
/// double). NaN decodes to a quiet NaN, infinities to +-inf.
double decode_fp(Bits bits, FpFormat f);

/// Round a double (taken as an exact real) to `f`.
Bits encode_fp(double value, FpFormat f);

Bits fp_add(Bits a, Bits b, FpFormat f);
Bits fp_sub(Bits a, Bits b, FpFormat f);
Bits fp_mul(Bits a, Bits b, FpFormat f);
/// a*b + c with a single rounding.
Bits fp_fma(Bits a, Bits b, Bits c, FpFormat f);
/// a*b - c with a single rounding.
Bits fp_fms(Bits a, Bits b, Bits c, FpFormat f);
Bits fp_div(Bits a, Bits b, FpFormat f);
Bits fp_sqrt(Bits a, FpFormat f);
Bits fp_neg(Bits a, FpFormat f);

Bits fp_cast(Bits bits, FpFormat from, FpFormat to);

// ---------------------------------------------------------------------------
// Packed 32-bit words.

enum class LaneFormat : std::uint8_t { FP32, FP16, FP8 };

constexpr int lane_count(LaneFormat l) {
  return l == LaneFormat::FP32 ? 1 : (l == LaneFormat::FP16 ? 2 : 4);
}

constexpr int lane_bits(LaneFormat l) { return 32 / lane_count(l); }

constexpr FpFormat lane_fp(LaneFormat l) {
  return l == LaneFormat::FP32 ? FpFormat::FP32
                               : (l == LaneFormat::FP16 ? FpFormat::FP16 : FpFormat::FP8);
}

/// 32-bit container; lane 0 in the least significant bits.
struct PackedWord {
  Bits bits = 0;
  LaneFormat fmt = LaneFormat::FP32;

  Bits lane(int k) const;
  void set_lane(int k, Bits v);

  static PackedWord pack16(Bits lo, Bits hi);
  static PackedWord pack8(Bits l0, Bits l1, Bits l2, Bits l3);
};

/// Widening dot product. For FP16 inputs the accumulator is one fp32 lane
/// holding acc + a0*b0 + a1*b1; for FP8 inputs the accumulator has two fp16
/// lanes and lane k accumulates input lanes 2k and 2k+1. Products are exact;
/// each accumulation step rounds to the accumulator format.
PackedWord widening_dotprod(PackedWord a, PackedWord b, PackedWord acc, FpFormat in_fmt);

/// Complex fp16 multiply-accumulate: lanes are (real, imag). Products and
/// the inner sum/difference are exact; each component rounds once.
PackedWord complex_dotprod16(PackedWord a, PackedWord b, PackedWord acc);

/// Shuffle mask layout (one byte per output lane, byte k for lane k):
///   bits 2:0  source lane in the concatenation a||b (a lanes first)
///   bit 7     flip the sign bit of the selected lane
/// Remaining bits, and bytes beyond the lane count, must be zero.
/// Returns nullopt for an invalid mask.
std::optional<PackedWord> shuffle(PackedWord a, PackedWord b, Bits mask);

/// Helper to build shuffle masks.
constexpr Bits shuffle_lane(int out_lane, int src_lane, bool negate = false) {
  return (static_cast<Bits>(src_lane) | (negate ? 0x80u : 0u)) << (8 * out_lane);
}

}  // namespace sdrsim
