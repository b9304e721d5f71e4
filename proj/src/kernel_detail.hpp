#pragma once
// Shared between the functional model and the program generator.

#include "sdrsim/kernels.hpp"

namespace sdrsim::detail {

inline constexpr Bits kConj16 = shuffle_lane(0, 0) | shuffle_lane(1, 1, true);      // (re, -im)
inline constexpr Bits kNegConj16 = shuffle_lane(0, 0, true) | shuffle_lane(1, 1);   // (-re, im)
inline constexpr Bits kSwapNeg16 = shuffle_lane(0, 1) | shuffle_lane(1, 0, true);   // (im, -re)
// fp8 widening operands for conj(a) b: X = (ar, ai, -ai, ar), Y = (br, bi, br, bi)
inline constexpr Bits kX8Lo = shuffle_lane(0, 0) | shuffle_lane(1, 1) | shuffle_lane(2, 1, true) | shuffle_lane(3, 0);
inline constexpr Bits kY8Lo = shuffle_lane(0, 0) | shuffle_lane(1, 1) | shuffle_lane(2, 0) | shuffle_lane(3, 1);
inline constexpr Bits kX8Hi = shuffle_lane(0, 2) | shuffle_lane(1, 3) | shuffle_lane(2, 3, true) | shuffle_lane(3, 2);
inline constexpr Bits kY8Hi = shuffle_lane(0, 2) | shuffle_lane(1, 3) | shuffle_lane(2, 2) | shuffle_lane(3, 3);

/// Idiom used for the linear-system phase.
enum class Linear { Half, WDot, CDot };

inline Linear linear_idiom(Variant v) {
  switch (v) {
    case Variant::WDotp16: return Linear::WDot;
    case Variant::CDotp16: return Linear::CDot;
    default: return Linear::Half;
  }
}

inline bool positive_fp16(Bits d) { return d - 1u < 0x7C00u; }
inline bool positive_fp32(Bits d) { return d - 1u < 0x7F800000u; }

}  // namespace sdrsim::detail
