#pragma once
// MMSE detection kernels: precision variants, input quantization, the
// bit-true host model and the generator of emulator programs.
//
// Every multiply-accumulate in the detector has the form sum_k conj(a_k) b_k:
//   G_ij = sum_k conj(H_ki) H_kj (+ s2 on the diagonal)
//   w_i  = sum_k conj(y_k) H_ki                          (w = conj(z))
//   L_ij = (G_ij - sum_{k<j} conj(L_jk) L_ik) / L_jj
//   v_i  = (w_i - sum_{k<i} conj(L_ik) v_k) / L_ii       (v = conj(u))
//   x_i  = (conj(v_i) - sum_{k>i} conj(L_ki) x_k) / L_ii
// Working with w and v instead of z and u keeps the conjugate on the same
// operand everywhere, so each variant needs one MAC idiom.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sdrsim/cluster.hpp"
#include "sdrsim/cluster_run.hpp"
#include "sdrsim/golden.hpp"
#include "sdrsim/isa.hpp"
#include "sdrsim/lowprec.hpp"

namespace sdrsim {

enum class Variant : std::uint8_t { Double64, Half16, WDotp16, CDotp16, Quarter8, WDotp8 };

std::string_view variant_name(Variant v);
/// Accepts the names printed by variant_name. Throws ConfigError.
Variant parse_variant(std::string_view s);
inline constexpr Variant kDeviceVariants[] = {Variant::Half16, Variant::WDotp16, Variant::CDotp16,
                                              Variant::Quarter8, Variant::WDotp8};

/// Storage format of Ĥ, y and s2.
FpFormat input_format(Variant v);
inline bool is_8bit(Variant v) { return v == Variant::Quarter8 || v == Variant::WDotp8; }

/// Problem quantized to a variant's storage format. A complex element is
/// packed real-first: (re | im << 16) for fp16, (re | im << 8) for fp8.
/// x̂ is always fp16 pairs.
struct QuantizedProblem {
  Variant variant = Variant::Half16;
  int n_tx = 0;
  int n_rx = 0;
  std::vector<Bits> H;  // row-major n_rx x n_tx
  std::vector<Bits> y;
  Bits sigma2 = 0;
};

QuantizedProblem quantize(const DetectionProblem& p, Variant v);

struct FunctionalResult {
  std::vector<Bits> xhat;  // fp16 pairs
  int status = 0;          // 0, or 1 + column of the first non-positive pivot
  bool operator==(const FunctionalResult&) const = default;
};

/// Bit-true model of the generated kernel.
FunctionalResult functional_run(const QuantizedProblem& q);

/// Quantizes, runs the bit-true model and decodes. Throws
/// NonPositiveDiagonal if the reduced-precision factorization fails.
CVector<double> functional_mmse(const DetectionProblem& p, Variant v);

CVector<double> decode_xhat(const std::vector<Bits>& words);

// ---------------------------------------------------------------------------
// Device layout and program generation.

struct KernelSpec {
  Variant variant = Variant::Half16;
  int n_tx = 4;
  int n_rx = 4;
  int batch = 1;  // problems per hart
  int harts = 1;
  bool operator==(const KernelSpec&) const = default;
};

/// Byte offsets. Problem fields are relative to the problem base, workspace
/// fields to the workspace base; aux0..aux2 hold variant-specific scratch.
struct LayoutDescriptor {
  KernelSpec spec;
  std::uint32_t l1_base = kL1Base;
  std::uint32_t slice_bytes = 0;

  std::uint32_t off_y = 0, off_sigma2 = 0, off_xhat = 0, off_h = 0, off_status = 0;
  std::uint32_t problem_bytes = 0;

  std::uint32_t ws_offset = 0;  // from slice base
  std::uint32_t off_gl = 0, off_wv = 0, off_aux0 = 0, off_aux1 = 0, off_aux2 = 0;
  std::uint32_t ws_bytes = 0;

  std::uint32_t required_bytes() const { return ws_offset + ws_bytes; }
  std::uint32_t slice_base(int hart) const { return l1_base + static_cast<std::uint32_t>(hart) * slice_bytes; }
  std::uint32_t problem_base(int hart, int b) const {
    return slice_base(hart) + static_cast<std::uint32_t>(b) * problem_bytes;
  }
  std::uint32_t workspace_base(int hart) const { return slice_base(hart) + ws_offset; }

  bool operator==(const LayoutDescriptor&) const = default;
};

struct CapacityError : Error {
  std::uint64_t required;
  std::uint64_t available;
  CapacityError(std::uint64_t req, std::uint64_t avail);
};

/// Computes the layout; throws CapacityError if a hart's share of L1 is
/// too small, ConfigError for bad sizes.
LayoutDescriptor make_layout(const KernelSpec& spec, const ClusterConfig& cfg);

std::string format_layout(const LayoutDescriptor& l);
LayoutDescriptor parse_layout(std::string_view text);

struct KernelProgram {
  std::string assembly;
  ProgramImage image;
  LayoutDescriptor layout;
};

inline constexpr int kUnroll = 4;
inline constexpr Bits kCanary = 0xDEADBEEFu;

KernelProgram generate_kernel(const KernelSpec& spec, const ClusterConfig& cfg);

/// Writes inputs, clears status and fills x̂ with the canary.
void load_problem(ClusterMemory& mem, const LayoutDescriptor& l, int hart, int b, const QuantizedProblem& q);
FunctionalResult extract_result(const ClusterMemory& mem, const LayoutDescriptor& l, int hart, int b);

struct EmulatedRun {
  std::vector<FunctionalResult> results;  // one per input problem
  ClusterRunReport report;
};

/// Loads up to harts*batch problems (problem p goes to hart p % harts, slot
/// p / harts; empty slots get a well-conditioned filler), runs the cluster
/// and extracts every result.
EmulatedRun run_emulated(const KernelProgram& k, const ClusterConfig& cfg, const LatencyTable& table,
                         const std::vector<QuantizedProblem>& problems, const RunOptions& opts = {});

}  // namespace sdrsim
