#pragma once
// Transmit side of the link: bits, Gray-coded QAM, channels and demapping.

#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "sdrsim/golden.hpp"

namespace sdrsim {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Counter-based generator: output k of stream s is splitmix64(s + (k+1)*gamma).
// Platform independent and random-access; distinct seeds give unrelated
// streams.

std::uint64_t splitmix64(std::uint64_t x);

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed) {}
  std::uint64_t next_u64();
  /// Uniform in (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller (both outputs are used).
  double gaussian();
  /// Circular complex Gaussian with variance `var` per component.
  cplx complex_gaussian(double var);
  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0;
  bool has_spare_ = false;
};

/// Derives an independent seed from a parent seed and a tuple of indices.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0);

std::vector<std::uint8_t> random_bits(std::uint64_t seed, std::size_t count);

// ---------------------------------------------------------------------------

enum class Modulation : std::uint8_t { Qam16, Qam64 };

std::string_view modulation_name(Modulation m);
Modulation parse_modulation(std::string_view s);

struct Constellation {
  Modulation mod;
  int bits_per_symbol;
  int levels;                  // per axis
  double scale;                // 1/sqrt(10) or 1/sqrt(42)
  std::vector<int> level_of;   // axis label -> odd integer level
  std::vector<cplx> points;    // indexed by label; first half of bits -> I
};

const Constellation& constellation(Modulation m);
/// "label_bits,I,Q" rows, one per point.
std::string constellation_csv(Modulation m);

std::vector<cplx> qam_modulate(const std::vector<std::uint8_t>& bits, Modulation m);

struct Demapped {
  std::vector<std::uint8_t> bits;
  std::size_t erasures = 0;  // symbols with a non-finite component
};

/// Nearest point per symbol; ties go to the smallest label.
Demapped qam_demodulate_hard(const std::vector<cplx>& x, Modulation m);

// ---------------------------------------------------------------------------

enum class ChannelKind : std::uint8_t { AwgnIdentity, FlatRayleigh };
enum class SnrConvention : std::uint8_t { EsN0, EbN0 };

std::string_view channel_name(ChannelKind k);
ChannelKind parse_channel(std::string_view s);
std::string_view snr_convention_name(SnrConvention c);
SnrConvention parse_snr_convention(std::string_view s);

inline constexpr double kNoiseOff = std::numeric_limits<double>::infinity();

struct ChannelModel {
  ChannelKind kind = ChannelKind::AwgnIdentity;
  int n_tx = 4;
  int n_rx = 4;
  double snr_db = 10;  // +inf turns the noise off
  SnrConvention convention = SnrConvention::EsN0;
  int bits_per_symbol = 4;  // used by the Eb/N0 convention

  void validate() const;
};

/// Complex noise variance for unit-energy symbols.
double noise_variance(const ChannelModel& ch);

/// Draws H (identity or Rayleigh) and noise, returns the detection problem
/// with perfect channel knowledge.
DetectionProblem apply_channel(const std::vector<cplx>& x, const ChannelModel& ch, std::uint64_t seed);

}  // namespace sdrsim
