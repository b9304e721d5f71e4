#include "sdrsim/phy.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace sdrsim {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t RandomStream::next_u64() { return splitmix64(seed_ + kGamma * counter_++); }

double RandomStream::uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

double RandomStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double t = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

cplx RandomStream::complex_gaussian(double var) {
  const double s = std::sqrt(var);
  const double re = gaussian();
  return {s * re, s * gaussian()};
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(parent) ^ a) ^ (b * kGamma + 1));
}

std::vector<std::uint8_t> random_bits(std::uint64_t seed, std::size_t count) {
  RandomStream rs(seed);
  std::vector<std::uint8_t> bits(count);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 64 == 0) word = rs.next_u64();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1u);
  }
  return bits;
}

// ---------------------------------------------------------------------------

std::string_view modulation_name(Modulation m) { return m == Modulation::Qam16 ? "16qam" : "64qam"; }

Modulation parse_modulation(std::string_view s) {
  if (s == "16qam") return Modulation::Qam16;
  if (s == "64qam") return Modulation::Qam64;
  throw ConfigError("unknown modulation '" + std::string(s) + "'");
}

namespace {

Constellation build(Modulation m) {
  Constellation c;
  c.mod = m;
  c.bits_per_symbol = m == Modulation::Qam16 ? 4 : 6;
  const int half = c.bits_per_symbol / 2;
  c.levels = 1 << half;
  c.scale = 1.0 / std::sqrt(m == Modulation::Qam16 ? 10.0 : 42.0);
  // reflected Gray code: position p (left to right) carries label p ^ (p >> 1)
  c.level_of.assign(static_cast<std::size_t>(c.levels), 0);
  for (int p = 0; p < c.levels; ++p) c.level_of[static_cast<std::size_t>(p ^ (p >> 1))] = 2 * p - (c.levels - 1);
  for (int label = 0; label < (1 << c.bits_per_symbol); ++label) {
    const int li = label >> half, lq = label & (c.levels - 1);
    c.points.emplace_back(c.scale * c.level_of[static_cast<std::size_t>(li)],
                          c.scale * c.level_of[static_cast<std::size_t>(lq)]);
  }
  return c;
}

// Axis label of the nearest level; ties toward the smaller label.
int nearest_axis(const Constellation& c, double v) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int label = 0; label < c.levels; ++label) {
    const double d = std::abs(v - c.scale * c.level_of[static_cast<std::size_t>(label)]);
    if (d < best_d) {
      best_d = d;
      best = label;
    }
  }
  return best;
}

}  // namespace

const Constellation& constellation(Modulation m) {
  static const Constellation q16 = build(Modulation::Qam16);
  static const Constellation q64 = build(Modulation::Qam64);
  return m == Modulation::Qam16 ? q16 : q64;
}

std::string constellation_csv(Modulation m) {
  const Constellation& c = constellation(m);
  std::ostringstream o;
  o.precision(17);
  o << "label_bits,I,Q\n";
  for (std::size_t l = 0; l < c.points.size(); ++l) {
    for (int b = c.bits_per_symbol - 1; b >= 0; --b) o << ((l >> b) & 1u);
    o << ',' << c.points[l].real() << ',' << c.points[l].imag() << '\n';
  }
  return o.str();
}

std::vector<cplx> qam_modulate(const std::vector<std::uint8_t>& bits, Modulation m) {
  const Constellation& c = constellation(m);
  const auto bps = static_cast<std::size_t>(c.bits_per_symbol);
  if (bits.size() % bps != 0)
    throw ConfigError(std::to_string(bits.size()) + " bits is not a multiple of " + std::to_string(bps));
  std::vector<cplx> out;
  out.reserve(bits.size() / bps);
  for (std::size_t s = 0; s < bits.size(); s += bps) {
    std::size_t label = 0;
    for (std::size_t b = 0; b < bps; ++b) label = (label << 1) | (bits[s + b] & 1u);
    out.push_back(c.points[label]);
  }
  return out;
}

Demapped qam_demodulate_hard(const std::vector<cplx>& x, Modulation m) {
  const Constellation& c = constellation(m);
  const int half = c.bits_per_symbol / 2;
  Demapped d;
  d.bits.reserve(x.size() * static_cast<std::size_t>(c.bits_per_symbol));
  for (const cplx& v : x) {
    int label = 0;
    if (std::isfinite(v.real()) && std::isfinite(v.imag())) {
      label = (nearest_axis(c, v.real()) << half) | nearest_axis(c, v.imag());
    } else {
      ++d.erasures;
    }
    for (int b = c.bits_per_symbol - 1; b >= 0; --b) d.bits.push_back(static_cast<std::uint8_t>((label >> b) & 1));
  }
  return d;
}

// ---------------------------------------------------------------------------

std::string_view channel_name(ChannelKind k) { return k == ChannelKind::AwgnIdentity ? "awgn" : "rayleigh"; }

ChannelKind parse_channel(std::string_view s) {
  if (s == "awgn") return ChannelKind::AwgnIdentity;
  if (s == "rayleigh") return ChannelKind::FlatRayleigh;
  throw ConfigError("unknown channel '" + std::string(s) + "'");
}

std::string_view snr_convention_name(SnrConvention c) { return c == SnrConvention::EsN0 ? "esn0" : "ebn0"; }

SnrConvention parse_snr_convention(std::string_view s) {
  if (s == "esn0") return SnrConvention::EsN0;
  if (s == "ebn0") return SnrConvention::EbN0;
  throw ConfigError("unknown SNR convention '" + std::string(s) + "'");
}

void ChannelModel::validate() const {
  if (n_tx < 1 || n_rx < n_tx) throw ConfigError("channel needs n_rx >= n_tx >= 1");
  if (kind == ChannelKind::AwgnIdentity && n_rx != n_tx) throw ConfigError("identity channel needs n_rx == n_tx");
  if (std::isnan(snr_db) || snr_db == -kNoiseOff) throw ConfigError("snr_db must be finite or +inf");
  if (bits_per_symbol < 1) throw ConfigError("bits_per_symbol must be positive");
}

double noise_variance(const ChannelModel& ch) {
  if (ch.snr_db == kNoiseOff) return 0.0;
  const double s2 = std::pow(10.0, -ch.snr_db / 10.0);
  return ch.convention == SnrConvention::EsN0 ? s2 : s2 / ch.bits_per_symbol;
}

DetectionProblem apply_channel(const std::vector<cplx>& x, const ChannelModel& ch, std::uint64_t seed) {
  ch.validate();
  if (static_cast<int>(x.size()) != ch.n_tx) throw ConfigError("symbol vector length does not match n_tx");
  RandomStream rs(seed);
  DetectionProblem p;
  p.sigma2 = noise_variance(ch);
  if (ch.kind == ChannelKind::AwgnIdentity) {
    p.H = CMatrix<double>::Identity(ch.n_rx, ch.n_tx);
  } else {
    p.H.resize(ch.n_rx, ch.n_tx);
    for (int k = 0; k < ch.n_rx; ++k)
      for (int i = 0; i < ch.n_tx; ++i) p.H(k, i) = rs.complex_gaussian(0.5);
  }
  const CVector<double> xv = Eigen::Map<const CVector<double>>(x.data(), ch.n_tx);
  p.y = p.H * xv;
  if (p.sigma2 > 0)
    for (int k = 0; k < ch.n_rx; ++k) p.y(k) += rs.complex_gaussian(p.sigma2 / 2);
  return p;
}

}  // namespace sdrsim
