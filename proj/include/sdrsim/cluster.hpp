#pragma once
// Cluster configuration, address map and functional memory.
//
// Address map:
//   L1   [0x10000000, +tiles * l1_bytes_per_tile)  tile t owns one contiguous
//        32 KiB window; words are interleaved across the tile's banks
//   text [0x80000000, +1 MiB)                       program text and .data
//   L2   [0x90000000, +l2_bytes)
// Everything else is out of map.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sdrsim/error.hpp"

namespace sdrsim {

struct RegionLatencies {
  std::uint32_t same_tile = 1;
  std::uint32_t same_subgroup = 5;
  std::uint32_t same_group = 7;
  std::uint32_t cross_group = 9;
  std::uint32_t l2 = 20;
};

struct ClusterConfig {
  int cores_per_tile = 8;
  int tiles_per_subgroup = 8;
  int subgroups_per_group = 4;
  int groups = 4;
  std::uint32_t l1_bytes_per_tile = 32 * 1024;
  std::uint32_t l2_bytes = 4 * 1024 * 1024;
  RegionLatencies latency;
  std::uint32_t dma_beat_bytes = 16;
  std::uint32_t dma_setup_cycles = 20;

  int tiles() const { return tiles_per_subgroup * subgroups_per_group * groups; }
  int cores() const { return tiles() * cores_per_tile; }
  std::uint32_t l1_bytes() const { return static_cast<std::uint32_t>(tiles()) * l1_bytes_per_tile; }
  /// Banks per tile: two per core.
  int banks_per_tile() const { return 2 * cores_per_tile; }

  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

/// key=value text; keys: cores_per_tile, tiles_per_subgroup,
/// subgroups_per_group, groups, l1_bytes_per_tile, l2_bytes,
/// latency.same_tile, latency.same_subgroup, latency.same_group,
/// latency.cross_group, latency.l2, dma.beat_bytes, dma.setup_cycles.
ClusterConfig parse_cluster_config(std::string_view text);
ClusterConfig load_cluster_config(const std::string& path);
std::string format_cluster_config(const ClusterConfig& cfg);

inline constexpr std::uint32_t kL1Base = 0x10000000u;
inline constexpr std::uint32_t kTextBase = 0x80000000u;
inline constexpr std::uint32_t kTextBytes = 1u << 20;
inline constexpr std::uint32_t kL2Base = 0x90000000u;

enum class Region : std::uint8_t { SameTile, SameSubgroup, SameGroup, CrossGroup, L2, Text };

std::string_view region_name(Region r);

struct AddressClass {
  Region region;
  std::uint32_t latency;  // region-based latency
};

struct BankLocation {
  int tile;
  int bank;
};

enum class MemFault : std::uint8_t { None, Misaligned, OutOfMap };

struct MemoryError : Error {
  MemFault fault;
  std::uint32_t addr;
  MemoryError(MemFault f, std::uint32_t a);
};

/// Region of `addr` as seen from `hart`. Throws MemoryError(OutOfMap).
AddressClass classify_address(std::uint32_t addr, int hart, const ClusterConfig& cfg);

/// Tile and bank of an L1 word. Throws MemoryError(OutOfMap) outside L1.
BankLocation bank_of(std::uint32_t addr, const ClusterConfig& cfg);

/// Flat functional memory. Latency affects timing only; reads observe the
/// latest write immediately.
class ClusterMemory {
 public:
  explicit ClusterMemory(const ClusterConfig& cfg);

  const ClusterConfig& config() const { return cfg_; }

  /// Little-endian access of 1, 2 or 4 bytes; throws MemoryError.
  std::uint32_t read(std::uint32_t addr, int width) const;
  void write(std::uint32_t addr, int width, std::uint32_t value);

  /// Non-throwing variants used by the emulator.
  MemFault try_read(std::uint32_t addr, int width, std::uint32_t& out) const;
  MemFault try_write(std::uint32_t addr, int width, std::uint32_t value);

  void write_bytes(std::uint32_t addr, const std::vector<std::uint8_t>& bytes);
  std::vector<std::uint8_t> read_bytes(std::uint32_t addr, std::uint32_t length) const;

  /// Byte-exact copy between disjoint in-map ranges. Returns the modeled
  /// cost: setup + ceil(length / beat_bytes) cycles.
  std::uint64_t bulk_copy(std::uint32_t src, std::uint32_t dst, std::uint32_t length);

 private:
  std::uint8_t* locate(std::uint32_t addr, std::uint32_t length);
  const std::uint8_t* locate(std::uint32_t addr, std::uint32_t length) const;

  ClusterConfig cfg_;
  std::vector<std::uint8_t> l1_;
  std::vector<std::uint8_t> l2_;
  std::vector<std::uint8_t> text_;
};

}  // namespace sdrsim
