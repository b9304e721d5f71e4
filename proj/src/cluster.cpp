#include "sdrsim/cluster.hpp"

#include <cstdio>
#include <cstring>
#include <sstream>
#include <utility>

#include "sdrsim/config.hpp"

namespace sdrsim {

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

MemoryError::MemoryError(MemFault f, std::uint32_t a)
    : Error(std::string(f == MemFault::Misaligned ? "misaligned access at " : "out-of-map access at ") + hex32(a)),
      fault(f),
      addr(a) {}

void ClusterConfig::validate() const {
  if (cores_per_tile < 1 || tiles_per_subgroup < 1 || subgroups_per_group < 1 || groups < 1)
    throw ConfigError("hierarchy counts must be positive");
  if (cores() > 65536) throw ConfigError("at most 65536 cores are supported");
  const std::uint32_t word_stride = 4u * static_cast<std::uint32_t>(banks_per_tile());
  if (l1_bytes_per_tile == 0 || l1_bytes_per_tile % word_stride != 0)
    throw ConfigError("l1_bytes_per_tile must be a positive multiple of 4 * banks_per_tile");
  if (static_cast<std::uint64_t>(tiles()) * l1_bytes_per_tile > kTextBase - kL1Base)
    throw ConfigError("total L1 does not fit the address map");
  if (l2_bytes % 4 != 0 || static_cast<std::uint64_t>(l2_bytes) > 0x100000000ull - kL2Base)
    throw ConfigError("l2_bytes must be a multiple of 4 and fit the address map");
  if (latency.same_tile != 1) throw ConfigError("latency.same_tile must be 1");
  for (std::uint32_t l : {latency.same_subgroup, latency.same_group, latency.cross_group})
    if (l < 1 || l > 9) throw ConfigError("L1 region latencies must lie in [1, 9]");
  if (latency.l2 < 1) throw ConfigError("latency.l2 must be at least 1");
  if (dma_beat_bytes == 0) throw ConfigError("dma.beat_bytes must be positive");
}

ClusterConfig parse_cluster_config(std::string_view text) {
  ClusterConfig c;
  for (const auto& e : parse_entries(text)) {
    auto u32 = [&](std::int64_t lo, std::int64_t hi) { return static_cast<std::uint32_t>(parse_int(e, lo, hi)); };
    auto i32 = [&] { return static_cast<int>(parse_int(e, 1, 65536)); };
    if (e.key == "cores_per_tile") c.cores_per_tile = i32();
    else if (e.key == "tiles_per_subgroup") c.tiles_per_subgroup = i32();
    else if (e.key == "subgroups_per_group") c.subgroups_per_group = i32();
    else if (e.key == "groups") c.groups = i32();
    else if (e.key == "l1_bytes_per_tile") c.l1_bytes_per_tile = u32(1, 0x70000000);
    else if (e.key == "l2_bytes") c.l2_bytes = u32(0, 0x70000000);
    else if (e.key == "latency.same_tile") c.latency.same_tile = u32(1, 1 << 20);
    else if (e.key == "latency.same_subgroup") c.latency.same_subgroup = u32(1, 1 << 20);
    else if (e.key == "latency.same_group") c.latency.same_group = u32(1, 1 << 20);
    else if (e.key == "latency.cross_group") c.latency.cross_group = u32(1, 1 << 20);
    else if (e.key == "latency.l2") c.latency.l2 = u32(1, 1 << 20);
    else if (e.key == "dma.beat_bytes") c.dma_beat_bytes = u32(1, 1 << 20);
    else if (e.key == "dma.setup_cycles") c.dma_setup_cycles = u32(0, 1 << 20);
    else throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
  }
  c.validate();
  return c;
}

ClusterConfig load_cluster_config(const std::string& path) { return parse_cluster_config(read_text_file(path)); }

std::string format_cluster_config(const ClusterConfig& c) {
  std::ostringstream o;
  o << "cores_per_tile = " << c.cores_per_tile << "\n"
    << "tiles_per_subgroup = " << c.tiles_per_subgroup << "\n"
    << "subgroups_per_group = " << c.subgroups_per_group << "\n"
    << "groups = " << c.groups << "\n"
    << "l1_bytes_per_tile = " << c.l1_bytes_per_tile << "\n"
    << "l2_bytes = " << c.l2_bytes << "\n"
    << "latency.same_tile = " << c.latency.same_tile << "\n"
    << "latency.same_subgroup = " << c.latency.same_subgroup << "\n"
    << "latency.same_group = " << c.latency.same_group << "\n"
    << "latency.cross_group = " << c.latency.cross_group << "\n"
    << "latency.l2 = " << c.latency.l2 << "\n"
    << "dma.beat_bytes = " << c.dma_beat_bytes << "\n"
    << "dma.setup_cycles = " << c.dma_setup_cycles << "\n";
  return o.str();
}

std::string_view region_name(Region r) {
  switch (r) {
    case Region::SameTile: return "same_tile";
    case Region::SameSubgroup: return "same_subgroup";
    case Region::SameGroup: return "same_group";
    case Region::CrossGroup: return "cross_group";
    case Region::L2: return "l2";
    case Region::Text: return "text";
  }
  return "?";
}

AddressClass classify_address(std::uint32_t addr, int hart, const ClusterConfig& cfg) {
  if (addr >= kL1Base && addr - kL1Base < cfg.l1_bytes()) {
    const int tile = static_cast<int>((addr - kL1Base) / cfg.l1_bytes_per_tile);
    const int own = hart / cfg.cores_per_tile;
    if (tile == own) return {Region::SameTile, cfg.latency.same_tile};
    const int sg = tile / cfg.tiles_per_subgroup, own_sg = own / cfg.tiles_per_subgroup;
    if (sg == own_sg) return {Region::SameSubgroup, cfg.latency.same_subgroup};
    if (sg / cfg.subgroups_per_group == own_sg / cfg.subgroups_per_group)
      return {Region::SameGroup, cfg.latency.same_group};
    return {Region::CrossGroup, cfg.latency.cross_group};
  }
  if (addr >= kTextBase && addr - kTextBase < kTextBytes) return {Region::Text, cfg.latency.l2};
  if (addr >= kL2Base && addr - kL2Base < cfg.l2_bytes) return {Region::L2, cfg.latency.l2};
  throw MemoryError(MemFault::OutOfMap, addr);
}

BankLocation bank_of(std::uint32_t addr, const ClusterConfig& cfg) {
  if (addr < kL1Base || addr - kL1Base >= cfg.l1_bytes()) throw MemoryError(MemFault::OutOfMap, addr);
  const std::uint32_t off = addr - kL1Base;
  return {static_cast<int>(off / cfg.l1_bytes_per_tile),
          static_cast<int>((off % cfg.l1_bytes_per_tile) / 4 % static_cast<std::uint32_t>(cfg.banks_per_tile()))};
}

ClusterMemory::ClusterMemory(const ClusterConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  l1_.assign(cfg_.l1_bytes(), 0);
  l2_.assign(cfg_.l2_bytes, 0);
  text_.assign(kTextBytes, 0);
}

const std::uint8_t* ClusterMemory::locate(std::uint32_t addr, std::uint32_t length) const {
  auto within = [&](std::uint32_t base, std::size_t size) {
    return addr >= base && addr - base <= size && length <= size - (addr - base);
  };
  if (within(kL1Base, l1_.size())) return l1_.data() + (addr - kL1Base);
  if (within(kTextBase, text_.size())) return text_.data() + (addr - kTextBase);
  if (within(kL2Base, l2_.size())) return l2_.data() + (addr - kL2Base);
  return nullptr;
}

std::uint8_t* ClusterMemory::locate(std::uint32_t addr, std::uint32_t length) {
  return const_cast<std::uint8_t*>(std::as_const(*this).locate(addr, length));
}

MemFault ClusterMemory::try_read(std::uint32_t addr, int width, std::uint32_t& out) const {
  if (addr % static_cast<std::uint32_t>(width) != 0) return MemFault::Misaligned;
  const std::uint8_t* p = locate(addr, static_cast<std::uint32_t>(width));
  if (p == nullptr) return MemFault::OutOfMap;
  std::uint32_t v = 0;
  for (int i = width - 1; i >= 0; --i) v = (v << 8) | p[i];
  out = v;
  return MemFault::None;
}

MemFault ClusterMemory::try_write(std::uint32_t addr, int width, std::uint32_t value) {
  if (addr % static_cast<std::uint32_t>(width) != 0) return MemFault::Misaligned;
  std::uint8_t* p = locate(addr, static_cast<std::uint32_t>(width));
  if (p == nullptr) return MemFault::OutOfMap;
  for (int i = 0; i < width; ++i) p[i] = static_cast<std::uint8_t>(value >> (8 * i));
  return MemFault::None;
}

std::uint32_t ClusterMemory::read(std::uint32_t addr, int width) const {
  std::uint32_t v = 0;
  if (auto f = try_read(addr, width, v); f != MemFault::None) throw MemoryError(f, addr);
  return v;
}

void ClusterMemory::write(std::uint32_t addr, int width, std::uint32_t value) {
  if (auto f = try_write(addr, width, value); f != MemFault::None) throw MemoryError(f, addr);
}

void ClusterMemory::write_bytes(std::uint32_t addr, const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) return;
  std::uint8_t* p = locate(addr, static_cast<std::uint32_t>(bytes.size()));
  if (p == nullptr) throw MemoryError(MemFault::OutOfMap, addr);
  std::memcpy(p, bytes.data(), bytes.size());
}

std::vector<std::uint8_t> ClusterMemory::read_bytes(std::uint32_t addr, std::uint32_t length) const {
  if (length == 0) return {};
  const std::uint8_t* p = locate(addr, length);
  if (p == nullptr) throw MemoryError(MemFault::OutOfMap, addr);
  return {p, p + length};
}

std::uint64_t ClusterMemory::bulk_copy(std::uint32_t src, std::uint32_t dst, std::uint32_t length) {
  const std::uint64_t cost = cfg_.dma_setup_cycles + (length + cfg_.dma_beat_bytes - 1) / cfg_.dma_beat_bytes;
  if (length == 0) return cost;
  const std::uint8_t* s = locate(src, length);
  if (s == nullptr) throw MemoryError(MemFault::OutOfMap, src);
  std::uint8_t* d = locate(dst, length);
  if (d == nullptr) throw MemoryError(MemFault::OutOfMap, dst);
  const std::uint64_t s0 = src, d0 = dst;
  if (s0 < d0 + length && d0 < s0 + length) throw Error("bulk_copy: source and destination overlap");
  std::memcpy(d, s, length);
  return cost;
}

}  // namespace sdrsim
