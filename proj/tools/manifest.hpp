#pragma once
// Run manifest shared by the run, kernel-gen and cycles commands.

#include <cstdint>
#include <optional>
#include <string>

#include "sdrsim/cluster.hpp"
#include "sdrsim/core.hpp"
#include "sdrsim/kernels.hpp"

namespace sdrsim::cli {

struct Manifest {
  std::string path;
  std::optional<std::string> program;  // .s source or binary image
  int harts = 1;
  std::uint64_t max_steps = 1ull << 32;
  std::uint64_t quantum = 100;
  ClusterConfig cluster;
  LatencyTable latency = LatencyTable::defaults();
  std::optional<KernelSpec> kernel;  // set when `variant` is present
  double snr_db = 0;
  std::uint64_t seed = 1;
  std::optional<std::string> out;
  std::optional<int> workers;
};

/// Relative paths inside the manifest resolve against its directory.
Manifest load_manifest(const std::string& path);

}  // namespace sdrsim::cli
