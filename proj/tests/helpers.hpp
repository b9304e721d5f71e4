#pragma once

#include <string>

#include "sdrsim/cluster_run.hpp"

namespace testing {

// Small cluster: 2 cores per tile, 2 tiles per subgroup, 2 subgroups per
// group, 2 groups (32 cores) with 1 KiB of L1 per tile and 64 KiB of L2.
inline sdrsim::ClusterConfig small_cluster() {
  sdrsim::ClusterConfig c;
  c.cores_per_tile = 2;
  c.tiles_per_subgroup = 2;
  c.subgroups_per_group = 2;
  c.groups = 2;
  c.l1_bytes_per_tile = 1024;
  c.l2_bytes = 64 * 1024;
  return c;
}

struct Run {
  sdrsim::Cluster cluster;
  sdrsim::ClusterRunReport report;
};

inline Run run_source(const std::string& src, int harts = 1,
                      const sdrsim::LatencyTable& t = sdrsim::LatencyTable::defaults(),
                      const sdrsim::RunOptions& o = {}, const sdrsim::ClusterConfig& cfg = small_cluster()) {
  Run r{sdrsim::Cluster(cfg, t), {}};
  r.cluster.load(sdrsim::assemble(src), harts);
  r.report = sdrsim::run_cluster(r.cluster, o);
  return r;
}

}  // namespace testing
