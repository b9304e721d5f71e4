#include "manifest.hpp"

#include <filesystem>

#include "sdrsim/config.hpp"

namespace sdrsim::cli {

Manifest load_manifest(const std::string& path) {
  namespace fs = std::filesystem;
  Manifest m;
  m.path = path;
  const fs::path dir = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (dir / p).string(); };

  KernelSpec k;
  bool has_kernel = false;
  try {
    for (const auto& e : parse_entries(read_text_file(path))) {
      const std::string& key = e.key;
      if (key == "program") m.program = resolve(e.value);
      else if (key == "harts") m.harts = k.harts = static_cast<int>(parse_int(e, 1, 4096));
      else if (key == "max_steps") m.max_steps = static_cast<std::uint64_t>(parse_int(e, 1, INT64_MAX));
      else if (key == "quantum") m.quantum = static_cast<std::uint64_t>(parse_int(e, 1, INT64_MAX));
      else if (key == "cluster_config") m.cluster = load_cluster_config(resolve(e.value));
      else if (key == "latency_table") m.latency = load_latency_table(resolve(e.value));
      else if (key == "variant") {
        try {
          k.variant = parse_variant(e.value);
        } catch (const ConfigError& err) {
          throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
        }
        has_kernel = true;
      } else if (key == "n_tx") k.n_tx = static_cast<int>(parse_int(e, 1, 64));
      else if (key == "n_rx") k.n_rx = static_cast<int>(parse_int(e, 1, 64));
      else if (key == "batch") k.batch = static_cast<int>(parse_int(e, 1, 1 << 16));
      else if (key == "snr_db") m.snr_db = parse_double(e);
      else if (key == "seed") m.seed = static_cast<std::uint64_t>(parse_int(e, 0, INT64_MAX));
      else if (key == "out") m.out = resolve(e.value);
      else if (key == "workers") m.workers = static_cast<int>(parse_int(e, 1, 1024));
      else throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + key + "'");
    }
  } catch (const ConfigError& err) {
    throw ConfigError(path + ": " + err.what());
  }
  if (has_kernel) m.kernel = k;
  return m;
}

}  // namespace sdrsim::cli
