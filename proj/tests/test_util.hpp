#pragma once

#include <string>
#include <vector>

#include "exthost/host.hpp"

namespace exthost::testing {

/// One-function extension with the given entry frame.
inline ExtensionManifest simple_manifest(std::string id, std::vector<MapSpec> maps = {},
                                         std::uint64_t frame = 64,
                                         ProgramKind kind = ProgramKind::PacketIngress) {
  ExtensionManifest m;
  m.extension_id = std::move(id);
  m.program_kind = kind;
  m.entry_symbol = "main";
  m.callgraph.nodes.push_back({"main", frame, true});
  m.declared_maps = std::move(maps);
  return m;
}

/// Entry that calls itself: classified RuntimeChecked.
inline ExtensionManifest recursive_manifest(std::string id, std::uint64_t frame) {
  auto m = simple_manifest(std::move(id), {}, frame);
  m.callgraph.edges.push_back({"main", {"main"}, EdgeKind::Direct});
  return m;
}

inline MapSpec array_spec(std::string id, std::uint32_t value_bytes = 8, std::uint32_t entries = 16) {
  return {std::move(id), MapKind::Array, 4, value_bytes, entries};
}

inline MapSpec hash_spec(std::string id, std::uint32_t key_bytes = 8, std::uint32_t value_bytes = 8,
                         std::uint32_t entries = 16) {
  return {std::move(id), MapKind::Hash, key_bytes, value_bytes, entries};
}

inline HostConfig fast_config(unsigned workers = 1) {
  HostConfig c;
  c.num_workers = workers;
  c.watchdog_period = std::chrono::milliseconds(5);
  c.termination_timeout = std::chrono::milliseconds(10);
  return c;
}

}  // namespace exthost::testing
