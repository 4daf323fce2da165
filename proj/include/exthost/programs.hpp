#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "exthost/host.hpp"

// Built-in extension bodies, looked up by a manifest's entry_symbol. The host
// CLI uses these since extensions are compiled into the host.
namespace exthost::programs {

/// EntryFn for `symbol`, or nullptr if there is none.
///   pass, drop, tx         return that verdict
///   count                  increments u64 slot 0 of declared map 0
///   oob                    reads one byte past the packet
///   double_lock            takes lock "demo.lock" twice
///   recurse                recursion of ctx.args[0] levels (0 = unbounded),
///                          using the entry node's frame size
///   spin                   loops forever without helper calls
///   bmc_ingress, bmc_ingress_faulty, bmc_egress   the cache programs with
///                          the default cache geometry
EntryFn lookup(Host& host, const ExtensionManifest& manifest);
std::vector<std::string> symbols();

}  // namespace exthost::programs
