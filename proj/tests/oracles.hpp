#pragma once

// Test-side reference implementations, written independently of the library.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "exthost/types.hpp"

namespace exthost::testing {

/// Max frame sum over every entry-rooted path, by plain enumeration.
inline std::uint64_t enumerate_max_path(const CallGraph& cg, const std::string& node) {
  std::uint64_t frame = cg.find(node)->frame_bytes;
  std::uint64_t best = 0;
  for (const auto& e : cg.edges)
    if (e.caller == node)
      for (const auto& c : e.callees) best = std::max(best, enumerate_max_path(cg, c));
  return frame + best;
}

/// Cycle check by trying to reach each node from itself.
inline bool brute_force_has_cycle(const CallGraph& cg) {
  for (const auto& start : cg.nodes) {
    std::set<std::string> seen;
    std::vector<std::string> stack{start.function_id};
    bool first = true;
    while (!stack.empty()) {
      auto n = stack.back();
      stack.pop_back();
      if (!first && n == start.function_id) return true;
      first = false;
      if (!seen.insert(n).second) continue;
      for (const auto& e : cg.edges)
        if (e.caller == n)
          for (const auto& c : e.callees) stack.push_back(c);
    }
  }
  return false;
}

struct RandomGraph {
  CallGraph cg;
  bool dag = true;
  bool indirect = false;
};

/// Random callgraph with n nodes. Edges go from lower to higher index unless
/// `allow_back` adds a backward edge; `allow_indirect` may add an indirect edge.
inline RandomGraph random_callgraph(std::mt19937_64& rng, int n, bool allow_back, bool allow_indirect) {
  RandomGraph g;
  std::uniform_int_distribution<std::uint64_t> frame(0, 4096);
  for (int i = 0; i < n; ++i) g.cg.nodes.push_back({"f" + std::to_string(i), frame(rng), false});
  std::bernoulli_distribution edge(0.3);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (edge(rng)) g.cg.edges.push_back({"f" + std::to_string(i), {"f" + std::to_string(j)}, EdgeKind::Direct});
  if (allow_back && n > 0) {
    std::uniform_int_distribution<int> pick(0, n - 1);
    int a = pick(rng), b = pick(rng);
    if (a < b) std::swap(a, b);
    g.cg.edges.push_back({"f" + std::to_string(a), {"f" + std::to_string(b)}, EdgeKind::Direct});
    g.dag = false;
  }
  if (allow_indirect && n > 0) {
    std::uniform_int_distribution<int> pick(0, n - 1);
    int a = pick(rng);
    std::vector<std::string> targets;
    if (std::bernoulli_distribution(0.5)(rng)) targets.push_back("f" + std::to_string(pick(rng)));
    g.cg.edges.push_back({"f" + std::to_string(a), targets, EdgeKind::Indirect});
    g.indirect = true;
  }
  return g;
}

/// Connected component of `start` in the extension-map bipartite graph.
inline std::set<std::string> sharing_component(
    const std::map<std::string, std::vector<std::string>>& ext_maps, const std::string& start) {
  std::set<std::string> exts{start};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [e, maps] : ext_maps) {
      if (exts.count(e)) continue;
      for (const auto& in : exts) {
        const auto& theirs = ext_maps.at(in);
        if (std::any_of(maps.begin(), maps.end(), [&](const std::string& m) {
              return std::find(theirs.begin(), theirs.end(), m) != theirs.end();
            })) {
          exts.insert(e);
          grew = true;
          break;
        }
      }
    }
  }
  return exts;
}

}  // namespace exthost::testing
