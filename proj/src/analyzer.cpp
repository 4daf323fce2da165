#include "exthost/analyzer.hpp"

#include <algorithm>
#include <unordered_map>

namespace exthost {

std::string_view to_string(ForbiddenFeature f) noexcept {
  switch (f) {
    case ForbiddenFeature::UnsafeCode: return "unsafe-code";
    case ForbiddenFeature::MemForget: return "mem-forget";
    case ForbiddenFeature::ManuallyDrop: return "manually-drop";
    case ForbiddenFeature::ForgetIntrinsic: return "forget-intrinsic";
    case ForbiddenFeature::StdLibrary: return "std-library";
    case ForbiddenFeature::DynamicAllocation: return "dynamic-allocation";
    case ForbiddenFeature::FloatingPoint: return "floating-point";
    case ForbiddenFeature::Simd: return "simd";
    case ForbiddenFeature::AbortIntrinsic: return "abort-intrinsic";
  }
  return "?";
}

std::optional<ForbiddenFeature> parse_forbidden_feature(std::string_view s) noexcept {
  for (auto f : kForbiddenFeatures)
    if (to_string(f) == s) return f;
  return std::nullopt;
}

namespace {

std::string_view reason_for(ForbiddenFeature f) {
  switch (f) {
    case ForbiddenFeature::UnsafeCode: return "unsafe code is not allowed in extensions";
    case ForbiddenFeature::MemForget:
    case ForbiddenFeature::ManuallyDrop:
    case ForbiddenFeature::ForgetIntrinsic:
      return "leaking a resource guard defeats cleanup";
    case ForbiddenFeature::StdLibrary: return "only the core library is available";
    case ForbiddenFeature::DynamicAllocation: return "extensions may not allocate";
    case ForbiddenFeature::FloatingPoint:
    case ForbiddenFeature::Simd:
      return "FPU/SIMD state is not preserved in the host context";
    case ForbiddenFeature::AbortIntrinsic: return "aborting would take down the host";
  }
  return "";
}

// Adjacency by node index. Only meaningful when all edges are direct.
struct IndexedGraph {
  std::unordered_map<std::string_view, std::size_t> index;
  std::vector<std::vector<std::size_t>> out;

  explicit IndexedGraph(const CallGraph& cg) : out(cg.nodes.size()) {
    for (std::size_t i = 0; i < cg.nodes.size(); ++i) index.emplace(cg.nodes[i].function_id, i);
    for (const auto& e : cg.edges) {
      auto from = index.find(e.caller);
      if (from == index.end()) continue;
      for (const auto& c : e.callees) {
        auto to = index.find(c);
        if (to != index.end()) out[from->second].push_back(to->second);
      }
    }
  }

  std::size_t at(std::string_view id) const {
    auto it = index.find(id);
    if (it == index.end())
      throw Error(ErrorCode::InvalidManifest, "unknown function '" + std::string(id) + "'");
    return it->second;
  }
};

}  // namespace

LintReport lint_manifest(const ExtensionManifest& manifest) {
  LintReport report;
  for (auto f : kForbiddenFeatures) {
    if (manifest.feature_flags.contains(std::string(to_string(f))))
      report.violations.push_back({std::string(to_string(f)), std::string(reason_for(f))});
  }
  if (!report.violations.empty()) report.verdict = LintReport::Verdict::Rejected;
  return report;
}

std::optional<std::string> check_frame_limits(const CallGraph& cg, const HostConfig& cfg) {
  for (const auto& n : cg.nodes)
    if (n.frame_bytes > cfg.per_function_frame_limit) return n.function_id;
  return std::nullopt;
}

bool has_indirect_edges(const CallGraph& cg) noexcept {
  return std::any_of(cg.edges.begin(), cg.edges.end(),
                     [](const CallEdge& e) { return e.kind == EdgeKind::Indirect; });
}

bool has_cycle(const CallGraph& cg) {
  IndexedGraph g(cg);
  // Iterative three-colour DFS.
  enum : std::uint8_t { White, Grey, Black };
  std::vector<std::uint8_t> colour(cg.nodes.size(), White);
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t root = 0; root < cg.nodes.size(); ++root) {
    if (colour[root] != White) continue;
    stack.emplace_back(root, 0);
    colour[root] = Grey;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < g.out[node].size()) {
        std::size_t succ = g.out[node][next++];
        if (colour[succ] == Grey) return true;
        if (colour[succ] == White) {
          colour[succ] = Grey;
          stack.emplace_back(succ, 0);
        }
      } else {
        colour[node] = Black;
        stack.pop_back();
      }
    }
  }
  return false;
}

std::uint64_t compute_static_bound(const CallGraph& cg, std::string_view entry) {
  if (has_indirect_edges(cg))
    throw Error(ErrorCode::IndirectEdge, "callgraph has indirect calls; no static bound");
  if (has_cycle(cg)) throw Error(ErrorCode::CyclicGraph, "callgraph is recursive; no static bound");

  IndexedGraph g(cg);
  const std::size_t root = g.at(entry);
  // Memoised longest path over the DAG, computed in post-order.
  std::vector<std::optional<std::uint64_t>> best(cg.nodes.size());
  std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < g.out[node].size()) {
      std::size_t succ = g.out[node][next++];
      if (!best[succ]) stack.emplace_back(succ, 0);
      continue;
    }
    std::uint64_t deepest = 0;
    for (auto succ : g.out[node]) deepest = std::max(deepest, *best[succ]);
    best[node] = cg.nodes[node].frame_bytes + deepest;
    stack.pop_back();
  }
  return *best[root];
}

std::vector<std::string> unreachable_functions(const CallGraph& cg, std::string_view entry) {
  IndexedGraph g(cg);
  std::vector<bool> seen(cg.nodes.size(), false);
  std::vector<std::size_t> work{g.at(entry)};
  seen[work.back()] = true;
  while (!work.empty()) {
    auto n = work.back();
    work.pop_back();
    for (auto s : g.out[n])
      if (!seen[s]) {
        seen[s] = true;
        work.push_back(s);
      }
  }
  std::vector<std::string> result;
  for (std::size_t i = 0; i < cg.nodes.size(); ++i)
    if (!seen[i]) result.push_back(cg.nodes[i].function_id);
  return result;
}

StackMode classify_stack_mode(const CallGraph& cg, std::string_view entry, const HostConfig& cfg) {
  if (auto offender = check_frame_limits(cg, cfg))
    throw Error(ErrorCode::FrameTooLarge, "function '" + *offender + "' frame exceeds " +
                                              std::to_string(cfg.per_function_frame_limit) +
                                              " bytes");
  if (has_indirect_edges(cg) || has_cycle(cg)) return RuntimeChecked{};
  const auto total = compute_static_bound(cg, entry);
  if (total > cfg.stack_threshold_bytes())
    throw Error(ErrorCode::BoundExceeded, "static stack bound " + std::to_string(total) +
                                              " exceeds threshold " +
                                              std::to_string(cfg.stack_threshold_bytes()));
  return StaticallyBounded{total};
}

}  // namespace exthost
