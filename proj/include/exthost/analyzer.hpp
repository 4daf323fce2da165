#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exthost/types.hpp"

namespace exthost {

/// Language features an extension may not use. Declared in the manifest's
/// feature_flags; any overlap rejects the extension.
enum class ForbiddenFeature : std::uint8_t {
  UnsafeCode,
  MemForget,
  ManuallyDrop,
  ForgetIntrinsic,
  StdLibrary,
  DynamicAllocation,
  FloatingPoint,
  Simd,
  AbortIntrinsic,
};

inline constexpr std::array<ForbiddenFeature, 9> kForbiddenFeatures = {
    ForbiddenFeature::UnsafeCode,      ForbiddenFeature::MemForget,
    ForbiddenFeature::ManuallyDrop,    ForbiddenFeature::ForgetIntrinsic,
    ForbiddenFeature::StdLibrary,      ForbiddenFeature::DynamicAllocation,
    ForbiddenFeature::FloatingPoint,   ForbiddenFeature::Simd,
    ForbiddenFeature::AbortIntrinsic,
};

std::string_view to_string(ForbiddenFeature f) noexcept;
std::optional<ForbiddenFeature> parse_forbidden_feature(std::string_view s) noexcept;

struct LintViolation {
  std::string feature;
  std::string reason;
  bool operator==(const LintViolation&) const = default;
};

struct LintReport {
  enum class Verdict { Accepted, Rejected };
  Verdict verdict = Verdict::Accepted;
  std::vector<LintViolation> violations;

  bool accepted() const noexcept { return verdict == Verdict::Accepted; }
  bool operator==(const LintReport&) const = default;
};

/// Pure. Violations are listed once each, in canonical feature order.
LintReport lint_manifest(const ExtensionManifest& manifest);

/// Returns the first node (in node order) whose frame exceeds the limit.
/// The limit is inclusive: a frame of exactly per_function_frame_limit passes.
std::optional<std::string> check_frame_limits(const CallGraph& cg, const HostConfig& cfg);

bool has_indirect_edges(const CallGraph& cg) noexcept;
bool has_cycle(const CallGraph& cg);

/// Longest entry-rooted path, summing frame_bytes. Throws Error(CyclicGraph)
/// or Error(IndirectEdge) when the graph has no static bound.
std::uint64_t compute_static_bound(const CallGraph& cg, std::string_view entry);

/// Functions not reachable from `entry`. They do not contribute to the bound.
std::vector<std::string> unreachable_functions(const CallGraph& cg, std::string_view entry);

/// Picks the stack-safety mode. Throws Error(FrameTooLarge) when a frame is
/// over the per-function limit and Error(BoundExceeded) when a statically
/// bounded graph needs more than the threshold.
StackMode classify_stack_mode(const CallGraph& cg, std::string_view entry, const HostConfig& cfg);

}  // namespace exthost
