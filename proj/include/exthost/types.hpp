#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace exthost {

using Nanos = std::chrono::nanoseconds;

/// Monotonic nanoseconds. The only clock the runtime consults.
inline std::int64_t monotonic_ns() noexcept {
  return std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

enum class ErrorCode {
  InvalidConfig,
  InvalidManifest,
  LintRejected,
  FrameTooLarge,
  BoundExceeded,
  CyclicGraph,
  IndirectEdge,
  DuplicateId,
  MapTypeMismatch,
  UnknownExtension,
  WorkerBusy,
  UnknownVar,
  UnknownObject,
  AlreadyArmed,
  NotArmed,
  IllegalFlagTransition,
  PopMismatch,
  InvalidDescriptor,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct HostConfig {
  unsigned num_workers = 1;
  std::size_t page_size = 4096;
  std::size_t stack_total_pages = 8;
  std::size_t stack_threshold_pages = 4;
  std::size_t per_function_frame_limit = 4096;
  Nanos watchdog_period = std::chrono::milliseconds(50);
  Nanos termination_timeout = std::chrono::milliseconds(100);
  /// Retained panic records; older ones are overwritten (the total count is kept).
  std::size_t ring_capacity = 1 << 15;
  /// Seed for hash-map bucket hashing.
  std::uint32_t map_hash_seed = 0;

  std::size_t stack_threshold_bytes() const noexcept { return stack_threshold_pages * page_size; }
  std::size_t stack_total_bytes() const noexcept { return stack_total_pages * page_size; }

  /// Throws Error(InvalidConfig) when an invariant does not hold.
  void validate() const;
};

enum class ProgramKind { PacketIngress, TraceEvent };

std::string_view to_string(ProgramKind kind) noexcept;
std::optional<ProgramKind> parse_program_kind(std::string_view s) noexcept;

struct CallNode {
  std::string function_id;
  std::uint64_t frame_bytes = 0;
  bool calls_helper = false;

  bool operator==(const CallNode&) const = default;
};

enum class EdgeKind { Direct, Indirect };

struct CallEdge {
  std::string caller;
  // A direct edge has exactly one callee. An indirect edge lists its possible
  // targets; an empty list marks an unknown target.
  std::vector<std::string> callees;
  EdgeKind kind = EdgeKind::Direct;

  bool operator==(const CallEdge&) const = default;
};

struct CallGraph {
  std::vector<CallNode> nodes;
  std::vector<CallEdge> edges;

  const CallNode* find(std::string_view function_id) const noexcept;
  bool operator==(const CallGraph&) const = default;
};

enum class MapKind { Array, Hash, PerWorker };

std::string_view to_string(MapKind kind) noexcept;
std::optional<MapKind> parse_map_kind(std::string_view s) noexcept;

struct MapSpec {
  std::string map_id;
  MapKind kind = MapKind::Array;
  std::uint32_t key_bytes = 4;
  std::uint32_t value_bytes = 0;
  std::uint32_t max_entries = 1;

  /// Throws Error(InvalidManifest) on a malformed spec.
  void validate() const;
  bool operator==(const MapSpec&) const = default;
};

inline constexpr std::size_t kMaxExtensionIdLength = 64;

struct ExtensionManifest {
  std::string extension_id;
  ProgramKind program_kind = ProgramKind::PacketIngress;
  std::set<std::string> feature_flags;
  CallGraph callgraph;
  std::vector<MapSpec> declared_maps;
  std::string entry_symbol;

  /// Structural checks: nonempty id, entry present, edges name existing nodes.
  void validate() const;
  bool operator==(const ExtensionManifest&) const = default;
};

struct StaticallyBounded {
  std::uint64_t total_bytes = 0;
  bool operator==(const StaticallyBounded&) const = default;
};
struct RuntimeChecked {
  bool operator==(const RuntimeChecked&) const = default;
};
using StackMode = std::variant<StaticallyBounded, RuntimeChecked>;

inline bool is_runtime_checked(const StackMode& m) noexcept {
  return std::holds_alternative<RuntimeChecked>(m);
}

/// Per-worker tristate flag plus the idle value used between dispatches.
enum class ExecFlag : std::uint8_t {
  Idle = 0,
  ExtensionCode = 1,
  HelperOrPanic = 2,
  TerminationRequested = 3,
};

std::string_view to_string(ExecFlag f) noexcept;

enum class XdpAction : std::int64_t { Drop = 1, Pass = 2, Tx = 3 };

class Verdict {
 public:
  constexpr Verdict() = default;
  constexpr explicit Verdict(std::int64_t raw) : raw_(raw) {}

  static constexpr Verdict pass() { return Verdict(static_cast<std::int64_t>(XdpAction::Pass)); }
  static constexpr Verdict drop() { return Verdict(static_cast<std::int64_t>(XdpAction::Drop)); }
  static constexpr Verdict tx() { return Verdict(static_cast<std::int64_t>(XdpAction::Tx)); }

  /// The code returned to the hook after a panic.
  static constexpr Verdict panicked_default(ProgramKind kind) {
    return kind == ProgramKind::PacketIngress ? drop() : Verdict(-1);
  }

  constexpr std::int64_t raw() const { return raw_; }
  constexpr bool operator==(const Verdict&) const = default;

 private:
  std::int64_t raw_ = 0;
};

enum class PanicReason : std::uint8_t {
  OutOfBounds,
  StackOverflowCheck,
  DoubleLock,
  Terminated,
  ExplicitPanic,
  TransmuteViolation,
};

std::string_view to_string(PanicReason r) noexcept;
std::optional<PanicReason> parse_panic_reason(std::string_view s) noexcept;

struct PanicRecord {
  std::string extension_id;
  unsigned worker_id = 0;
  PanicReason reason = PanicReason::ExplicitPanic;
  std::string message;
  std::int64_t timestamp_ns = 0;

  /// `ts=<ns> worker=<id> ext=<id> reason=<enum> msg=<string>`
  std::string to_log_line() const;
  static std::optional<PanicRecord> parse_log_line(std::string_view line);
  bool operator==(const PanicRecord&) const = default;
};

/// Raised when a safety check fails outside of any dispatch, i.e. when
/// framework primitives are used directly by host-side code.
class PanicError : public std::runtime_error {
 public:
  PanicError(PanicReason reason, const std::string& msg)
      : std::runtime_error(msg), reason_(reason) {}
  PanicReason reason() const noexcept { return reason_; }

 private:
  PanicReason reason_;
};

}  // namespace exthost
