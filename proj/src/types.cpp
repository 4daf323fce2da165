#include "exthost/types.hpp"

#include <charconv>
#include <unordered_set>

namespace exthost {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::LintRejected: return "LintRejected";
    case ErrorCode::FrameTooLarge: return "FrameTooLarge";
    case ErrorCode::BoundExceeded: return "BoundExceeded";
    case ErrorCode::CyclicGraph: return "CyclicGraph";
    case ErrorCode::IndirectEdge: return "IndirectEdge";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MapTypeMismatch: return "MapTypeMismatch";
    case ErrorCode::UnknownExtension: return "UnknownExtension";
    case ErrorCode::WorkerBusy: return "WorkerBusy";
    case ErrorCode::UnknownVar: return "UnknownVar";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::AlreadyArmed: return "AlreadyArmed";
    case ErrorCode::NotArmed: return "NotArmed";
    case ErrorCode::IllegalFlagTransition: return "IllegalFlagTransition";
    case ErrorCode::PopMismatch: return "PopMismatch";
    case ErrorCode::InvalidDescriptor: return "InvalidDescriptor";
  }
  return "?";
}

void HostConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (num_workers == 0) fail("num_workers must be positive");
  if (page_size == 0) fail("page_size must be positive");
  if (stack_threshold_pages >= stack_total_pages)
    fail("stack_threshold_pages must be below stack_total_pages");
  if (per_function_frame_limit > page_size) fail("per_function_frame_limit exceeds page_size");
  if (watchdog_period <= Nanos::zero()) fail("watchdog_period must be positive");
  if (termination_timeout < watchdog_period) fail("termination_timeout below watchdog_period");
  if (ring_capacity == 0) fail("ring_capacity must be positive");
}

std::string_view to_string(ProgramKind kind) noexcept {
  return kind == ProgramKind::PacketIngress ? "packet-ingress" : "trace-event";
}

std::optional<ProgramKind> parse_program_kind(std::string_view s) noexcept {
  if (s == "packet-ingress") return ProgramKind::PacketIngress;
  if (s == "trace-event") return ProgramKind::TraceEvent;
  return std::nullopt;
}

const CallNode* CallGraph::find(std::string_view function_id) const noexcept {
  for (const auto& n : nodes)
    if (n.function_id == function_id) return &n;
  return nullptr;
}

std::string_view to_string(MapKind kind) noexcept {
  switch (kind) {
    case MapKind::Array: return "array";
    case MapKind::Hash: return "hash";
    case MapKind::PerWorker: return "per-worker";
  }
  return "?";
}

std::optional<MapKind> parse_map_kind(std::string_view s) noexcept {
  if (s == "array") return MapKind::Array;
  if (s == "hash") return MapKind::Hash;
  if (s == "per-worker") return MapKind::PerWorker;
  return std::nullopt;
}

void MapSpec::validate() const {
  auto fail = [this](const std::string& what) {
    throw Error(ErrorCode::InvalidManifest, "map '" + map_id + "': " + what);
  };
  if (map_id.empty()) throw Error(ErrorCode::InvalidManifest, "map with empty map_id");
  if (max_entries < 1) fail("max_entries must be at least 1");
  if (value_bytes == 0) fail("value_bytes must be positive");
  if (key_bytes == 0) fail("key_bytes must be positive");
  // Per-worker maps are indexed like arrays.
  if ((kind == MapKind::Array || kind == MapKind::PerWorker) && key_bytes != 4)
    fail("array maps use 4-byte index keys");
}

void ExtensionManifest::validate() const {
  auto fail = [this](const std::string& what) {
    throw Error(ErrorCode::InvalidManifest, "manifest '" + extension_id + "': " + what);
  };
  if (extension_id.empty()) throw Error(ErrorCode::InvalidManifest, "empty extension_id");
  if (extension_id.size() > kMaxExtensionIdLength) fail("extension_id too long");
  for (char c : extension_id)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '=')
      fail("extension_id may not contain whitespace or '='");
  std::unordered_set<std::string_view> ids;
  for (const auto& n : callgraph.nodes) {
    if (n.function_id.empty()) fail("callgraph node with empty function_id");
    if (!ids.insert(n.function_id).second) fail("duplicate function '" + n.function_id + "'");
  }
  if (!ids.contains(entry_symbol)) fail("entry_symbol '" + entry_symbol + "' not in callgraph");
  for (const auto& e : callgraph.edges) {
    if (!ids.contains(e.caller)) fail("edge caller '" + e.caller + "' unknown");
    if (e.kind == EdgeKind::Direct && e.callees.size() != 1)
      fail("direct edge from '" + e.caller + "' must name exactly one callee");
    for (const auto& c : e.callees)
      if (!ids.contains(c)) fail("edge callee '" + c + "' unknown");
  }
  std::unordered_set<std::string_view> map_ids;
  for (const auto& m : declared_maps) {
    m.validate();
    if (!map_ids.insert(m.map_id).second) fail("map '" + m.map_id + "' declared twice");
  }
}

std::string_view to_string(ExecFlag f) noexcept {
  switch (f) {
    case ExecFlag::Idle: return "Idle";
    case ExecFlag::ExtensionCode: return "ExtensionCode";
    case ExecFlag::HelperOrPanic: return "HelperOrPanic";
    case ExecFlag::TerminationRequested: return "TerminationRequested";
  }
  return "?";
}

std::string_view to_string(PanicReason r) noexcept {
  switch (r) {
    case PanicReason::OutOfBounds: return "OutOfBounds";
    case PanicReason::StackOverflowCheck: return "StackOverflowCheck";
    case PanicReason::DoubleLock: return "DoubleLock";
    case PanicReason::Terminated: return "Terminated";
    case PanicReason::ExplicitPanic: return "ExplicitPanic";
    case PanicReason::TransmuteViolation: return "TransmuteViolation";
  }
  return "?";
}

std::optional<PanicReason> parse_panic_reason(std::string_view s) noexcept {
  for (auto r : {PanicReason::OutOfBounds, PanicReason::StackOverflowCheck, PanicReason::DoubleLock,
                 PanicReason::Terminated, PanicReason::ExplicitPanic,
                 PanicReason::TransmuteViolation})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

std::string PanicRecord::to_log_line() const {
  std::string line;
  line.reserve(64 + extension_id.size() + message.size());
  line += "ts=";
  line += std::to_string(timestamp_ns);
  line += " worker=";
  line += std::to_string(worker_id);
  line += " ext=";
  line += extension_id;
  line += " reason=";
  line += to_string(reason);
  line += " msg=";
  line += message;
  return line;
}

namespace {

// Consumes "<key>=<value>" up to the next space; returns the value.
std::optional<std::string_view> take_field(std::string_view& rest, std::string_view key) {
  if (!rest.starts_with(key) || rest.size() <= key.size() || rest[key.size()] != '=')
    return std::nullopt;
  rest.remove_prefix(key.size() + 1);
  auto sp = rest.find(' ');
  auto value = rest.substr(0, sp);
  rest.remove_prefix(sp == std::string_view::npos ? rest.size() : sp + 1);
  return value;
}

template <class T>
bool parse_int(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

std::optional<PanicRecord> PanicRecord::parse_log_line(std::string_view line) {
  PanicRecord r;
  auto ts = take_field(line, "ts");
  auto worker = take_field(line, "worker");
  auto ext = take_field(line, "ext");
  auto reason = take_field(line, "reason");
  if (!ts || !worker || !ext || !reason || !line.starts_with("msg=")) return std::nullopt;
  if (!parse_int(*ts, r.timestamp_ns) || !parse_int(*worker, r.worker_id)) return std::nullopt;
  auto parsed = parse_panic_reason(*reason);
  if (!parsed) return std::nullopt;
  r.extension_id = std::string(*ext);
  r.reason = *parsed;
  r.message = std::string(line.substr(4));
  return r;
}

}  // namespace exthost
