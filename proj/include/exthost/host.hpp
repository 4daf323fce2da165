#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exthost/analyzer.hpp"
#include "exthost/context.hpp"
#include "exthost/maps.hpp"
#include "exthost/panic_log.hpp"
#include "exthost/resources.hpp"
#include "exthost/transmute.hpp"
#include "exthost/types.hpp"
#include "exthost/worker.hpp"

namespace exthost {

class Env;
class Host;
class Watchdogs;

/// The executable part of an extension: called with the helper environment
/// and the hook's context.
using EntryFn = std::function<Verdict(Env&, ProgramContext&)>;

class LintRejectedError : public Error {
 public:
  explicit LintRejectedError(LintReport report);
  const LintReport& report() const noexcept { return report_; }

 private:
  LintReport report_;
};

/// A loaded extension as the host tracks it.
class ExtensionRecord {
 public:
  enum class State : std::uint8_t { Active, Quarantined, Unloaded };

  const std::string& id() const noexcept { return manifest_.extension_id; }
  const ExtensionManifest& manifest() const noexcept { return manifest_; }
  ProgramKind kind() const noexcept { return manifest_.program_kind; }
  const StackMode& stack_mode() const noexcept { return stack_mode_; }
  bool runtime_checked() const noexcept { return runtime_checked_; }
  std::uint64_t entry_frame_bytes() const noexcept { return entry_frame_bytes_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  State state() const noexcept { return state_.load(std::memory_order_seq_cst); }
  std::uint64_t dispatch_count() const noexcept { return dispatches_.load(); }
  std::uint64_t panic_count() const noexcept { return panics_.load(); }

 private:
  friend class Host;
  friend class Env;
  friend class ExtensionHandle;

  ExtensionManifest manifest_;
  StackMode stack_mode_;
  bool runtime_checked_ = false;
  std::uint64_t entry_frame_bytes_ = 0;
  EntryFn entry_;
  std::vector<std::shared_ptr<Map>> maps_;  // declared order
  std::vector<std::string> warnings_;
  std::uint64_t load_seq_ = 0;

  std::atomic<State> state_{State::Active};
  std::atomic<int> active_{0};
  std::atomic<std::uint64_t> dispatches_{0};
  std::atomic<std::uint64_t> panics_{0};
};

/// What load_extension returns; the key to dispatch. A handle outliving its
/// extension is harmless: dispatching it fails with UnknownExtension.
class ExtensionHandle {
 public:
  ExtensionHandle() = default;

  const std::string& extension_id() const noexcept { return rec_->id(); }
  const StackMode& stack_mode() const noexcept { return rec_->stack_mode(); }
  std::vector<std::string> attached_maps() const;
  const ExtensionRecord& record() const noexcept { return *rec_; }
  bool valid() const noexcept { return rec_ && rec_->state() == ExtensionRecord::State::Active; }
  explicit operator bool() const noexcept { return rec_ != nullptr; }

 private:
  friend class Host;
  explicit ExtensionHandle(std::shared_ptr<ExtensionRecord> rec) : rec_(std::move(rec)) {}
  std::shared_ptr<ExtensionRecord> rec_;
};

struct DispatchOutcome {
  Verdict verdict;
  std::optional<PanicRecord> panic;  // set iff the dispatch panicked
  /// Extensions removed by the crash-stop that followed a panic.
  std::vector<std::string> removed;

  bool panicked() const noexcept { return panic.has_value(); }
};

struct UnloadEvent {
  std::string trigger;
  bool cascade = false;
  bool crash_stop = false;
  std::vector<std::string> removed;
  std::vector<std::string> maps_dropped;
};

/// The extension host: workers, the extension and map registries, host
/// objects, the panic ring and the watchdogs.
class Host {
 public:
  explicit Host(HostConfig cfg = {});
  ~Host();
  Host(const Host&) = delete;
  Host& operator=(const Host&) = delete;

  const HostConfig& config() const noexcept { return cfg_; }
  WorkerState& worker(unsigned id);
  unsigned num_workers() const noexcept { return cfg_.num_workers; }

  /// lint -> classify -> bind maps. Throws LintRejectedError, Error(FrameTooLarge),
  /// Error(BoundExceeded), Error(DuplicateId), Error(MapTypeMismatch), or
  /// Error(InvalidManifest).
  ExtensionHandle load_extension(const ExtensionManifest& manifest, EntryFn entry);

  /// Removes the extension (and with `cascade`, everything transitively
  /// sharing a map with it). Returns the removal set in removal order. Waits
  /// for in-flight dispatches of removed extensions to finish.
  std::vector<std::string> unload_extension(std::string_view extension_id, bool cascade);

  /// Runs an extension on a worker. Throws Error(WorkerBusy) or
  /// Error(UnknownExtension); panics come back as a DispatchOutcome.
  DispatchOutcome dispatch(unsigned worker_id, const ExtensionHandle& handle, ProgramContext& ctx);

  std::optional<ExtensionHandle> find_extension(std::string_view extension_id) const;
  std::vector<std::string> extension_ids() const;  // load order
  std::shared_ptr<Map> find_map(std::string_view map_id) const;
  std::vector<std::string> map_ids() const;
  std::vector<UnloadEvent> unload_events() const;

  // Host objects extensions can pin or lock. Creation is idempotent.
  SpinlockCell& create_spinlock(const std::string& lock_id);
  SpinlockCell& spinlock(std::string_view lock_id) const;  // Error(UnknownObject)
  RefCounted& create_object(const std::string& object_id);
  RefCounted& object(std::string_view object_id) const;  // Error(UnknownObject)
  StaticVar& register_static(const std::string& var_id);
  StaticVar& static_var(std::string_view var_id) const;  // Error(UnknownVar)

  TypeRegistry& types() noexcept { return types_; }
  const PanicLog& panic_log() const noexcept { return ring_; }

  /// Starts one periodic watchdog per worker. Error(AlreadyArmed).
  void arm_watchdogs();
  /// Stops them, waiting for in-flight ticks. Error(NotArmed).
  void disarm_watchdogs();
  bool watchdogs_armed() const noexcept;

 private:
  friend class Env;

  DispatchOutcome land(WorkerState& w, ExtensionRecord& rec);
  void finish_dispatch(WorkerState& w, ExtensionRecord& rec) noexcept;
  std::vector<std::string> unload_locked(std::string_view extension_id, bool cascade,
                                         bool crash_stop);

  HostConfig cfg_;
  std::vector<std::unique_ptr<WorkerState>> workers_;
  PanicLog ring_;
  TypeRegistry types_;

  mutable std::mutex registry_mu_;
  std::map<std::string, std::shared_ptr<ExtensionRecord>, std::less<>> extensions_;
  std::map<std::string, std::shared_ptr<Map>, std::less<>> maps_;
  std::vector<UnloadEvent> unload_events_;
  std::uint64_t load_seq_ = 0;

  mutable std::mutex objects_mu_;
  std::map<std::string, std::unique_ptr<SpinlockCell>, std::less<>> spinlocks_;
  std::map<std::string, std::unique_ptr<RefCounted>, std::less<>> objects_;
  std::map<std::string, std::unique_ptr<StaticVar>, std::less<>> statics_;

  std::unique_ptr<Watchdogs> watchdogs_;
};

}  // namespace exthost
