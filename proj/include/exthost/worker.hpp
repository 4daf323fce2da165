#pragma once

#include <pthread.h>

#include <array>
#include <atomic>
#include <csetjmp>
#include <cstdint>
#include <vector>

#include "exthost/cleanup.hpp"
#include "exthost/types.hpp"

namespace exthost {

class ExtensionRecord;

/// Who performed a flag write: the worker itself, the watchdog thread, or
/// the interruption handler running on the worker's thread.
enum class FlagWriter : std::uint8_t { Worker, Watchdog, Interrupt };

struct FlagTransition {
  ExecFlag from;
  ExecFlag to;
  FlagWriter writer;
};

/// The transitions the tristate protocol permits, plus dispatch entry
/// (Idle -> ExtensionCode) and dispatch exit (any -> Idle).
bool is_legal_transition(ExecFlag from, ExecFlag to, bool entering_panic) noexcept;

/// Fixed-capacity, async-signal-safe recorder of ExecFlag transitions. Off
/// unless enabled.
class FlagTrace {
 public:
  static constexpr std::size_t kCapacity = 1 << 14;

  void enable(bool on) noexcept { enabled_.store(on, std::memory_order_relaxed); }
  bool enabled() const noexcept { return enabled_.load(std::memory_order_relaxed); }
  void clear() noexcept { next_.store(0, std::memory_order_relaxed); }

  void record(ExecFlag from, ExecFlag to, bool entering_panic,
              FlagWriter writer = FlagWriter::Worker) noexcept {
    if (!enabled()) return;
    if (!is_legal_transition(from, to, entering_panic))
      illegal_.fetch_add(1, std::memory_order_relaxed);
    auto i = next_.fetch_add(1, std::memory_order_relaxed);
    if (i < kCapacity) slots_[i] = {from, to, writer};
  }

  std::vector<FlagTransition> snapshot() const;
  std::uint64_t illegal_count() const noexcept { return illegal_.load(); }

 private:
  std::atomic<bool> enabled_{false};
  std::atomic<std::size_t> next_{0};
  std::atomic<std::uint64_t> illegal_{0};
  std::array<FlagTransition, kCapacity> slots_{};
};

/// Counters written by the watchdog thread and by the interruption handler
/// running on the worker's own thread.
struct WatchdogCounters {
  std::atomic<std::uint64_t> ticks{0};
  std::atomic<std::uint64_t> unwind_requests{0};
  std::atomic<std::uint64_t> forced_unwinds{0};  // delivered by the handler
  std::atomic<std::uint64_t> deferred{0};
};

/// Per-worker execution state (one simulated CPU).
///
/// Owned by the worker lane. exec_flag, prog_start_ns, current and generation
/// are also accessed by the watchdog with acquire/release ordering; all other
/// fields are touched only by the thread running the dispatch.
class WorkerState {
 public:
  WorkerState(unsigned id, std::size_t stack_total_bytes, std::size_t stack_threshold_bytes)
      : worker_id(id),
        stack_total_bytes(stack_total_bytes),
        stack_threshold_bytes(stack_threshold_bytes) {}

  WorkerState(const WorkerState&) = delete;
  WorkerState& operator=(const WorkerState&) = delete;

  ExecFlag flag() const noexcept { return exec_flag.load(std::memory_order_acquire); }
  bool busy() const noexcept { return current.load(std::memory_order_acquire) != nullptr; }
  const ExtensionRecord* current_extension() const noexcept {
    return current.load(std::memory_order_acquire);
  }

  /// Sets the flag and records the transition. Single transitions only; the
  /// cross-thread 2 -> 3 step uses compare_exchange in the watchdog.
  void set_flag(ExecFlag to, bool entering_panic = false) noexcept {
    auto from = exec_flag.exchange(to, std::memory_order_acq_rel);
    trace.record(from, to, entering_panic);
  }

  const unsigned worker_id;
  const std::size_t stack_total_bytes;
  const std::size_t stack_threshold_bytes;

  // Shared with the watchdog.
  std::atomic<ExecFlag> exec_flag{ExecFlag::Idle};
  std::atomic<std::int64_t> prog_start_ns{0};
  std::atomic<const ExtensionRecord*> current{nullptr};
  std::atomic<std::uint64_t> generation{0};
  std::atomic<bool> panicking{false};
  std::atomic<pthread_t> thread{};
  std::atomic<bool> signalling{false};
  std::atomic<std::uint64_t> unwind_generation{0};

  // Lane-local.
  sigjmp_buf saved_context{};
  bool lock_held = false;
  std::size_t shadow_stack_usage = 0;
  std::size_t shadow_stack_high_water = 0;
  CleanupRegistry cleanup_registry;

  // Pending panic, filled in before control reaches the landing pad. Fixed
  // storage so that the signal path does not allocate.
  PanicReason pending_reason = PanicReason::ExplicitPanic;
  std::array<char, 160> pending_message{};

  FlagTrace trace;
  WatchdogCounters watchdog;
};

}  // namespace exthost
