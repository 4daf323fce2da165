#pragma once

#include <string_view>

#include "exthost/types.hpp"
#include "exthost/worker.hpp"

namespace exthost {

/// The worker whose dispatch is running on this thread, if any.
WorkerState* current_worker() noexcept;

/// Diverts the worker to its landing pad: flags the panic, stores the reason,
/// and restores the context saved at dispatch entry. The landing pad then
/// drains the cleanup registry, logs the record and produces the default
/// verdict. Never takes locks, never allocates.
[[noreturn]] void panic_path(WorkerState& w, PanicReason reason, std::string_view message) noexcept;

/// ExtensionCode -> HelperOrPanic. Error(IllegalFlagTransition) from any
/// other state.
ExecFlag helper_enter(WorkerState& w);

/// HelperOrPanic -> ExtensionCode, or the panic path (Terminated) if the
/// watchdog requested termination while the helper ran.
void helper_exit(WorkerState& w);

/// Shadow-stack check before an extension-level call. Panics with
/// StackOverflowCheck if the call would take usage past the threshold
/// (inclusive: landing exactly on the threshold is fine).
void check_stack(WorkerState& w, std::size_t next_frame_bytes);

/// Undo of check_stack when the callee returns.
inline void stack_return(WorkerState& w, std::size_t frame_bytes) noexcept {
  w.shadow_stack_usage -= frame_bytes;
}

/// Wraps a helper body with helper_enter / helper_exit.
class HelperScope {
 public:
  explicit HelperScope(WorkerState& w) : w_(w) { helper_enter(w_); }
  ~HelperScope() noexcept(false) { helper_exit(w_); }
  HelperScope(const HelperScope&) = delete;
  HelperScope& operator=(const HelperScope&) = delete;

 private:
  WorkerState& w_;
};

/// The real-time signal used to interrupt a worker thread.
int interrupt_signal() noexcept;

/// Installs the process-wide interruption handler (idempotent).
void install_interrupt_handler();

}  // namespace exthost
