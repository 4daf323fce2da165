#include "exthost/dispatcher.hpp"

#include <csignal>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <cerrno>
#include <mutex>

#include "exthost/panic.hpp"

namespace exthost {

namespace detail {
// Set for the duration of a dispatch on this thread.
thread_local WorkerState* tls_worker = nullptr;
}  // namespace detail

WorkerState* current_worker() noexcept { return detail::tls_worker; }

namespace {

void store_message(WorkerState& w, std::string_view msg) noexcept {
  auto n = std::min(msg.size(), w.pending_message.size() - 1);
  std::memcpy(w.pending_message.data(), msg.data(), n);
  w.pending_message[n] = '\0';
}

constexpr std::string_view kTerminatedMsg = "runtime exceeded termination timeout";

// Runs on the interrupted worker thread. Only atomics, memcpy and siglongjmp.
void on_interrupt(int) {
  const int saved_errno = errno;
  WorkerState* w = detail::tls_worker;
  if (w != nullptr && w->current.load(std::memory_order_acquire) != nullptr &&
      !w->panicking.load(std::memory_order_acquire) &&
      w->unwind_generation.load(std::memory_order_acquire) ==
          w->generation.load(std::memory_order_acquire)) {
    auto expected = ExecFlag::ExtensionCode;
    if (w->exec_flag.compare_exchange_strong(expected, ExecFlag::HelperOrPanic,
                                             std::memory_order_acq_rel)) {
      w->trace.record(ExecFlag::ExtensionCode, ExecFlag::HelperOrPanic, true, FlagWriter::Interrupt);
      w->panicking.store(true, std::memory_order_release);
      w->pending_reason = PanicReason::Terminated;
      store_message(*w, kTerminatedMsg);
      w->watchdog.forced_unwinds.fetch_add(1, std::memory_order_relaxed);
      errno = saved_errno;
      siglongjmp(w->saved_context, 1);
    }
    // The worker entered a helper after the request went out: defer.
    if (expected == ExecFlag::HelperOrPanic &&
        w->exec_flag.compare_exchange_strong(expected, ExecFlag::TerminationRequested,
                                             std::memory_order_acq_rel)) {
      w->trace.record(ExecFlag::HelperOrPanic, ExecFlag::TerminationRequested, false,
                      FlagWriter::Interrupt);
      w->watchdog.deferred.fetch_add(1, std::memory_order_relaxed);
    }
  }
  errno = saved_errno;
}

}  // namespace

int interrupt_signal() noexcept { return SIGRTMIN + 2; }

void install_interrupt_handler() {
  static std::once_flag once;
  std::call_once(once, [] {
    struct sigaction sa {};
    sa.sa_handler = on_interrupt;
    sigemptyset(&sa.sa_mask);
    // NODEFER: leaving the handler by siglongjmp must not leave the signal
    // blocked, and sigsetjmp does not save the mask on the hot path.
    sa.sa_flags = SA_RESTART | SA_NODEFER;
    if (sigaction(interrupt_signal(), &sa, nullptr) != 0)
      throw Error(ErrorCode::InvalidConfig, "cannot install interrupt handler");
  });
}

void panic_path(WorkerState& w, PanicReason reason, std::string_view message) noexcept {
  if (w.panicking.exchange(true, std::memory_order_acq_rel)) {
    // A failure while already unwinding is a framework bug.
    std::fputs("exthost: panic raised inside the panic path\n", stderr);
    std::abort();
  }
  w.set_flag(ExecFlag::HelperOrPanic, true);
  w.pending_reason = reason;
  store_message(w, message);
  siglongjmp(w.saved_context, 1);
}

void raise_panic(PanicReason reason, const char* fmt, ...) {
  char buf[160];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  if (WorkerState* w = detail::tls_worker) panic_path(*w, reason, buf);
  throw PanicError(reason, buf);
}

ExecFlag helper_enter(WorkerState& w) {
  auto expected = ExecFlag::ExtensionCode;
  if (!w.exec_flag.compare_exchange_strong(expected, ExecFlag::HelperOrPanic,
                                           std::memory_order_acq_rel))
    throw Error(ErrorCode::IllegalFlagTransition,
                "helper entered with flag " + std::string(to_string(expected)));
  w.trace.record(ExecFlag::ExtensionCode, ExecFlag::HelperOrPanic, false);
  return ExecFlag::ExtensionCode;
}

void helper_exit(WorkerState& w) {
  auto expected = ExecFlag::HelperOrPanic;
  if (w.exec_flag.compare_exchange_strong(expected, ExecFlag::ExtensionCode,
                                          std::memory_order_acq_rel)) {
    w.trace.record(ExecFlag::HelperOrPanic, ExecFlag::ExtensionCode, false);
    return;
  }
  if (expected == ExecFlag::TerminationRequested)
    panic_path(w, PanicReason::Terminated, "terminated at helper exit after timeout");
  throw Error(ErrorCode::IllegalFlagTransition,
              "helper exited with flag " + std::string(to_string(expected)));
}

void check_stack(WorkerState& w, std::size_t next_frame_bytes) {
  const auto after = w.shadow_stack_usage + next_frame_bytes;
  if (after > w.stack_threshold_bytes) [[unlikely]] {
    char buf[96];
    std::snprintf(buf, sizeof buf, "stack usage %zu + frame %zu exceeds threshold %zu",
                  w.shadow_stack_usage, next_frame_bytes, w.stack_threshold_bytes);
    panic_path(w, PanicReason::StackOverflowCheck, buf);
  }
  w.shadow_stack_usage = after;
  if (after > w.shadow_stack_high_water) w.shadow_stack_high_water = after;
}

}  // namespace exthost
