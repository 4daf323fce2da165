#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <thread>
#include <vector>

#include "exthost/types.hpp"
#include "exthost/worker.hpp"

namespace exthost {

enum class WatchdogAction { None, ForcedUnwind, Deferred };

std::string_view to_string(WatchdogAction a) noexcept;

/// One watchdog check of `w` at monotonic time `now_ns`.
///   no dispatch, or not yet timed out          -> None
///   ExtensionCode                              -> interrupt the worker thread, ForcedUnwind
///   HelperOrPanic                              -> flag := TerminationRequested, Deferred
///   TerminationRequested, or already unwinding -> None
/// An interruption is requested at most once per dispatch.
WatchdogAction watchdog_tick(WorkerState& w, std::int64_t now_ns, Nanos timeout) noexcept;

/// Periodic per-worker timers. Each runs on its own thread and re-arms after
/// every firing; no timer looks at another worker.
class Watchdogs {
 public:
  Watchdogs(std::vector<WorkerState*> workers, Nanos period, Nanos timeout);
  /// Stops every timer and waits for in-flight ticks.
  ~Watchdogs();
  Watchdogs(const Watchdogs&) = delete;
  Watchdogs& operator=(const Watchdogs&) = delete;

  std::size_t timer_count() const noexcept { return threads_.size(); }

 private:
  std::vector<std::jthread> threads_;
};

}  // namespace exthost
