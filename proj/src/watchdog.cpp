#include "exthost/watchdog.hpp"

#include <pthread.h>

#include <condition_variable>
#include <csignal>
#include <mutex>

#include "exthost/dispatcher.hpp"

namespace exthost {

std::string_view to_string(WatchdogAction a) noexcept {
  switch (a) {
    case WatchdogAction::None: return "None";
    case WatchdogAction::ForcedUnwind: return "ForcedUnwind";
    case WatchdogAction::Deferred: return "Deferred";
  }
  return "?";
}

WatchdogAction watchdog_tick(WorkerState& w, std::int64_t now_ns, Nanos timeout) noexcept {
  w.watchdog.ticks.fetch_add(1, std::memory_order_relaxed);
  const auto gen = w.generation.load(std::memory_order_acquire);
  if (w.current.load(std::memory_order_acquire) == nullptr) return WatchdogAction::None;
  const auto start = w.prog_start_ns.load(std::memory_order_acquire);
  const auto flag = w.exec_flag.load(std::memory_order_acquire);
  // A different dispatch may have started between the reads.
  if (w.generation.load(std::memory_order_acquire) != gen) return WatchdogAction::None;
  if (now_ns - start <= timeout.count()) return WatchdogAction::None;
  if (w.panicking.load(std::memory_order_acquire)) return WatchdogAction::None;

  switch (flag) {
    case ExecFlag::ExtensionCode: {
      if (w.unwind_generation.load(std::memory_order_acquire) == gen) return WatchdogAction::None;
      // Pairs with finish_dispatch: either we see the dispatch gone, or it
      // waits for the signal to be queued before leaving the thread.
      w.signalling.store(true, std::memory_order_seq_cst);
      if (w.current.load(std::memory_order_seq_cst) == nullptr ||
          w.generation.load(std::memory_order_seq_cst) != gen) {
        w.signalling.store(false, std::memory_order_release);
        return WatchdogAction::None;
      }
      w.unwind_generation.store(gen, std::memory_order_release);
      w.watchdog.unwind_requests.fetch_add(1, std::memory_order_relaxed);
      pthread_kill(w.thread.load(std::memory_order_acquire), interrupt_signal());
      w.signalling.store(false, std::memory_order_release);
      return WatchdogAction::ForcedUnwind;
    }
    case ExecFlag::HelperOrPanic: {
      auto expected = ExecFlag::HelperOrPanic;
      if (!w.exec_flag.compare_exchange_strong(expected, ExecFlag::TerminationRequested,
                                               std::memory_order_acq_rel))
        return WatchdogAction::None;  // left the helper meanwhile; next tick decides
      w.trace.record(ExecFlag::HelperOrPanic, ExecFlag::TerminationRequested, false,
                     FlagWriter::Watchdog);
      w.watchdog.deferred.fetch_add(1, std::memory_order_relaxed);
      return WatchdogAction::Deferred;
    }
    default:
      return WatchdogAction::None;
  }
}

Watchdogs::Watchdogs(std::vector<WorkerState*> workers, Nanos period, Nanos timeout) {
  install_interrupt_handler();
  threads_.reserve(workers.size());
  for (WorkerState* w : workers) {
    threads_.emplace_back([w, period, timeout](std::stop_token st) {
      // Private to this timer: the wait only exists so that stop wakes it.
      std::mutex mu;
      std::condition_variable_any cv;
      auto next = std::chrono::steady_clock::now() + period;
      std::unique_lock lk(mu);
      while (!st.stop_requested()) {
        if (cv.wait_until(lk, st, next, [] { return false; })) break;
        if (st.stop_requested()) break;
        lk.unlock();
        watchdog_tick(*w, monotonic_ns(), timeout);
        lk.lock();
        next += period;
        const auto now = std::chrono::steady_clock::now();
        if (next < now) next = now + period;
      }
    });
  }
}

Watchdogs::~Watchdogs() {
  for (auto& t : threads_) t.request_stop();
  threads_.clear();  // joins
}

}  // namespace exthost
