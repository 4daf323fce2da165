#include "exthost/resources.hpp"

#include <thread>

#include "exthost/dispatcher.hpp"
#include "exthost/worker.hpp"

namespace exthost {

void SpinlockCell::lock(std::uint32_t owner) noexcept {
  unsigned spins = 0;
  for (;;) {
    std::uint32_t expected = 0;
    if (state_.compare_exchange_weak(expected, owner, std::memory_order_acquire,
                                     std::memory_order_relaxed))
      return;
    if (++spins == kSpinsBeforeYield) {
      spins = 0;
      std::this_thread::yield();
    }
  }
}

bool SpinlockCell::try_lock(std::uint32_t owner) noexcept {
  std::uint32_t expected = 0;
  return state_.compare_exchange_strong(expected, owner, std::memory_order_acquire,
                                        std::memory_order_relaxed);
}

bool SpinlockCell::unlock(std::uint32_t owner) noexcept {
  std::uint32_t expected = owner;
  return state_.compare_exchange_strong(expected, 0, std::memory_order_release,
                                        std::memory_order_relaxed);
}

namespace detail {

void release_spinlock(void* cell, std::uint64_t worker) noexcept {
  auto* w = reinterpret_cast<WorkerState*>(worker);
  static_cast<SpinlockCell*>(cell)->unlock(SpinlockCell::token_for(w->worker_id));
  w->lock_held = false;
}

void release_ref(void* obj, std::uint64_t) noexcept { static_cast<RefCounted*>(obj)->put(); }

void guard_release(WorkerState* w, std::uint64_t seq) {
  // The registry is edited inside a helper so that an interruption cannot
  // land while the record list is half updated.
  if (w->flag() != ExecFlag::ExtensionCode) {
    w->cleanup_registry.release(seq);
    return;
  }
  helper_enter(*w);
  w->cleanup_registry.release(seq);
  helper_exit(*w);
}

}  // namespace detail

LockGuard::~LockGuard() noexcept(false) {
  if (worker_) detail::guard_release(worker_, seq_);
}

RefGuard::~RefGuard() noexcept(false) {
  if (worker_) detail::guard_release(worker_, seq_);
}

}  // namespace exthost
