#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <utility>

#include "exthost/cleanup.hpp"

namespace exthost {

class WorkerState;

/// A spinlock shared between workers. State 0 is unlocked, otherwise the
/// owner's token (worker id + 1, or kHostOwner for host-side holders).
class SpinlockCell {
 public:
  static constexpr std::uint32_t kHostOwner = 0xffffffffu;
  static constexpr unsigned kSpinsBeforeYield = 128;

  explicit SpinlockCell(std::string lock_id = {}) : lock_id_(std::move(lock_id)) {}
  SpinlockCell(const SpinlockCell&) = delete;
  SpinlockCell& operator=(const SpinlockCell&) = delete;

  const std::string& lock_id() const noexcept { return lock_id_; }

  /// Spins until owned by `owner`; yields the thread every kSpinsBeforeYield tries.
  void lock(std::uint32_t owner) noexcept;
  bool try_lock(std::uint32_t owner) noexcept;
  /// Returns false (and leaves the cell untouched) if `owner` does not hold it.
  bool unlock(std::uint32_t owner) noexcept;

  bool locked() const noexcept { return state_.load(std::memory_order_acquire) != 0; }
  std::uint32_t owner() const noexcept { return state_.load(std::memory_order_acquire); }

  static std::uint32_t token_for(unsigned worker_id) noexcept { return worker_id + 1; }

 private:
  std::atomic<std::uint32_t> state_{0};
  std::string lock_id_;
};

/// Reference-counted host object (stands in for sockets, tasks and other
/// kernel objects an extension can pin).
class RefCounted {
 public:
  explicit RefCounted(std::string object_id) : object_id_(std::move(object_id)) {}
  RefCounted(const RefCounted&) = delete;
  RefCounted& operator=(const RefCounted&) = delete;

  const std::string& object_id() const noexcept { return object_id_; }
  std::int64_t refcount() const noexcept { return refs_.load(std::memory_order_acquire); }
  void get() noexcept { refs_.fetch_add(1, std::memory_order_acq_rel); }
  void put() noexcept { refs_.fetch_sub(1, std::memory_order_acq_rel); }

 private:
  std::string object_id_;
  std::atomic<std::int64_t> refs_{1};  // the host's own reference
};

/// Host-global integer accessed directly by extension code, without the
/// helper wrapping.
class StaticVar {
 public:
  explicit StaticVar(std::string var_id) : var_id_(std::move(var_id)) {}
  StaticVar(const StaticVar&) = delete;
  StaticVar& operator=(const StaticVar&) = delete;

  const std::string& var_id() const noexcept { return var_id_; }
  std::int64_t read() const noexcept { return value_.load(std::memory_order_seq_cst); }
  std::int64_t add(std::int64_t delta) noexcept {
    return value_.fetch_add(delta, std::memory_order_seq_cst) + delta;
  }

 private:
  std::string var_id_;
  std::atomic<std::int64_t> value_{0};
};

/// RAII guard for a spinlock taken by an extension. At most one is live per
/// worker. Dropping it runs the unlock helper and pops its cleanup record.
class LockGuard {
 public:
  LockGuard(LockGuard&& other) noexcept
      : worker_(std::exchange(other.worker_, nullptr)), seq_(other.seq_) {}
  LockGuard& operator=(LockGuard&&) = delete;
  LockGuard(const LockGuard&) = delete;
  ~LockGuard() noexcept(false);

 private:
  friend class Env;
  LockGuard(WorkerState* w, std::uint64_t seq) : worker_(w), seq_(seq) {}

  WorkerState* worker_;
  std::uint64_t seq_;
};

/// RAII guard pinning a RefCounted object.
class RefGuard {
 public:
  RefGuard(RefGuard&& other) noexcept
      : worker_(std::exchange(other.worker_, nullptr)), seq_(other.seq_), obj_(other.obj_) {}
  RefGuard& operator=(RefGuard&&) = delete;
  RefGuard(const RefGuard&) = delete;
  ~RefGuard() noexcept(false);

  RefCounted& object() const noexcept { return *obj_; }

 private:
  friend class Env;
  RefGuard(WorkerState* w, std::uint64_t seq, RefCounted* obj) : worker_(w), seq_(seq), obj_(obj) {}

  WorkerState* worker_;
  std::uint64_t seq_;
  RefCounted* obj_;
};

namespace detail {
// Release actions bound into cleanup records.
// `worker` carries the owning WorkerState*; its lock_held flag is cleared too.
void release_spinlock(void* cell, std::uint64_t worker) noexcept;
void release_ref(void* obj, std::uint64_t) noexcept;
// Guard finalizer: releases the record `seq` inside a helper section.
void guard_release(WorkerState* w, std::uint64_t seq);
}  // namespace detail

}  // namespace exthost
