#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace exthost {

enum class ResourceKind : std::uint8_t { Lock, MapValueRef, Refcount };

/// One acquired resource and the action that releases it. The action is bound
/// at acquisition and must not fail, allocate, or take locks.
struct CleanupRecord {
  using ReleaseFn = void (*)(void* target, std::uint64_t arg) noexcept;

  ResourceKind kind = ResourceKind::Lock;
  std::uint64_t seq = 0;  // assigned by the registry on push
  void* target = nullptr;
  std::uint64_t arg = 0;
  ReleaseFn release = nullptr;

  void run() const noexcept { release(target, arg); }
};

/// Per-worker LIFO buffer of live resources. Single-lane: only the owning
/// worker touches it.
class CleanupRegistry {
 public:
  using Observer = void (*)(void* ctx, const CleanupRecord& rec) noexcept;

  CleanupRegistry() { records_.reserve(64); }

  /// Pushes and returns the record's sequence number.
  std::uint64_t push(CleanupRecord rec);

  /// Strict stack discipline: `seq` must be the top. Throws Error(PopMismatch).
  /// Does not run the release action.
  void pop(std::uint64_t seq);

  /// Runs the release action of the record with `seq` and removes it. Used by
  /// guard finalizers, which may end out of order. Returns false if the
  /// record is gone (already drained by release_all).
  bool release(std::uint64_t seq) noexcept;

  /// Pops and releases every record, newest first. Returns the count.
  std::size_t release_all() noexcept;

  bool empty() const noexcept { return records_.empty(); }
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t high_water() const noexcept { return high_water_; }
  void reset_high_water() noexcept { high_water_ = records_.size(); }
  std::size_t count(ResourceKind kind) const noexcept;
  const CleanupRecord* top() const noexcept { return records_.empty() ? nullptr : &records_.back(); }

  /// Test instrumentation: called for each record released (by release or
  /// release_all), before the release action runs.
  void set_observer(Observer fn, void* ctx) noexcept {
    observer_ = fn;
    observer_ctx_ = ctx;
  }

 private:
  void notify(const CleanupRecord& r) const noexcept {
    if (observer_) observer_(observer_ctx_, r);
  }

  std::vector<CleanupRecord> records_;
  std::uint64_t next_seq_ = 1;
  std::size_t high_water_ = 0;
  Observer observer_ = nullptr;
  void* observer_ctx_ = nullptr;
};

}  // namespace exthost
