#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "exthost/types.hpp"

namespace exthost {

/// Append-only ring of panic records. Appends are lock-free and do not
/// allocate; when full, the oldest records are overwritten while total()
/// keeps counting.
class PanicLog {
 public:
  explicit PanicLog(std::size_t capacity);

  void append(std::string_view extension_id, unsigned worker_id, PanicReason reason,
              std::string_view message, std::int64_t timestamp_ns) noexcept;

  std::uint64_t total() const noexcept { return next_.load(std::memory_order_acquire); }
  std::size_t capacity() const noexcept { return capacity_; }

  /// Retained records, oldest first. Records being written concurrently are
  /// skipped.
  std::vector<PanicRecord> snapshot() const;
  std::uint64_t count(PanicReason reason) const;

 private:
  struct Slot {
    std::atomic<std::uint64_t> seq{0};  // 2*index+1 while writing, 2*index+2 when done
    std::int64_t ts = 0;
    unsigned worker = 0;
    PanicReason reason = PanicReason::ExplicitPanic;
    std::uint16_t ext_len = 0;
    std::uint16_t msg_len = 0;
    char ext[kMaxExtensionIdLength];
    char msg[160];
  };

  std::size_t capacity_;
  std::unique_ptr<Slot[]> slots_;
  std::atomic<std::uint64_t> next_{0};
};

}  // namespace exthost
