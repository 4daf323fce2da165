#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace exthost {

/// Frame storage with a fixed capacity and a current length, like an XDP
/// buffer: the program may grow or shrink the tail within the capacity.
class PacketBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 2048;

  explicit PacketBuffer(std::size_t capacity = kDefaultCapacity) : storage_(capacity) {}

  /// Returns false if `bytes` does not fit.
  bool assign(std::span<const std::uint8_t> bytes) noexcept {
    if (bytes.size() > storage_.size()) return false;
    if (!bytes.empty()) std::memcpy(storage_.data(), bytes.data(), bytes.size());
    len_ = bytes.size();
    return true;
  }

  bool resize(std::size_t new_len) noexcept {
    if (new_len > storage_.size()) return false;
    len_ = new_len;
    return true;
  }

  std::span<std::uint8_t> bytes() noexcept { return {storage_.data(), len_}; }
  std::span<const std::uint8_t> bytes() const noexcept { return {storage_.data(), len_}; }
  std::size_t size() const noexcept { return len_; }
  std::size_t capacity() const noexcept { return storage_.size(); }

 private:
  std::vector<std::uint8_t> storage_;
  std::size_t len_ = 0;
};

/// What the hook hands to an extension: a packet for packet-ingress
/// programs, integer arguments for trace-event programs.
struct ProgramContext {
  PacketBuffer* packet = nullptr;
  std::array<std::int64_t, 4> args{};
};

}  // namespace exthost
