#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "exthost/resources.hpp"
#include "exthost/types.hpp"

namespace exthost {

/// FNV-1a, 32-bit. The seed is folded into the offset basis.
constexpr std::uint32_t fnv1a32(std::span<const std::uint8_t> bytes, std::uint32_t seed = 0) noexcept {
  std::uint32_t h = 2166136261u ^ seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 16777619u;
  }
  return h;
}

enum class MapStatus { Ok, Full, NoSuchIndex };

/// Key/value store shared by extensions. Internally synchronized; every
/// operation is linearizable. Values handed to extensions are pinned by a
/// reference count, so deleting an entry defers reclamation until the last
/// reference drops.
class Map {
 public:
  struct Ref {
    std::uint8_t* data;
    std::uint64_t token;
  };

  Map(const Map&) = delete;
  Map& operator=(const Map&) = delete;
  virtual ~Map() = default;

  static std::unique_ptr<Map> create(const MapSpec& spec, unsigned num_workers,
                                     std::uint32_t hash_seed = 0);

  const MapSpec& spec() const noexcept { return spec_; }

  /// Pins the value for `key`; exactly value_bytes are reachable through the
  /// returned pointer. `key.size()` must equal key_bytes.
  virtual std::optional<Ref> acquire(unsigned worker, std::span<const std::uint8_t> key) = 0;
  virtual void release(std::uint64_t token) noexcept = 0;
  virtual MapStatus update(unsigned worker, std::span<const std::uint8_t> key,
                           std::span<const std::uint8_t> value) = 0;
  /// Array-like maps cannot delete; they return false.
  virtual bool erase(unsigned worker, std::span<const std::uint8_t> key) = 0;

  /// Host-side copy of a value (no pin left behind).
  std::optional<std::vector<std::uint8_t>> get(unsigned worker, std::span<const std::uint8_t> key);
  std::optional<std::vector<std::uint8_t>> get(unsigned worker, std::uint32_t index) {
    return get(worker, index_key(index));
  }

  /// Pins currently held by extensions or host code.
  virtual std::uint64_t outstanding_refs() const noexcept = 0;
  /// Allocated value blocks, including deleted-but-pinned ones (hash maps).
  virtual std::size_t live_blocks() const noexcept = 0;
  virtual std::size_t entry_count() const = 0;

  /// Per-entry spinlock, as embedded in map values. nullptr if out of range.
  SpinlockCell* entry_lock(std::uint32_t index) noexcept {
    return index < spec_.max_entries ? &entry_locks_[index] : nullptr;
  }

  /// Encodes a 4-byte little-endian index key.
  static std::array<std::uint8_t, 4> index_key(std::uint32_t index) noexcept {
    return {static_cast<std::uint8_t>(index), static_cast<std::uint8_t>(index >> 8),
            static_cast<std::uint8_t>(index >> 16), static_cast<std::uint8_t>(index >> 24)};
  }

  /// Release thunk suitable for a CleanupRecord: target is the Map*.
  static void release_thunk(void* map, std::uint64_t token) noexcept {
    static_cast<Map*>(map)->release(token);
  }

 protected:
  explicit Map(const MapSpec& spec)
      : spec_(spec), entry_locks_(std::make_unique<SpinlockCell[]>(spec.max_entries)) {}

  static std::uint32_t decode_index(std::span<const std::uint8_t> key) noexcept {
    return static_cast<std::uint32_t>(key[0]) | static_cast<std::uint32_t>(key[1]) << 8 |
           static_cast<std::uint32_t>(key[2]) << 16 | static_cast<std::uint32_t>(key[3]) << 24;
  }

  const MapSpec spec_;

 private:
  std::unique_ptr<SpinlockCell[]> entry_locks_;
};

}  // namespace exthost
