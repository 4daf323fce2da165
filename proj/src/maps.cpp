#include "exthost/maps.hpp"

#include <bit>
#include <cstdlib>
#include <cstring>
#include <new>

namespace exthost {

namespace {

// calloc-backed zeroed storage; large arrays get lazily-zeroed pages.
struct ZeroedBytes {
  explicit ZeroedBytes(std::size_t n) : ptr(static_cast<std::uint8_t*>(std::calloc(n ? n : 1, 1))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~ZeroedBytes() { std::free(ptr); }
  ZeroedBytes(const ZeroedBytes&) = delete;
  ZeroedBytes& operator=(const ZeroedBytes&) = delete;
  std::uint8_t* ptr;
};

// Fixed slots, zero-initialised, indexed by a 4-byte key. `lanes` copies
// of the array exist (1 for shared arrays, num_workers for per-worker).
class IndexedMap final : public Map {
 public:
  IndexedMap(const MapSpec& spec, unsigned lanes)
      : Map(spec),
        lanes_(lanes),
        storage_(std::size_t{spec.value_bytes} * spec.max_entries * lanes),
        refs_(std::make_unique<std::atomic<std::uint32_t>[]>(std::size_t{spec.max_entries} * lanes)) {}

  std::optional<Ref> acquire(unsigned worker, std::span<const std::uint8_t> key) override {
    auto slot = slot_for(worker, key);
    if (!slot) return std::nullopt;
    refs_[*slot].fetch_add(1, std::memory_order_acq_rel);
    return Ref{storage_.ptr + *slot * spec_.value_bytes, *slot};
  }

  void release(std::uint64_t token) noexcept override {
    refs_[token].fetch_sub(1, std::memory_order_acq_rel);
  }

  MapStatus update(unsigned worker, std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> value) override {
    auto slot = slot_for(worker, key);
    if (!slot) return MapStatus::NoSuchIndex;
    std::memcpy(storage_.ptr + *slot * spec_.value_bytes, value.data(), spec_.value_bytes);
    return MapStatus::Ok;
  }

  bool erase(unsigned, std::span<const std::uint8_t>) override { return false; }

  std::uint64_t outstanding_refs() const noexcept override {
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < std::size_t{spec_.max_entries} * lanes_; ++i)
      total += refs_[i].load(std::memory_order_acquire);
    return total;
  }
  std::size_t live_blocks() const noexcept override { return std::size_t{spec_.max_entries} * lanes_; }
  std::size_t entry_count() const override { return spec_.max_entries; }

 private:
  std::optional<std::size_t> slot_for(unsigned worker, std::span<const std::uint8_t> key) const {
    auto index = decode_index(key);
    if (index >= spec_.max_entries) return std::nullopt;
    unsigned lane = lanes_ == 1 ? 0 : worker;
    if (lane >= lanes_) return std::nullopt;
    return std::size_t{lane} * spec_.max_entries + index;
  }

  unsigned lanes_;
  ZeroedBytes storage_;
  std::unique_ptr<std::atomic<std::uint32_t>[]> refs_;
};

// Open addressing with linear probing and tombstones. Values live in
// separately allocated blocks so a pinned value outlives its deletion.
class HashMap final : public Map {
 public:
  HashMap(const MapSpec& spec, std::uint32_t seed)
      : Map(spec),
        seed_(seed),
        capacity_(std::bit_ceil(std::max<std::size_t>(8, std::size_t{spec.max_entries} * 2))),
        slots_(capacity_),
        keys_(capacity_ * spec.key_bytes) {}

  ~HashMap() override {
    for (auto& s : slots_)
      if (s.state == Occupied) drop(s.block);
  }

  std::optional<Ref> acquire(unsigned, std::span<const std::uint8_t> key) override {
    std::lock_guard lk(mu_);
    auto i = find(key, fnv1a32(key, seed_));
    if (!i) return std::nullopt;
    Block* b = slots_[*i].block;
    b->refs.fetch_add(1, std::memory_order_acq_rel);
    pins_.fetch_add(1, std::memory_order_relaxed);
    return Ref{b->data.get(), reinterpret_cast<std::uint64_t>(b)};
  }

  void release(std::uint64_t token) noexcept override {
    pins_.fetch_sub(1, std::memory_order_relaxed);
    drop(reinterpret_cast<Block*>(token));
  }

  MapStatus update(unsigned, std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> value) override {
    auto h = fnv1a32(key, seed_);
    std::lock_guard lk(mu_);
    if (auto i = find(key, h)) {
      // Replace rather than overwrite: pinned readers keep a stable value.
      Block* old = slots_[*i].block;
      slots_[*i].block = make_block(value);
      drop(old);
      return MapStatus::Ok;
    }
    if (count_ == spec_.max_entries) return MapStatus::Full;
    if ((count_ + tombstones_ + 1) * 4 > capacity_ * 3) rehash();
    std::size_t i = h & (capacity_ - 1);
    while (slots_[i].state == Occupied) i = (i + 1) & (capacity_ - 1);
    if (slots_[i].state == Tombstone) --tombstones_;
    slots_[i] = {Occupied, h, make_block(value)};
    std::memcpy(&keys_[i * spec_.key_bytes], key.data(), spec_.key_bytes);
    ++count_;
    return MapStatus::Ok;
  }

  bool erase(unsigned, std::span<const std::uint8_t> key) override {
    std::lock_guard lk(mu_);
    auto i = find(key, fnv1a32(key, seed_));
    if (!i) return false;
    Block* b = slots_[*i].block;
    slots_[*i] = {Tombstone, 0, nullptr};
    ++tombstones_;
    --count_;
    drop(b);
    return true;
  }

  std::uint64_t outstanding_refs() const noexcept override { return pins_.load(); }
  std::size_t live_blocks() const noexcept override { return blocks_.load(); }
  std::size_t entry_count() const override {
    std::lock_guard lk(mu_);
    return count_;
  }

 private:
  enum State : std::uint8_t { Empty, Occupied, Tombstone };

  struct Block {
    std::atomic<std::uint32_t> refs{1};  // the map's own reference
    std::unique_ptr<std::uint8_t[]> data;
  };

  struct Slot {
    State state = Empty;
    std::uint32_t hash = 0;
    Block* block = nullptr;
  };

  Block* make_block(std::span<const std::uint8_t> value) {
    auto* b = new Block;
    b->data = std::make_unique<std::uint8_t[]>(spec_.value_bytes);
    std::memcpy(b->data.get(), value.data(), spec_.value_bytes);
    blocks_.fetch_add(1, std::memory_order_relaxed);
    return b;
  }

  void drop(Block* b) noexcept {
    if (b->refs.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      delete b;
      blocks_.fetch_sub(1, std::memory_order_relaxed);
    }
  }

  std::optional<std::size_t> find(std::span<const std::uint8_t> key, std::uint32_t h) const {
    std::size_t i = h & (capacity_ - 1);
    for (std::size_t probes = 0; probes < capacity_; ++probes, i = (i + 1) & (capacity_ - 1)) {
      const auto& s = slots_[i];
      if (s.state == Empty) return std::nullopt;
      if (s.state == Occupied && s.hash == h &&
          std::memcmp(&keys_[i * spec_.key_bytes], key.data(), spec_.key_bytes) == 0)
        return i;
    }
    return std::nullopt;
  }

  void rehash() {
    std::vector<Slot> old_slots(capacity_);
    std::vector<std::uint8_t> old_keys(keys_.size());
    old_slots.swap(slots_);
    old_keys.swap(keys_);
    for (std::size_t j = 0; j < old_slots.size(); ++j) {
      if (old_slots[j].state != Occupied) continue;
      std::size_t i = old_slots[j].hash & (capacity_ - 1);
      while (slots_[i].state == Occupied) i = (i + 1) & (capacity_ - 1);
      slots_[i] = old_slots[j];
      std::memcpy(&keys_[i * spec_.key_bytes], &old_keys[j * spec_.key_bytes], spec_.key_bytes);
    }
    tombstones_ = 0;
  }

  const std::uint32_t seed_;
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::vector<Slot> slots_;
  std::vector<std::uint8_t> keys_;
  std::size_t count_ = 0;
  std::size_t tombstones_ = 0;
  std::atomic<std::uint64_t> pins_{0};
  std::atomic<std::size_t> blocks_{0};
};

}  // namespace

std::unique_ptr<Map> Map::create(const MapSpec& spec, unsigned num_workers, std::uint32_t hash_seed) {
  spec.validate();
  switch (spec.kind) {
    case MapKind::Array: return std::make_unique<IndexedMap>(spec, 1);
    case MapKind::PerWorker: return std::make_unique<IndexedMap>(spec, num_workers);
    case MapKind::Hash: return std::make_unique<HashMap>(spec, hash_seed);
  }
  return nullptr;
}

std::optional<std::vector<std::uint8_t>> Map::get(unsigned worker, std::span<const std::uint8_t> key) {
  if (key.size() != spec_.key_bytes) return std::nullopt;
  auto ref = acquire(worker, key);
  if (!ref) return std::nullopt;
  std::vector<std::uint8_t> out(ref->data, ref->data + spec_.value_bytes);
  release(ref->token);
  return out;
}

}  // namespace exthost
