#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <functional>
#include <type_traits>
#include <utility>

#include "exthost/dispatcher.hpp"
#include "exthost/host.hpp"
#include "exthost/transmute.hpp"
#include "exthost/view.hpp"

namespace exthost {

/// Pinned map value. Exactly value_bytes are reachable through bytes().
/// Dropping the guard unpins the value and pops its cleanup record.
class ValueRef {
 public:
  ValueRef(ValueRef&& other) noexcept
      : worker_(std::exchange(other.worker_, nullptr)), seq_(other.seq_), view_(other.view_) {}
  ValueRef& operator=(ValueRef&&) = delete;
  ValueRef(const ValueRef&) = delete;
  ~ValueRef() noexcept(false) {
    if (worker_) detail::guard_release(worker_, seq_);
  }

  BoundedView bytes() const noexcept { return view_; }

 private:
  friend class Env;
  ValueRef(WorkerState* w, std::uint64_t seq, BoundedView v) : worker_(w), seq_(seq), view_(v) {}

  WorkerState* worker_;
  std::uint64_t seq_;
  BoundedView view_;
};

/// The helper surface an extension programs against during one dispatch.
/// Helpers that touch shared host state run between helper_enter and
/// helper_exit and record what they acquire; bounds checks, stack checks and
/// views are plain extension code.
class Env {
 public:
  Env(Host& host, WorkerState& w, ExtensionRecord& rec, ProgramContext& ctx) noexcept
      : host_(host), w_(w), rec_(rec), ctx_(ctx) {}
  Env(const Env&) = delete;
  Env& operator=(const Env&) = delete;

  unsigned worker_id() const noexcept { return w_.worker_id; }
  WorkerState& worker() noexcept { return w_; }
  const HostConfig& config() const noexcept { return host_.config(); }
  const std::string& extension_id() const noexcept { return rec_.id(); }
  ProgramContext& context() noexcept { return ctx_; }

  // ---- maps -------------------------------------------------------------

  /// The i-th map of the manifest's declared_maps.
  Map& map(std::size_t declared_index) const {
    if (declared_index >= rec_.maps_.size())
      raise_panic(PanicReason::OutOfBounds, "map index %zu of %zu", declared_index,
                  rec_.maps_.size());
    return *rec_.maps_[declared_index];
  }
  Map& map(std::string_view map_id) const;

  std::optional<ValueRef> map_lookup(Map& m, std::span<const std::uint8_t> key);
  std::optional<ValueRef> map_lookup(Map& m, std::uint32_t index) {
    auto key = Map::index_key(index);
    return map_lookup(m, key);
  }
  MapStatus map_update(Map& m, std::span<const std::uint8_t> key, std::span<const std::uint8_t> value);
  MapStatus map_update(Map& m, std::uint32_t index, std::span<const std::uint8_t> value) {
    auto key = Map::index_key(index);
    return map_update(m, key, value);
  }
  bool map_delete(Map& m, std::span<const std::uint8_t> key);

  // ---- locks and references ---------------------------------------------

  /// Takes the lock; panics with DoubleLock if this worker already holds one.
  LockGuard spin_lock(SpinlockCell& cell);
  RefGuard acquire_ref(RefCounted& obj);

  // ---- stack ------------------------------------------------------------

  void check_stack(std::size_t next_frame_bytes) { exthost::check_stack(w_, next_frame_bytes); }

  /// An extension-level call of a function with the given frame size. In
  /// runtime-checked mode the shadow stack is checked first.
  template <class F, class... Args>
  decltype(auto) call(std::size_t frame_bytes, F&& f, Args&&... args) {
    if (!rec_.runtime_checked())
      return std::invoke(std::forward<F>(f), std::forward<Args>(args)...);
    exthost::check_stack(w_, frame_bytes);
    struct Pop {
      WorkerState& w;
      std::size_t n;
      ~Pop() { stack_return(w, n); }
    } pop{w_, frame_bytes};
    return std::invoke(std::forward<F>(f), std::forward<Args>(args)...);
  }

  // ---- packet -----------------------------------------------------------

  /// The current frame as a bounded view (empty for non-packet programs).
  BoundedView packet() noexcept {
    return ctx_.packet ? BoundedView(ctx_.packet->bytes()) : BoundedView();
  }
  /// Grows or shrinks the frame tail. Returns false if out of capacity.
  bool adjust_tail(std::ptrdiff_t delta);

  // ---- typed access -----------------------------------------------------

  TypedRecord transmute(BoundedView view, const TypeDescriptor& desc) const {
    return transmute_checked(view, desc);
  }

  [[noreturn]] void panic(std::string_view message) {
    panic_path(w_, PanicReason::ExplicitPanic, message);
  }

 private:
  Host& host_;
  WorkerState& w_;
  ExtensionRecord& rec_;
  ProgramContext& ctx_;
};

}  // namespace exthost
