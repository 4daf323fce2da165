#include "exthost/host.hpp"

#include <pthread.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <set>
#include <thread>

#include "exthost/dispatcher.hpp"
#include "exthost/env.hpp"
#include "exthost/watchdog.hpp"

namespace exthost {

namespace detail {
extern thread_local WorkerState* tls_worker;
}

namespace {

std::string lint_summary(const LintReport& r) {
  std::string s = "lint rejected:";
  for (const auto& v : r.violations) s += " " + v.feature;
  return s;
}

[[noreturn]] void foreign_exception(const ExtensionRecord& rec, const char* what) {
  std::fprintf(stderr, "exthost: extension %s leaked a C++ exception (%s); aborting\n",
               rec.id().c_str(), what);
  std::abort();
}

}  // namespace

LintRejectedError::LintRejectedError(LintReport report)
    : Error(ErrorCode::LintRejected, lint_summary(report)), report_(std::move(report)) {}

std::vector<std::string> ExtensionHandle::attached_maps() const {
  std::vector<std::string> out;
  for (const auto& m : rec_->maps_) out.push_back(m->spec().map_id);
  return out;
}

Host::Host(HostConfig cfg) : cfg_(cfg), ring_((cfg.validate(), cfg.ring_capacity)) {
  for (unsigned i = 0; i < cfg_.num_workers; ++i)
    workers_.push_back(std::make_unique<WorkerState>(i, cfg_.stack_total_bytes(),
                                                     cfg_.stack_threshold_bytes()));
  install_interrupt_handler();
}

Host::~Host() { watchdogs_.reset(); }

WorkerState& Host::worker(unsigned id) {
  if (id >= workers_.size())
    throw Error(ErrorCode::InvalidConfig, "no worker " + std::to_string(id));
  return *workers_[id];
}

// ---- loading --------------------------------------------------------------

ExtensionHandle Host::load_extension(const ExtensionManifest& manifest, EntryFn entry) {
  manifest.validate();
  if (!entry) throw Error(ErrorCode::InvalidManifest, manifest.extension_id + ": no entry");
  auto report = lint_manifest(manifest);
  if (!report.accepted()) throw LintRejectedError(std::move(report));
  if (auto bad = check_frame_limits(manifest.callgraph, cfg_))
    throw Error(ErrorCode::FrameTooLarge, manifest.extension_id + ": frame of " + *bad +
                                              " exceeds " +
                                              std::to_string(cfg_.per_function_frame_limit));
  StackMode mode = classify_stack_mode(manifest.callgraph, manifest.entry_symbol, cfg_);

  std::set<std::string, std::less<>> seen;
  for (const auto& spec : manifest.declared_maps) {
    spec.validate();
    if (!seen.insert(spec.map_id).second)
      throw Error(ErrorCode::InvalidManifest, "map " + spec.map_id + " declared twice");
  }

  auto rec = std::make_shared<ExtensionRecord>();
  rec->manifest_ = manifest;
  rec->stack_mode_ = mode;
  rec->runtime_checked_ = is_runtime_checked(mode);
  rec->entry_frame_bytes_ = manifest.callgraph.find(manifest.entry_symbol)->frame_bytes;
  rec->entry_ = std::move(entry);
  for (const auto& f : unreachable_functions(manifest.callgraph, manifest.entry_symbol))
    rec->warnings_.push_back("function " + f + " is unreachable from " + manifest.entry_symbol +
                             " and does not count toward the stack bound");

  std::lock_guard lk(registry_mu_);
  if (extensions_.count(manifest.extension_id))
    throw Error(ErrorCode::DuplicateId, "extension " + manifest.extension_id + " already loaded");
  // All checks before any map is created, so a failed load changes nothing.
  for (const auto& spec : manifest.declared_maps) {
    auto it = maps_.find(spec.map_id);
    if (it != maps_.end() && !(it->second->spec() == spec))
      throw Error(ErrorCode::MapTypeMismatch, "map " + spec.map_id + " redeclared with another spec");
  }
  for (const auto& spec : manifest.declared_maps) {
    auto& slot = maps_[spec.map_id];
    if (!slot) slot = Map::create(spec, cfg_.num_workers, cfg_.map_hash_seed);
    rec->maps_.push_back(slot);
  }
  rec->load_seq_ = ++load_seq_;
  extensions_.emplace(manifest.extension_id, rec);
  return ExtensionHandle(std::move(rec));
}

std::vector<std::string> Host::unload_extension(std::string_view extension_id, bool cascade) {
  std::lock_guard lk(registry_mu_);
  return unload_locked(extension_id, cascade, false);
}

std::vector<std::string> Host::unload_locked(std::string_view extension_id, bool cascade,
                                             bool crash_stop) {
  auto root = extensions_.find(extension_id);
  if (root == extensions_.end())
    throw Error(ErrorCode::UnknownExtension, "extension " + std::string(extension_id) + " not loaded");

  std::vector<std::shared_ptr<ExtensionRecord>> by_load;
  for (auto& [id, r] : extensions_) by_load.push_back(r);
  std::sort(by_load.begin(), by_load.end(),
            [](const auto& a, const auto& b) { return a->load_seq_ < b->load_seq_; });

  // BFS over the extension-map sharing graph.
  std::vector<std::shared_ptr<ExtensionRecord>> removed{root->second};
  std::set<const ExtensionRecord*> visited{root->second.get()};
  if (cascade) {
    std::deque<ExtensionRecord*> queue{root->second.get()};
    while (!queue.empty()) {
      ExtensionRecord* e = queue.front();
      queue.pop_front();
      for (const auto& m : e->maps_) {
        for (const auto& other : by_load) {
          if (visited.count(other.get())) continue;
          if (std::find(other->maps_.begin(), other->maps_.end(), m) == other->maps_.end()) continue;
          visited.insert(other.get());
          removed.push_back(other);
          queue.push_back(other.get());
        }
      }
    }
  }

  for (auto& r : removed) r->state_.store(ExtensionRecord::State::Unloaded, std::memory_order_seq_cst);
  for (auto& r : removed)
    while (r->active_.load(std::memory_order_seq_cst) != 0) std::this_thread::yield();

  UnloadEvent ev;
  ev.trigger = std::string(extension_id);
  ev.cascade = cascade;
  ev.crash_stop = crash_stop;
  for (auto& r : removed) {
    ev.removed.push_back(r->id());
    extensions_.erase(r->id());
  }
  for (auto& r : removed) {
    for (const auto& m : r->maps_) {
      const auto& mid = m->spec().map_id;
      auto it = maps_.find(mid);
      if (it == maps_.end()) continue;
      bool still_used = std::any_of(extensions_.begin(), extensions_.end(), [&](const auto& kv) {
        const auto& ms = kv.second->maps_;
        return std::find(ms.begin(), ms.end(), m) != ms.end();
      });
      if (!still_used) {
        maps_.erase(it);
        ev.maps_dropped.push_back(mid);
      }
    }
  }
  unload_events_.push_back(ev);
  return ev.removed;
}

std::optional<ExtensionHandle> Host::find_extension(std::string_view extension_id) const {
  std::lock_guard lk(registry_mu_);
  auto it = extensions_.find(extension_id);
  if (it == extensions_.end()) return std::nullopt;
  return ExtensionHandle(it->second);
}

std::vector<std::string> Host::extension_ids() const {
  std::lock_guard lk(registry_mu_);
  std::vector<const ExtensionRecord*> recs;
  for (const auto& [id, r] : extensions_) recs.push_back(r.get());
  std::sort(recs.begin(), recs.end(),
            [](const auto* a, const auto* b) { return a->load_seq_ < b->load_seq_; });
  std::vector<std::string> out;
  for (const auto* r : recs) out.push_back(r->id());
  return out;
}

std::shared_ptr<Map> Host::find_map(std::string_view map_id) const {
  std::lock_guard lk(registry_mu_);
  auto it = maps_.find(map_id);
  return it == maps_.end() ? nullptr : it->second;
}

std::vector<std::string> Host::map_ids() const {
  std::lock_guard lk(registry_mu_);
  std::vector<std::string> out;
  for (const auto& [id, m] : maps_) out.push_back(id);
  return out;
}

std::vector<UnloadEvent> Host::unload_events() const {
  std::lock_guard lk(registry_mu_);
  return unload_events_;
}

// ---- dispatch ---------------------------------------------------------------

DispatchOutcome Host::dispatch(unsigned worker_id, const ExtensionHandle& handle,
                               ProgramContext& ctx) {
  if (!handle.rec_) throw Error(ErrorCode::UnknownExtension, "empty handle");
  if (detail::tls_worker != nullptr)
    throw Error(ErrorCode::WorkerBusy, "nested dispatch is not supported");
  WorkerState& w = worker(worker_id);
  ExtensionRecord& rec = *handle.rec_;

  rec.active_.fetch_add(1, std::memory_order_seq_cst);
  if (rec.state_.load(std::memory_order_seq_cst) != ExtensionRecord::State::Active) {
    rec.active_.fetch_sub(1, std::memory_order_seq_cst);
    throw Error(ErrorCode::UnknownExtension, "extension " + rec.id() + " is not active");
  }
  const ExtensionRecord* idle = nullptr;
  if (!w.current.compare_exchange_strong(idle, &rec, std::memory_order_seq_cst)) {
    rec.active_.fetch_sub(1, std::memory_order_seq_cst);
    throw Error(ErrorCode::WorkerBusy, "worker " + std::to_string(worker_id) + " is busy");
  }

  w.thread.store(pthread_self(), std::memory_order_release);
  detail::tls_worker = &w;
  w.generation.fetch_add(1, std::memory_order_acq_rel);
  w.panicking.store(false, std::memory_order_release);
  w.lock_held = false;
  w.shadow_stack_usage = rec.entry_frame_bytes_;
  w.shadow_stack_high_water = w.shadow_stack_usage;
  w.cleanup_registry.reset_high_water();
  w.prog_start_ns.store(monotonic_ns(), std::memory_order_release);

  Env env(*this, w, rec, ctx);
  // Landing pad. Everything it touches is either unchanged since this point
  // or lives in WorkerState.
  if (sigsetjmp(w.saved_context, 0) != 0) return land(w, rec);
  w.set_flag(ExecFlag::ExtensionCode);

  Verdict v;
  try {
    v = rec.entry_(env, ctx);
  } catch (const std::exception& e) {
    foreign_exception(rec, e.what());
  } catch (...) {
    foreign_exception(rec, "unknown");
  }

  // From here on a late interruption finds the flag Idle and does nothing.
  auto expected = ExecFlag::ExtensionCode;
  if (w.exec_flag.compare_exchange_strong(expected, ExecFlag::Idle, std::memory_order_acq_rel))
    w.trace.record(ExecFlag::ExtensionCode, ExecFlag::Idle, false);
  else
    w.set_flag(ExecFlag::Idle);
  // Guards are scoped to the entry function, so this only finds resources
  // an extension smuggled out of its own frame.
  w.cleanup_registry.release_all();
  w.lock_held = false;
  w.shadow_stack_usage = 0;
  rec.dispatches_.fetch_add(1, std::memory_order_relaxed);
  finish_dispatch(w, rec);
  return DispatchOutcome{v, std::nullopt, {}};
}

DispatchOutcome Host::land(WorkerState& w, ExtensionRecord& rec) {
  // Panic path proper: no locks, no allocation.
  w.cleanup_registry.release_all();
  w.lock_held = false;
  const auto ts = monotonic_ns();
  ring_.append(rec.id(), w.worker_id, w.pending_reason, w.pending_message.data(), ts);
  auto active = ExtensionRecord::State::Active;
  rec.state_.compare_exchange_strong(active, ExtensionRecord::State::Quarantined,
                                     std::memory_order_seq_cst);
  rec.panics_.fetch_add(1, std::memory_order_relaxed);
  rec.dispatches_.fetch_add(1, std::memory_order_relaxed);
  w.shadow_stack_usage = 0;
  w.set_flag(ExecFlag::Idle);
  w.panicking.store(false, std::memory_order_release);

  DispatchOutcome out;
  out.verdict = Verdict::panicked_default(rec.kind());
  out.panic = PanicRecord{rec.id(), w.worker_id, w.pending_reason, w.pending_message.data(), ts};
  finish_dispatch(w, rec);

  // Crash-stop, now that the worker is back in host context.
  std::lock_guard lk(registry_mu_);
  auto it = extensions_.find(rec.id());
  if (it != extensions_.end() && it->second.get() == &rec)
    out.removed = unload_locked(rec.id(), true, true);
  return out;
}

void Host::finish_dispatch(WorkerState& w, ExtensionRecord& rec) noexcept {
  w.current.store(nullptr, std::memory_order_seq_cst);
  // A watchdog that saw this dispatch may be mid-delivery; let it finish so
  // the signal cannot land in whatever this thread runs next.
  while (w.signalling.load(std::memory_order_seq_cst)) std::this_thread::yield();
  detail::tls_worker = nullptr;
  rec.active_.fetch_sub(1, std::memory_order_seq_cst);
}

// ---- host objects -----------------------------------------------------------

SpinlockCell& Host::create_spinlock(const std::string& lock_id) {
  std::lock_guard lk(objects_mu_);
  auto& slot = spinlocks_[lock_id];
  if (!slot) slot = std::make_unique<SpinlockCell>(lock_id);
  return *slot;
}

SpinlockCell& Host::spinlock(std::string_view lock_id) const {
  std::lock_guard lk(objects_mu_);
  auto it = spinlocks_.find(lock_id);
  if (it == spinlocks_.end()) throw Error(ErrorCode::UnknownObject, "no lock " + std::string(lock_id));
  return *it->second;
}

RefCounted& Host::create_object(const std::string& object_id) {
  std::lock_guard lk(objects_mu_);
  auto& slot = objects_[object_id];
  if (!slot) slot = std::make_unique<RefCounted>(object_id);
  return *slot;
}

RefCounted& Host::object(std::string_view object_id) const {
  std::lock_guard lk(objects_mu_);
  auto it = objects_.find(object_id);
  if (it == objects_.end())
    throw Error(ErrorCode::UnknownObject, "no object " + std::string(object_id));
  return *it->second;
}

StaticVar& Host::register_static(const std::string& var_id) {
  std::lock_guard lk(objects_mu_);
  auto& slot = statics_[var_id];
  if (!slot) slot = std::make_unique<StaticVar>(var_id);
  return *slot;
}

StaticVar& Host::static_var(std::string_view var_id) const {
  std::lock_guard lk(objects_mu_);
  auto it = statics_.find(var_id);
  if (it == statics_.end()) throw Error(ErrorCode::UnknownVar, "no static " + std::string(var_id));
  return *it->second;
}

// ---- watchdogs --------------------------------------------------------------

void Host::arm_watchdogs() {
  if (watchdogs_) throw Error(ErrorCode::AlreadyArmed, "watchdogs already armed");
  std::vector<WorkerState*> ws;
  for (auto& w : workers_) ws.push_back(w.get());
  watchdogs_ = std::make_unique<Watchdogs>(std::move(ws), cfg_.watchdog_period,
                                           cfg_.termination_timeout);
}

void Host::disarm_watchdogs() {
  if (!watchdogs_) throw Error(ErrorCode::NotArmed, "watchdogs not armed");
  watchdogs_.reset();
}

bool Host::watchdogs_armed() const noexcept { return watchdogs_ != nullptr; }

// ---- helpers ----------------------------------------------------------------

Map& Env::map(std::string_view map_id) const {
  for (const auto& m : rec_.maps_)
    if (m->spec().map_id == map_id) return *m;
  raise_panic(PanicReason::OutOfBounds, "map %.*s not declared", static_cast<int>(map_id.size()),
              map_id.data());
}

namespace {
void check_key(const Map& m, std::size_t key_bytes) {
  if (key_bytes != m.spec().key_bytes)
    raise_panic(PanicReason::OutOfBounds, "key of %zu bytes for map %s (key_bytes %u)", key_bytes,
                m.spec().map_id.c_str(), m.spec().key_bytes);
}
}  // namespace

std::optional<ValueRef> Env::map_lookup(Map& m, std::span<const std::uint8_t> key) {
  check_key(m, key.size());
  HelperScope scope(w_);
  auto ref = m.acquire(w_.worker_id, key);
  if (!ref) return std::nullopt;
  CleanupRecord r;
  r.kind = ResourceKind::MapValueRef;
  r.target = &m;
  r.arg = ref->token;
  r.release = &Map::release_thunk;
  const auto seq = w_.cleanup_registry.push(r);
  return ValueRef(&w_, seq, BoundedView(std::span(ref->data, m.spec().value_bytes)));
}

MapStatus Env::map_update(Map& m, std::span<const std::uint8_t> key,
                          std::span<const std::uint8_t> value) {
  check_key(m, key.size());
  if (value.size() != m.spec().value_bytes)
    raise_panic(PanicReason::OutOfBounds, "value of %zu bytes for map %s (value_bytes %u)",
                value.size(), m.spec().map_id.c_str(), m.spec().value_bytes);
  HelperScope scope(w_);
  return m.update(w_.worker_id, key, value);
}

bool Env::map_delete(Map& m, std::span<const std::uint8_t> key) {
  check_key(m, key.size());
  HelperScope scope(w_);
  return m.erase(w_.worker_id, key);
}

LockGuard Env::spin_lock(SpinlockCell& cell) {
  HelperScope scope(w_);
  if (w_.lock_held) panic_path(w_, PanicReason::DoubleLock, "second lock taken while holding one");
  cell.lock(SpinlockCell::token_for(w_.worker_id));
  CleanupRecord r;
  r.kind = ResourceKind::Lock;
  r.target = &cell;
  r.arg = reinterpret_cast<std::uint64_t>(&w_);
  r.release = &detail::release_spinlock;
  const auto seq = w_.cleanup_registry.push(r);
  w_.lock_held = true;
  return LockGuard(&w_, seq);
}

RefGuard Env::acquire_ref(RefCounted& obj) {
  HelperScope scope(w_);
  obj.get();
  CleanupRecord r;
  r.kind = ResourceKind::Refcount;
  r.target = &obj;
  r.release = &detail::release_ref;
  const auto seq = w_.cleanup_registry.push(r);
  return RefGuard(&w_, seq, &obj);
}

bool Env::adjust_tail(std::ptrdiff_t delta) {
  if (!ctx_.packet) return false;
  HelperScope scope(w_);
  const auto len = static_cast<std::ptrdiff_t>(ctx_.packet->size()) + delta;
  if (len < 0) return false;
  return ctx_.packet->resize(static_cast<std::size_t>(len));
}

}  // namespace exthost
