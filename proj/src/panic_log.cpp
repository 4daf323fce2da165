#include "exthost/panic_log.hpp"

#include <algorithm>
#include <cstring>

namespace exthost {

PanicLog::PanicLog(std::size_t capacity)
    : capacity_(capacity), slots_(std::make_unique<Slot[]>(capacity)) {}

void PanicLog::append(std::string_view extension_id, unsigned worker_id, PanicReason reason,
                      std::string_view message, std::int64_t timestamp_ns) noexcept {
  const auto index = next_.fetch_add(1, std::memory_order_acq_rel);
  Slot& s = slots_[index % capacity_];
  s.seq.store(2 * index + 1, std::memory_order_release);
  s.ts = timestamp_ns;
  s.worker = worker_id;
  s.reason = reason;
  s.ext_len = static_cast<std::uint16_t>(std::min(extension_id.size(), sizeof s.ext));
  std::memcpy(s.ext, extension_id.data(), s.ext_len);
  s.msg_len = static_cast<std::uint16_t>(std::min(message.size(), sizeof s.msg));
  std::memcpy(s.msg, message.data(), s.msg_len);
  s.seq.store(2 * index + 2, std::memory_order_release);
}

std::vector<PanicRecord> PanicLog::snapshot() const {
  const auto end = total();
  const auto begin = end > capacity_ ? end - capacity_ : 0;
  std::vector<PanicRecord> out;
  out.reserve(static_cast<std::size_t>(end - begin));
  for (auto i = begin; i < end; ++i) {
    const Slot& s = slots_[i % capacity_];
    if (s.seq.load(std::memory_order_acquire) != 2 * i + 2) continue;
    PanicRecord r;
    r.timestamp_ns = s.ts;
    r.worker_id = s.worker;
    r.reason = s.reason;
    r.extension_id.assign(s.ext, s.ext_len);
    r.message.assign(s.msg, s.msg_len);
    if (s.seq.load(std::memory_order_acquire) == 2 * i + 2) out.push_back(std::move(r));
  }
  return out;
}

std::uint64_t PanicLog::count(PanicReason reason) const {
  auto records = snapshot();
  return static_cast<std::uint64_t>(std::count_if(
      records.begin(), records.end(), [reason](const PanicRecord& r) { return r.reason == reason; }));
}

}  // namespace exthost
