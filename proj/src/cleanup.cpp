#include "exthost/cleanup.hpp"

#include <algorithm>
#include <string>

#include "exthost/types.hpp"

namespace exthost {

std::uint64_t CleanupRegistry::push(CleanupRecord rec) {
  rec.seq = next_seq_++;
  records_.push_back(rec);
  high_water_ = std::max(high_water_, records_.size());
  return rec.seq;
}

void CleanupRegistry::pop(std::uint64_t seq) {
  if (records_.empty() || records_.back().seq != seq)
    throw Error(ErrorCode::PopMismatch,
                "pop of record " + std::to_string(seq) + " but top is " +
                    (records_.empty() ? std::string("empty") : std::to_string(records_.back().seq)));
  records_.pop_back();
}

bool CleanupRegistry::release(std::uint64_t seq) noexcept {
  // Guards normally end in LIFO order, so the match is almost always the top.
  for (auto i = records_.size(); i-- > 0;) {
    if (records_[i].seq != seq) continue;
    const CleanupRecord rec = records_[i];
    records_.erase(records_.begin() + static_cast<std::ptrdiff_t>(i));
    notify(rec);
    rec.run();
    return true;
  }
  return false;
}

std::size_t CleanupRegistry::release_all() noexcept {
  std::size_t n = 0;
  while (!records_.empty()) {
    const CleanupRecord rec = records_.back();
    records_.pop_back();
    notify(rec);
    rec.run();
    ++n;
  }
  return n;
}

std::size_t CleanupRegistry::count(ResourceKind kind) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(), [kind](const CleanupRecord& r) { return r.kind == kind; }));
}

}  // namespace exthost
