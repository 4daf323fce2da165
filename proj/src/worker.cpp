#include "exthost/worker.hpp"

#include <algorithm>

namespace exthost {

bool is_legal_transition(ExecFlag from, ExecFlag to, bool entering_panic) noexcept {
  using F = ExecFlag;
  if (to == F::Idle) return true;
  if (from == F::Idle) return to == F::ExtensionCode;
  if (from == F::ExtensionCode) return to == F::HelperOrPanic;
  if (from == F::HelperOrPanic) {
    if (to == F::ExtensionCode || to == F::TerminationRequested) return true;
    return to == F::HelperOrPanic && entering_panic;  // panic raised inside a helper
  }
  // TerminationRequested only leaves through the panic path.
  return to == F::HelperOrPanic && entering_panic;
}

std::vector<FlagTransition> FlagTrace::snapshot() const {
  auto n = std::min(next_.load(std::memory_order_acquire), kCapacity);
  return {slots_.begin(), slots_.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace exthost
