#pragma once

#include "exthost/types.hpp"

namespace exthost {

/// Single entry point for failed safety checks. Inside a dispatch this enters
/// the panic path of the current worker and never returns; outside a dispatch
/// it throws PanicError.
[[noreturn]] void raise_panic(PanicReason reason, const char* fmt, ...)
    __attribute__((format(printf, 2, 3)));

}  // namespace exthost
