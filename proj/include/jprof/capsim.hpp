#pragma once

#include "jprof/domain.hpp"
#include "jprof/trace.hpp"

namespace jprof {

// Rewrites a trace so that the capped domain obeys the running-average
// power limit: for every window ending at time t and covering
// [max(0, t - window_us), t], mean power stays <= limit_uw. Power is only
// ever reduced, so total energy never increases; a compliant trace comes
// back identical and the operation is idempotent. Other domains and
// function attribution are untouched.
ExecutionTrace enforce_cap_sim(const ExecutionTrace& trace, const CapConstraint& cap);

}  // namespace jprof
