#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "jprof/errors.hpp"

namespace jprof {

// Canonical units throughout the library: microjoules for energy,
// microwatts for power, microseconds for time. Conversions to joules,
// watts and seconds happen only at the reporting edge. Exact integrals
// of power over time are kept in picojoules (uW * us) in 128-bit math.
using int128 = __int128;
using uint128 = unsigned __int128;

enum class DomainKind : std::uint8_t {
    Package,      // pkg: whole socket
    PowerPlane0,  // pp0: cores
    PowerPlane1,  // pp1: platform dependent, often the (unused) GPU
    Dram,         // dram
    Node,         // whole machine, external meter only
};

struct EnergyDomain {
    DomainKind kind = DomainKind::Package;
    int socket = 0;

    auto operator<=>(const EnergyDomain&) const = default;
};

// Spellings used in trace files, CSV headers, CLI flags and reports.
std::string_view to_string(DomainKind kind);
DomainKind parse_domain_kind(std::string_view text);

// "pkg" for socket 0, "pkg@1" for socket 1, and so on.
std::string to_string(const EnergyDomain& domain);
EnergyDomain parse_domain(std::string_view text);

// One cumulative energy observation. energy_uj wraps to 0 past the
// domain's max range; timestamps are monotonic within one source.
struct CounterReading {
    EnergyDomain domain;
    std::uint64_t timestamp_us = 0;
    std::uint64_t energy_uj = 0;
};

struct CounterRange {
    std::uint64_t max_range_uj = 0;  // counter wraps to 0 after this value
};

// Average-power limit over a sliding time window (power capping).
struct CapConstraint {
    EnergyDomain domain;
    std::uint64_t limit_uw = 0;
    std::uint64_t window_us = 0;
};

void validate(const CapConstraint& cap);

// Wrap-corrected difference between two readings of the same counter.
// Assumes at most one wrap occurred between the reads; the sampler's
// default 10 ms period makes multi-wrap implausible on real ranges.
std::uint64_t delta_energy(const CounterReading& prev, const CounterReading& next,
                           const CounterRange& range);

std::uint64_t monotonic_now_us();

}  // namespace jprof
