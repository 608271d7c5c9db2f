#pragma once

// Independent reference computations for the test suite. Everything here
// recomputes results from first principles (1 us brute force or plain
// per-segment sums) without touching the library's prefix tables.

#include <algorithm>
#include <optional>
#include <vector>

#include "jprof/capsim.hpp"
#include "jprof/trace.hpp"

namespace oracle {

// Power at time t: the segment containing t (half-open intervals), linear scan.
inline std::uint64_t power_at(const jprof::ExecutionTrace& trace, std::uint64_t t_us,
                              const jprof::EnergyDomain& domain) {
    for (const jprof::TraceSegment& seg : trace.segments()) {
        if (t_us < seg.start_us || t_us >= seg.end_us) continue;
        auto it = seg.power_uw.find(domain);
        return it != seg.power_uw.end() ? it->second : 0;
    }
    return 0;
}

// Exact integral over [t0, t1) by summing one microsecond at a time.
// Only sane for short traces.
inline jprof::uint128 riemann_pj(const jprof::ExecutionTrace& trace, std::uint64_t t0,
                                 std::uint64_t t1, const jprof::EnergyDomain& domain) {
    jprof::uint128 pj = 0;
    for (std::uint64_t t = t0; t < t1; ++t) pj += power_at(trace, t, domain);
    return pj;
}

// Floor-of-cumulative difference, the microjoule value a wrap-free counter
// pair would report over [t0, t1].
inline std::uint64_t riemann_uj_between(const jprof::ExecutionTrace& trace,
                                        std::uint64_t t0, std::uint64_t t1,
                                        const jprof::EnergyDomain& domain) {
    jprof::uint128 at_t0 = riemann_pj(trace, 0, t0, domain);
    jprof::uint128 at_t1 = at_t0 + riemann_pj(trace, t0, t1, domain);
    return static_cast<std::uint64_t>(at_t1 / 1'000'000u) -
           static_cast<std::uint64_t>(at_t0 / 1'000'000u);
}

// Fast independent cumulative integral: its own boundary list and prefix
// sums, usable on multi-second traces.
class SegmentIntegral {
public:
    SegmentIntegral(const jprof::ExecutionTrace& trace,
                    const jprof::EnergyDomain& domain) {
        jprof::uint128 acc = 0;
        for (const jprof::TraceSegment& seg : trace.segments()) {
            auto it = seg.power_uw.find(domain);
            std::uint64_t power = it != seg.power_uw.end() ? it->second : 0;
            starts_.push_back(seg.start_us);
            powers_.push_back(power);
            prefix_.push_back(acc);
            acc += jprof::uint128(power) * (seg.end_us - seg.start_us);
            end_ = seg.end_us;
        }
        prefix_.push_back(acc);
    }

    jprof::uint128 cumulative_pj(std::uint64_t t_us) const {
        if (t_us >= end_ || starts_.empty()) return prefix_.back();
        auto it = std::upper_bound(starts_.begin(), starts_.end(), t_us);
        std::size_t i = static_cast<std::size_t>(it - starts_.begin()) - 1;
        return prefix_[i] + jprof::uint128(powers_[i]) * (t_us - starts_[i]);
    }

private:
    std::vector<std::uint64_t> starts_, powers_;
    std::vector<jprof::uint128> prefix_;
    std::uint64_t end_ = 0;
};

// Scans every window ending at t = 1..duration (clipped at t = 0 on the
// left) and reports the first end time whose average power exceeds the
// limit by more than rel_slack.
inline std::optional<std::uint64_t> first_cap_violation(
    const jprof::ExecutionTrace& trace, const jprof::CapConstraint& cap,
    double rel_slack = 0.0) {
    SegmentIntegral integral(trace, cap.domain);
    std::uint64_t duration = trace.duration_us();
    for (std::uint64_t t = 1; t <= duration; ++t) {
        std::uint64_t start = t > cap.window_us ? t - cap.window_us : 0;
        std::uint64_t span = t - start;
        jprof::uint128 energy_pj =
            integral.cumulative_pj(t) - integral.cumulative_pj(start);
        long double budget = static_cast<long double>(cap.limit_uw) *
                             static_cast<long double>(span) *
                             (1.0L + static_cast<long double>(rel_slack));
        if (static_cast<long double>(energy_pj) > budget) return t;
    }
    return std::nullopt;
}

}  // namespace oracle
