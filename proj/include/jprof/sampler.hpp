#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "jprof/source.hpp"
#include "jprof/spans.hpp"
#include "jprof/trace.hpp"

namespace jprof {

// Overflow sampling: every period the sampler reads the counters, adds the
// delta to a per-domain residual, and attributes floor(residual / threshold)
// hits to whatever function is current. One hit stands for one threshold's
// worth of energy; the residual carries over, so no energy is lost between
// ticks. The hit histogram converges to the per-function energy
// distribution as hits accumulate.
struct SamplerConfig {
    std::uint64_t period_us = 10'000;
    std::map<EnergyDomain, std::uint64_t> threshold_uj;
    // Domains to sample. Empty means every domain the source enumerates.
    std::vector<EnergyDomain> domains;

    bool operator==(const SamplerConfig&) const = default;
};

struct Accumulator {
    std::map<EnergyDomain, std::uint64_t> residual_uj;
    std::map<EnergyDomain, CounterReading> last;
    std::map<EnergyDomain, CounterRange> range;
};

struct ProfileRow {
    std::map<EnergyDomain, std::uint64_t> hits;
    std::uint64_t perf_ticks = 0;
};

struct Profile {
    FunctionRegistry registry;
    SamplerConfig config;
    std::map<FunctionId, ProfileRow> rows;
    std::uint64_t total_ticks = 0;
    std::uint64_t wall_time_us = 0;
    // Measured counter delta over the whole run, accumulated tick by tick.
    // Always equals hits * threshold + residual, domain by domain.
    std::map<EnergyDomain, std::uint64_t> total_energy_uj;
    std::map<EnergyDomain, std::uint64_t> residual_uj;
    std::uint64_t sampler_self_time_us = 0;

    std::uint64_t total_hits(const EnergyDomain& domain) const;
    std::uint64_t energy_uj(FunctionId fn, const EnergyDomain& domain) const;
};

// Record baseline readings; emits no hits and counts no tick.
void prime(Accumulator& acc, std::span<const CounterReading> readings);

// One sampling instant: fold each domain reading into the accumulator and
// attribute the overflow hits to `current`. Counts one perf tick. A domain
// seen for the first time is primed instead and emits no hits.
std::map<EnergyDomain, std::uint64_t> tick(Accumulator& acc,
                                           std::span<const CounterReading> readings,
                                           FunctionId current, Profile& profile);
// Single-domain convenience overload.
std::map<EnergyDomain, std::uint64_t> tick(Accumulator& acc,
                                           const CounterReading& reading,
                                           FunctionId current, Profile& profile);

// Answers "what is running" at a sampling instant.
class ContextProvider {
public:
    virtual ~ContextProvider() = default;
    virtual FunctionId current(std::uint64_t timestamp_us) const = 0;
    virtual const FunctionRegistry& registry() const = 0;
};

// Attribution from a recorded trace (replay).
class TraceContext : public ContextProvider {
public:
    explicit TraceContext(const ExecutionTrace& trace) : trace_(&trace) {}
    // Ticks can overshoot the trace end when the period does not divide the
    // duration; the counters clamp there, so attribution clamps too.
    FunctionId current(std::uint64_t timestamp_us) const override {
        return trace_->function_for_tick(std::min(timestamp_us, trace_->duration_us()));
    }
    const FunctionRegistry& registry() const override { return trace_->registry(); }

private:
    const ExecutionTrace* trace_;
};

// Attribution from live instrumentation.
class StackContext : public ContextProvider {
public:
    explicit StackContext(const ContextStack& stack) : stack_(&stack) {}
    FunctionId current(std::uint64_t) const override { return stack_->current(); }
    const FunctionRegistry& registry() const override { return stack_->registry(); }

private:
    const ContextStack* stack_;
};

// Deterministic replay over a synthetic source: baseline at t=0, then one
// tick every period until `duration_us` is covered.
Profile run_sampling(SyntheticSource& source, const ContextProvider& context,
                     const SamplerConfig& config, std::uint64_t duration_us);

// Live sampling against wall-clock deadlines start + n*period. Late ticks
// are not skipped; the next deadline stays on the absolute grid, so delay
// does not lose energy, it only defers attribution.
Profile run_sampling_live(EnergySource& source, const ContextProvider& context,
                          const SamplerConfig& config, std::uint64_t duration_us,
                          const std::atomic<bool>* stop = nullptr);

// Threshold that yields roughly one hit per five periods at the given
// baseline power.
std::uint64_t auto_threshold_uj(std::uint64_t idle_power_uw, std::uint64_t period_us);

// Hit share per function for one domain. Sums to 1 over all functions.
std::map<FunctionId, double> estimate_shares(const Profile& profile,
                                             const EnergyDomain& domain);

// Merge two profiles of the same configuration. Functions are matched by
// name; ids are re-assigned from the merged registry.
Profile merge_profiles(const Profile& a, const Profile& b);

}  // namespace jprof
