#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "jprof/domain.hpp"
#include "jprof/trace.hpp"

namespace jprof {

// Uniform abstraction over cumulative energy counters. A source is owned
// by one reader at a time; read() must be cheap enough to call from the
// sampler's periodic context. Sources are transferable between execution
// contexts but never shared concurrently.
class EnergySource {
public:
    virtual ~EnergySource() = default;

    // Stable, duplicate-free list; deterministic while the source is unchanged.
    virtual std::vector<EnergyDomain> domains() = 0;

    // Current cumulative energy plus a monotonic timestamp.
    // Throws UnknownDomain for domains the source does not enumerate.
    virtual CounterReading read(const EnergyDomain& domain) = 0;

    // Wrap range of the domain's counter.
    virtual CounterRange range_of(const EnergyDomain& domain) = 0;

    virtual bool supports_capping() const { return false; }
    virtual void set_power_cap(const CapConstraint& cap);

    // Timestamp granularity of the underlying counter, used to flag
    // low-confidence spans.
    virtual std::uint64_t timestamp_precision_us() const { return 1000; }
};

// Trace-backed counters on a virtual clock. Reads integrate the trace up
// to the current virtual time; configurable wrap ranges allow forcing
// counter wraparound in tests. Power capping rewrites the backing trace
// through the cap simulator.
class SyntheticSource : public EnergySource {
public:
    explicit SyntheticSource(ExecutionTrace trace,
                             std::map<EnergyDomain, CounterRange> ranges = {});

    std::vector<EnergyDomain> domains() override;
    CounterReading read(const EnergyDomain& domain) override;
    CounterRange range_of(const EnergyDomain& domain) override;

    bool supports_capping() const override { return true; }

    // Applies the cap simulator to the part of the trace that is still in
    // the future; counter values already observed stay observable.
    void set_power_cap(const CapConstraint& cap) override;

    std::uint64_t timestamp_precision_us() const override { return 1; }

    // Virtual clock; moves forward only.
    void set_time(std::uint64_t t_us);
    void advance(std::uint64_t delta_us) { set_time(now_us_ + delta_us); }
    std::uint64_t now_us() const { return now_us_; }

    const ExecutionTrace& trace() const { return trace_; }
    const std::optional<CapConstraint>& active_cap() const { return cap_; }

private:
    ExecutionTrace trace_;
    std::map<EnergyDomain, CounterRange> ranges_;
    std::uint64_t now_us_ = 0;
    std::optional<CapConstraint> cap_;
};

inline constexpr std::uint64_t kDefaultSyntheticRangeUj = (1ull << 62) - 1;

}  // namespace jprof
