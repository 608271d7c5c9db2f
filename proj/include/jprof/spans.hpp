#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "jprof/source.hpp"
#include "jprof/trace.hpp"

namespace jprof {

struct SpanFlags {
    bool degenerate = false;      // zero duration: average power defined as 0
    bool low_confidence = false;  // shorter than 10x the counter's precision
    bool shared_counter = false;  // overlapped a span on another stack
};

struct SpanDomainEnergy {
    std::uint64_t energy_uj = 0;            // inclusive
    std::uint64_t energy_uj_exclusive = 0;  // inclusive minus children
    std::uint64_t avg_power_uw = 0;
};

struct SpanReport {
    std::string name;
    std::uint64_t duration_us = 0;
    std::map<EnergyDomain, SpanDomainEnergy> domains;
    SpanFlags flags;
    std::vector<SpanReport> children;
};

struct SpanHandle {
    std::uint64_t serial = 0;
};

// Lock-free view of "what is executing right now" for the sampler.
// Pushes and pops happen on the owning execution context; the sampler
// only reads the atomic current id. The registry is read after the run.
class ContextStack {
public:
    FunctionId push(std::string_view name);
    void pop();
    FunctionId current() const { return current_.load(std::memory_order_relaxed); }
    const FunctionRegistry& registry() const { return registry_; }

private:
    FunctionRegistry registry_;
    std::vector<FunctionId> stack_;
    std::atomic<FunctionId> current_{kUnattributed};
};

// Instrumentation profiler: brackets named tasks with counter readings
// taken at begin and end, and reports energy, duration and average power
// per domain. Spans nest; a child must end before its parent. Multiple
// independent stacks may coexist (one per execution context); spans that
// overlap across stacks share the underlying counters and are flagged
// rather than split.
class SpanProfiler {
public:
    explicit SpanProfiler(EnergySource& source);

    SpanHandle begin_span(std::string_view name, int stack = 0);
    SpanReport end_span(SpanHandle handle);

    // Root report over the whole profiling window. All spans must be
    // ended; the root's exclusive energy is whatever the run consumed
    // outside any span.
    SpanReport span_tree();

    std::size_t open_span_count() const;

private:
    struct OpenSpan {
        std::uint64_t serial;
        std::string name;
        int stack;
        std::map<EnergyDomain, CounterReading> start;
        std::vector<SpanReport> children;
        bool shared_counter = false;
    };

    std::map<EnergyDomain, CounterReading> read_all();
    SpanReport make_report(const OpenSpan& span,
                           const std::map<EnergyDomain, CounterReading>& end) const;

    EnergySource& source_;
    std::vector<std::pair<EnergyDomain, CounterRange>> enumerated_;
    std::map<EnergyDomain, CounterReading> initial_;
    std::map<int, std::vector<OpenSpan>> stacks_;
    std::vector<SpanReport> root_children_;
    std::uint64_t next_serial_ = 1;
    mutable std::mutex mutex_;
};

}  // namespace jprof
