#include "jprof/source.hpp"

#include <algorithm>

#include "jprof/capsim.hpp"

namespace jprof {

void EnergySource::set_power_cap(const CapConstraint&) {
    throw CapUnsupported("this source does not support power capping");
}

SyntheticSource::SyntheticSource(ExecutionTrace trace, std::map<EnergyDomain, CounterRange> ranges)
    : trace_(std::move(trace)), ranges_(std::move(ranges)) {
    // The Node domain belongs to external meters; an on-chip style source
    // never enumerates it even if the trace models node power.
    for (const auto& dom : trace_.domains()) {
        if (dom.kind == DomainKind::Node) continue;
        ranges_.try_emplace(dom, CounterRange{kDefaultSyntheticRangeUj});
    }
    for (const auto& [dom, range] : ranges_) {
        if (dom.kind == DomainKind::Node)
            throw InvalidArgument("Node domain cannot back a counter source");
        if (range.max_range_uj == 0) throw InvalidArgument("counter range must be > 0");
    }
}

std::vector<EnergyDomain> SyntheticSource::domains() {
    std::vector<EnergyDomain> out;
    out.reserve(ranges_.size());
    for (const auto& [dom, range] : ranges_) out.push_back(dom);
    return out;
}

CounterRange SyntheticSource::range_of(const EnergyDomain& domain) {
    auto it = ranges_.find(domain);
    if (it == ranges_.end())
        throw UnknownDomain("domain " + to_string(domain) + " not enumerated by this source");
    return it->second;
}

CounterReading SyntheticSource::read(const EnergyDomain& domain) {
    auto it = ranges_.find(domain);
    if (it == ranges_.end())
        throw UnknownDomain("domain " + to_string(domain) + " not enumerated by this source");
    std::uint64_t t = std::min(now_us_, trace_.duration_us());
    std::uint64_t cumulative = trace_.cumulative_uj(t, domain);
    std::uint64_t max_range = it->second.max_range_uj;
    CounterReading r;
    r.domain = domain;
    r.timestamp_us = now_us_;
    r.energy_uj = max_range == UINT64_MAX ? cumulative : cumulative % (max_range + 1);
    return r;
}

void SyntheticSource::set_time(std::uint64_t t_us) {
    if (t_us < now_us_) throw TimestampRegression("synthetic clock cannot move backwards");
    now_us_ = t_us;
}

void SyntheticSource::set_power_cap(const CapConstraint& cap) {
    validate(cap);
    std::uint64_t at = std::min(now_us_, trace_.duration_us());
    if (at >= trace_.duration_us()) {
        cap_ = cap;
        return;
    }
    // Split at the current virtual time and cap only the future, on its
    // own timeline so the averaging windows start fresh at the cap point.
    std::vector<TraceSegment> prefix, suffix;
    for (const TraceSegment& seg : trace_.segments()) {
        if (seg.end_us <= at) {
            prefix.push_back(seg);
        } else if (seg.start_us >= at) {
            suffix.push_back(seg);
        } else {
            TraceSegment head = seg, tail = seg;
            head.end_us = at;
            tail.start_us = at;
            prefix.push_back(std::move(head));
            suffix.push_back(std::move(tail));
        }
    }
    for (TraceSegment& seg : suffix) {
        seg.start_us -= at;
        seg.end_us -= at;
    }
    ExecutionTrace capped =
        enforce_cap_sim(ExecutionTrace(trace_.registry(), std::move(suffix)), cap);
    std::vector<TraceSegment> merged = std::move(prefix);
    for (TraceSegment seg : capped.segments()) {
        seg.start_us += at;
        seg.end_us += at;
        merged.push_back(std::move(seg));
    }
    trace_ = ExecutionTrace(trace_.registry(), std::move(merged));
    cap_ = cap;
}

}  // namespace jprof
