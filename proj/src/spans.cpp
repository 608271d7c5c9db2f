#include "jprof/spans.hpp"

#include <algorithm>
#include <cassert>

#include "jprof/errors.hpp"

namespace jprof {

FunctionId ContextStack::push(std::string_view name) {
    FunctionId id = registry_.intern(name);
    stack_.push_back(id);
    current_.store(id, std::memory_order_release);
    return id;
}

void ContextStack::pop() {
    if (stack_.empty()) throw InvalidArgument("pop on empty context stack");
    stack_.pop_back();
    current_.store(stack_.empty() ? kUnattributed : stack_.back(),
                   std::memory_order_release);
}

SpanProfiler::SpanProfiler(EnergySource& source) : source_(source) {
    for (const EnergyDomain& d : source_.domains())
        enumerated_.emplace_back(d, source_.range_of(d));
    initial_ = read_all();
}

std::map<EnergyDomain, CounterReading> SpanProfiler::read_all() {
    std::map<EnergyDomain, CounterReading> out;
    for (const auto& [domain, range] : enumerated_)
        out.emplace(domain, source_.read(domain));
    return out;
}

SpanHandle SpanProfiler::begin_span(std::string_view name, int stack) {
    std::lock_guard<std::mutex> lock(mutex_);
    bool others_active = false;
    for (auto& [id, spans] : stacks_) {
        if (id == stack || spans.empty()) continue;
        others_active = true;
        for (OpenSpan& s : spans) s.shared_counter = true;
    }
    OpenSpan span;
    span.serial = next_serial_++;
    span.name = std::string(name);
    span.stack = stack;
    span.start = read_all();
    span.shared_counter = others_active;
    stacks_[stack].push_back(std::move(span));
    return SpanHandle{stacks_[stack].back().serial};
}

SpanReport SpanProfiler::end_span(SpanHandle handle) {
    std::lock_guard<std::mutex> lock(mutex_);
    for (auto& [id, spans] : stacks_) {
        auto it = std::find_if(spans.begin(), spans.end(), [&](const OpenSpan& s) {
            return s.serial == handle.serial;
        });
        if (it == spans.end()) continue;
        if (&*it != &spans.back())
            throw NotInnermost("span '" + it->name + "' is not the innermost open span");
        SpanReport report = make_report(spans.back(), read_all());
        spans.pop_back();
        if (spans.empty())
            root_children_.push_back(report);
        else
            spans.back().children.push_back(report);
        return report;
    }
    throw AlreadyEnded("span handle does not refer to an open span");
}

SpanReport SpanProfiler::make_report(
    const OpenSpan& span, const std::map<EnergyDomain, CounterReading>& end) const {
    SpanReport report;
    report.name = span.name;
    report.children = span.children;
    report.duration_us = end.begin()->second.timestamp_us -
                         span.start.begin()->second.timestamp_us;
    report.flags.degenerate = report.duration_us == 0;
    report.flags.low_confidence =
        report.duration_us < 10 * source_.timestamp_precision_us();
    report.flags.shared_counter = span.shared_counter;
    for (const auto& [domain, range] : enumerated_) {
        SpanDomainEnergy cell;
        cell.energy_uj = delta_energy(span.start.at(domain), end.at(domain), range);
        std::uint64_t child_sum = 0;
        for (const SpanReport& child : report.children) {
            auto it = child.domains.find(domain);
            if (it != child.domains.end()) child_sum += it->second.energy_uj;
        }
        // Overlapping spans on other stacks double-count shared counters,
        // so the child sum may exceed the inclusive figure at the root.
        cell.energy_uj_exclusive =
            child_sum <= cell.energy_uj ? cell.energy_uj - child_sum : 0;
        if (report.duration_us > 0)
            cell.avg_power_uw = static_cast<std::uint64_t>(
                uint128(cell.energy_uj) * 1'000'000u / report.duration_us);
        report.domains.emplace(domain, cell);
    }
    return report;
}

SpanReport SpanProfiler::span_tree() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t open = 0;
    for (const auto& [id, spans] : stacks_) open += spans.size();
    if (open > 0)
        throw OpenSpans(std::to_string(open) + " span(s) still open");
    OpenSpan root;
    root.serial = 0;
    root.name = "<root>";
    root.stack = -1;
    root.start = initial_;
    root.children = root_children_;
    return make_report(root, read_all());
}

std::size_t SpanProfiler::open_span_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t open = 0;
    for (const auto& [id, spans] : stacks_) open += spans.size();
    return open;
}

}  // namespace jprof
