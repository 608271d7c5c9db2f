#include "jprof/capsim.hpp"

#include <algorithm>
#include <cassert>
#include <vector>

namespace jprof {

namespace {

// Piecewise-constant rate timeline of the output on the capped domain,
// consumed again by the expiry walker one window later.
struct RatePiece {
    std::uint64_t end_us;
    std::uint64_t rate_uw;
};

class CapSweep {
public:
    CapSweep(const ExecutionTrace& trace, const CapConstraint& cap)
        : trace_(trace), cap_(cap), budget_pj_(uint128(cap.limit_uw) * uint128(cap.window_us)) {}

    ExecutionTrace run() {
        std::vector<TraceSegment> out;
        for (const auto& seg : trace_.segments()) {
            std::uint64_t p_in = 0;
            if (auto it = seg.power_uw.find(cap_.domain); it != seg.power_uw.end())
                p_in = it->second;
            sweep_segment(seg, p_in, out);
        }
        return ExecutionTrace(trace_.registry(), std::move(out));
    }

private:
    void sweep_segment(const TraceSegment& seg, std::uint64_t p_in,
                       std::vector<TraceSegment>& out) {
        std::uint64_t t = seg.start_us;
        while (t < seg.end_us) {
            std::uint64_t t_next = next_event(t, seg.end_us);
            std::uint64_t r_cap = allowed_rate(t);
            if (p_in <= r_cap) {
                emit(seg, t, t_next, p_in, out);
                step_margin(t_next - t, r_cap, p_in);
                t = t_next;
                continue;
            }
            // Demand exceeds the sustainable rate; spend margin first.
            uint128 drain = uint128(p_in - r_cap);
            std::uint64_t full_us = static_cast<std::uint64_t>(
                std::min<uint128>(margin_pj_ / drain, uint128(t_next - t)));
            if (full_us > 0) {
                emit(seg, t, t + full_us, p_in, out);
                step_margin(full_us, r_cap, p_in);
                t += full_us;
                if (t == t_next) continue;
            }
            // Margin no longer covers a whole microsecond at full rate:
            // spend the sub-threshold remainder in one microsecond, then
            // hold at the sustainable rate until the next event.
            std::uint64_t spill = r_cap + static_cast<std::uint64_t>(margin_pj_);
            assert(spill < p_in);
            emit(seg, t, t + 1, spill, out);
            step_margin(1, r_cap, spill);
            t += 1;
            if (t < t_next) {
                emit(seg, t, t_next, r_cap, out);
                step_margin(t_next - t, r_cap, r_cap);
                t = t_next;
            }
        }
    }

    // Rate that keeps the binding window constraint constant when the
    // margin is exhausted: the limit itself while the first window is
    // still filling, the expiring output rate afterwards.
    std::uint64_t allowed_rate(std::uint64_t t) const {
        if (t < cap_.window_us) return cap_.limit_uw;
        return rate_at(t - cap_.window_us);
    }

    std::uint64_t next_event(std::uint64_t t, std::uint64_t seg_end) const {
        std::uint64_t next = seg_end;
        if (t < cap_.window_us)
            next = std::min(next, cap_.window_us);
        else
            next = std::min(next, piece_end_at(t - cap_.window_us) + cap_.window_us);
        return next;
    }

    void step_margin(std::uint64_t dt_us, std::uint64_t r_cap, std::uint64_t spent_uw) {
        int128 delta = (int128(r_cap) - int128(spent_uw)) * int128(dt_us);
        int128 m = int128(margin_pj_) + delta;
        assert(m >= 0);
        margin_pj_ = uint128(m);
        // Exact bookkeeping: the window never holds more than its budget.
        assert(margin_pj_ <= budget_pj_);
    }

    void emit(const TraceSegment& seg, std::uint64_t t0, std::uint64_t t1, std::uint64_t rate,
              std::vector<TraceSegment>& out) {
        if (!timeline_.empty() && timeline_.back().rate_uw == rate)
            timeline_.back().end_us = t1;
        else
            timeline_.push_back({t1, rate});
        if (!out.empty() && out.back().end_us == t0 && out.back().function == seg.function &&
            out.back().start_us >= seg.start_us) {
            auto it = out.back().power_uw.find(cap_.domain);
            std::uint64_t prev_rate = it == out.back().power_uw.end() ? 0 : it->second;
            if (prev_rate == rate) {
                out.back().end_us = t1;
                return;
            }
        }
        TraceSegment piece = seg;
        piece.start_us = t0;
        piece.end_us = t1;
        if (rate > 0 || seg.power_uw.count(cap_.domain))
            piece.power_uw[cap_.domain] = rate;
        out.push_back(std::move(piece));
    }

    std::uint64_t rate_at(std::uint64_t t) const {
        auto it = std::upper_bound(timeline_.begin(), timeline_.end(), t,
                                   [](std::uint64_t x, const RatePiece& p) { return x < p.end_us; });
        assert(it != timeline_.end());
        return it->rate_uw;
    }

    std::uint64_t piece_end_at(std::uint64_t t) const {
        auto it = std::upper_bound(timeline_.begin(), timeline_.end(), t,
                                   [](std::uint64_t x, const RatePiece& p) { return x < p.end_us; });
        assert(it != timeline_.end());
        return it->end_us;
    }

    const ExecutionTrace& trace_;
    CapConstraint cap_;
    uint128 budget_pj_;
    uint128 margin_pj_ = 0;  // room left in the binding window, in pJ
    std::vector<RatePiece> timeline_;
};

}  // namespace

ExecutionTrace enforce_cap_sim(const ExecutionTrace& trace, const CapConstraint& cap) {
    validate(cap);
    if (trace.segments().empty()) return trace;
    return CapSweep(trace, cap).run();
}

}  // namespace jprof
