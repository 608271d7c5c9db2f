#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jprof/domain.hpp"

namespace jprof {

using FunctionId = std::uint32_t;
inline constexpr FunctionId kUnattributed = 0;

// Dense name <-> id table. Id 0 is reserved for "unattributed".
class FunctionRegistry {
public:
    FunctionRegistry();

    FunctionId intern(std::string_view name);
    std::optional<FunctionId> find(std::string_view name) const;
    const std::string& name(FunctionId id) const;
    std::uint32_t size() const { return static_cast<std::uint32_t>(names_.size()); }

    bool operator==(const FunctionRegistry&) const = default;

private:
    std::vector<std::string> names_;
    std::map<std::string, FunctionId, std::less<>> by_name_;
};

struct TraceSegment {
    std::uint64_t start_us = 0;
    std::uint64_t end_us = 0;  // half-open [start_us, end_us)
    FunctionId function = kUnattributed;
    std::map<EnergyDomain, std::uint64_t> power_uw;
};

// Piecewise-constant ground-truth workload model. Segments are contiguous
// from t = 0 and immutable after construction; energy integrals are exact
// in integer picojoules (uW * us), so the trace doubles as the test oracle
// for every profiler in the toolkit.
class ExecutionTrace {
public:
    ExecutionTrace(FunctionRegistry registry, std::vector<TraceSegment> segments);

    const FunctionRegistry& registry() const { return registry_; }
    const std::vector<TraceSegment>& segments() const { return segments_; }
    std::uint64_t duration_us() const;
    const std::vector<EnergyDomain>& domains() const { return domains_; }

    // Exact integral of power over [t0, t1] in picojoules.
    uint128 energy_pj_between(std::uint64_t t0_us, std::uint64_t t1_us,
                              const EnergyDomain& domain) const;

    // Cumulative counter view: floor of the exact integral from 0, in uJ.
    std::uint64_t cumulative_uj(std::uint64_t t_us, const EnergyDomain& domain) const;

    // Microjoule oracle consistent with cumulative counters:
    // cumulative_uj(t1) - cumulative_uj(t0). Additive over adjacent
    // intervals and within 1 uJ of the exact integral.
    std::uint64_t energy_uj_between(std::uint64_t t0_us, std::uint64_t t1_us,
                                    const EnergyDomain& domain) const;

    // Function of the segment containing t (half-open intervals: a boundary
    // tick belongs to the newer segment). Throws OutOfRange for t >= end.
    FunctionId function_at(std::uint64_t t_us) const;

    // Sampler convenience: like function_at but a tick landing exactly on
    // the trace end is attributed to the final segment. Throws OutOfRange
    // past the end.
    FunctionId function_for_tick(std::uint64_t t_us) const;

    std::map<FunctionId, uint128> per_function_energy_pj(const EnergyDomain& domain) const;
    uint128 total_energy_pj(const EnergyDomain& domain) const;

    // Exact energy shares per function (ratios of pJ integrals).
    std::map<FunctionId, double> energy_shares(const EnergyDomain& domain) const;

private:
    std::size_t segment_index_at(std::uint64_t t_us) const;
    uint128 cumulative_pj(std::uint64_t t_us, std::size_t domain_index) const;
    std::optional<std::size_t> domain_index(const EnergyDomain& domain) const;

    FunctionRegistry registry_;
    std::vector<TraceSegment> segments_;
    std::vector<EnergyDomain> domains_;
    // prefix_pj_[d][i]: exact energy of segments [0, i) for domains_[d].
    std::vector<std::vector<uint128>> prefix_pj_;
};

// Line-oriented trace file format:
//   trace v1
//   fn <id> <name>
//   seg <start_us> <end_us> <fn_id> <domain>=<uw>[,<domain>=<uw>...]
void write_trace(const ExecutionTrace& trace, std::ostream& out);
ExecutionTrace parse_trace(std::istream& in);
ExecutionTrace load_trace(const std::string& path);

struct TraceGenSpec {
    struct Function {
        std::string name;
        double energy_share = 0.0;
    };
    std::vector<Function> functions;        // shares must sum to 1 +- 1e-9
    std::uint64_t duration_us = 10'000'000;
    // Base power per domain. Unless uniform_power is set, each function
    // draws an integer multiple (1x..4x, seeded) of the base, so energy
    // shares and time shares differ while staying exact per construction.
    std::map<EnergyDomain, std::uint64_t> domain_power_uw = {
        {{DomainKind::Package, 0}, 4'000'000},
        {{DomainKind::PowerPlane0, 0}, 3'000'000},
        {{DomainKind::PowerPlane1, 0}, 0},
        {{DomainKind::Dram, 0}, 1'000'000},
    };
    int segments_per_function = 8;
    bool uniform_power = false;
};

// Deterministic for a given seed. Realized per-function energy shares match
// the spec shares within 1e-6 (rounding of segment times is the only slack);
// segment order is shuffled by the seed.
ExecutionTrace generate_trace(const TraceGenSpec& spec, std::uint64_t seed);

}  // namespace jprof
