#include "jprof/domain.hpp"

#include <charconv>
#include <chrono>

namespace jprof {

std::string_view to_string(DomainKind kind) {
    switch (kind) {
        case DomainKind::Package: return "pkg";
        case DomainKind::PowerPlane0: return "pp0";
        case DomainKind::PowerPlane1: return "pp1";
        case DomainKind::Dram: return "dram";
        case DomainKind::Node: return "node";
    }
    return "?";
}

DomainKind parse_domain_kind(std::string_view text) {
    if (text == "pkg") return DomainKind::Package;
    if (text == "pp0") return DomainKind::PowerPlane0;
    if (text == "pp1") return DomainKind::PowerPlane1;
    if (text == "dram") return DomainKind::Dram;
    if (text == "node") return DomainKind::Node;
    throw UnknownDomain("unknown energy domain '" + std::string(text) + "'");
}

std::string to_string(const EnergyDomain& domain) {
    std::string s{to_string(domain.kind)};
    if (domain.socket != 0) {
        s += '@';
        s += std::to_string(domain.socket);
    }
    return s;
}

EnergyDomain parse_domain(std::string_view text) {
    EnergyDomain d;
    auto at = text.find('@');
    if (at == std::string_view::npos) {
        d.kind = parse_domain_kind(text);
        return d;
    }
    d.kind = parse_domain_kind(text.substr(0, at));
    auto rest = text.substr(at + 1);
    int socket = -1;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), socket);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || socket < 0)
        throw UnknownDomain("bad socket index in domain '" + std::string(text) + "'");
    d.socket = socket;
    return d;
}

void validate(const CapConstraint& cap) {
    if (cap.limit_uw == 0) throw InvalidArgument("cap limit_uw must be > 0");
    if (cap.window_us == 0) throw InvalidArgument("cap window_us must be > 0");
}

std::uint64_t delta_energy(const CounterReading& prev, const CounterReading& next,
                           const CounterRange& range) {
    if (prev.domain != next.domain)
        throw DomainMismatch("delta_energy across domains " + to_string(prev.domain) + " and " +
                             to_string(next.domain));
    if (next.timestamp_us < prev.timestamp_us)
        throw TimestampRegression("counter timestamp went backwards");
    if (next.energy_uj >= prev.energy_uj) return next.energy_uj - prev.energy_uj;
    // Counter wrapped: it counts 0..max_range_uj inclusive.
    return next.energy_uj - prev.energy_uj + range.max_range_uj + 1;
}

std::uint64_t monotonic_now_us() {
    auto now = std::chrono::steady_clock::now().time_since_epoch();
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::microseconds>(now).count());
}

}  // namespace jprof
