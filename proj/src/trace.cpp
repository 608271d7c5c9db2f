#include "jprof/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "jprof/rng.hpp"

namespace jprof {

FunctionRegistry::FunctionRegistry() {
    names_.emplace_back("unattributed");
    by_name_.emplace("unattributed", kUnattributed);
}

FunctionId FunctionRegistry::intern(std::string_view name) {
    if (name.empty()) throw InvalidArgument("function name must be non-empty");
    if (auto it = by_name_.find(name); it != by_name_.end()) return it->second;
    FunctionId id = static_cast<FunctionId>(names_.size());
    names_.emplace_back(name);
    by_name_.emplace(names_.back(), id);
    return id;
}

std::optional<FunctionId> FunctionRegistry::find(std::string_view name) const {
    if (auto it = by_name_.find(name); it != by_name_.end()) return it->second;
    return std::nullopt;
}

const std::string& FunctionRegistry::name(FunctionId id) const {
    if (id >= names_.size()) throw OutOfRange("unknown function id " + std::to_string(id));
    return names_[id];
}

ExecutionTrace::ExecutionTrace(FunctionRegistry registry, std::vector<TraceSegment> segments)
    : registry_(std::move(registry)), segments_(std::move(segments)) {
    std::uint64_t cursor = 0;
    std::set<EnergyDomain> domain_set;
    for (const auto& seg : segments_) {
        if (seg.start_us != cursor)
            throw InvalidArgument("trace segments must be contiguous from t=0");
        if (seg.end_us <= seg.start_us) throw InvalidArgument("trace segment must have end > start");
        if (seg.function >= registry_.size())
            throw InvalidArgument("trace segment references unknown function id");
        cursor = seg.end_us;
        for (const auto& [dom, uw] : seg.power_uw) domain_set.insert(dom);
    }
    domains_.assign(domain_set.begin(), domain_set.end());
    prefix_pj_.assign(domains_.size(), std::vector<uint128>(segments_.size() + 1, 0));
    for (std::size_t d = 0; d < domains_.size(); ++d) {
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& seg = segments_[i];
            std::uint64_t uw = 0;
            if (auto it = seg.power_uw.find(domains_[d]); it != seg.power_uw.end()) uw = it->second;
            prefix_pj_[d][i + 1] =
                prefix_pj_[d][i] + uint128(uw) * uint128(seg.end_us - seg.start_us);
        }
    }
}

std::uint64_t ExecutionTrace::duration_us() const {
    return segments_.empty() ? 0 : segments_.back().end_us;
}

std::optional<std::size_t> ExecutionTrace::domain_index(const EnergyDomain& domain) const {
    auto it = std::lower_bound(domains_.begin(), domains_.end(), domain);
    if (it == domains_.end() || *it != domain) return std::nullopt;
    return static_cast<std::size_t>(it - domains_.begin());
}

std::size_t ExecutionTrace::segment_index_at(std::uint64_t t_us) const {
    // Last segment with start <= t; contiguity guarantees t < its end.
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t_us,
                               [](std::uint64_t t, const TraceSegment& s) { return t < s.start_us; });
    return static_cast<std::size_t>(it - segments_.begin()) - 1;
}

uint128 ExecutionTrace::cumulative_pj(std::uint64_t t_us, std::size_t d) const {
    if (t_us == 0 || segments_.empty()) return 0;
    if (t_us >= duration_us()) return prefix_pj_[d].back();
    std::size_t i = segment_index_at(t_us);
    const auto& seg = segments_[i];
    std::uint64_t uw = 0;
    if (auto it = seg.power_uw.find(domains_[d]); it != seg.power_uw.end()) uw = it->second;
    return prefix_pj_[d][i] + uint128(uw) * uint128(t_us - seg.start_us);
}

uint128 ExecutionTrace::energy_pj_between(std::uint64_t t0_us, std::uint64_t t1_us,
                                          const EnergyDomain& domain) const {
    if (t0_us > t1_us || t1_us > duration_us())
        throw OutOfRange("interval outside the trace span");
    auto d = domain_index(domain);
    if (!d) return 0;
    return cumulative_pj(t1_us, *d) - cumulative_pj(t0_us, *d);
}

std::uint64_t ExecutionTrace::cumulative_uj(std::uint64_t t_us, const EnergyDomain& domain) const {
    if (t_us > duration_us()) throw OutOfRange("time outside the trace span");
    auto d = domain_index(domain);
    if (!d) return 0;
    return static_cast<std::uint64_t>(cumulative_pj(t_us, *d) / 1'000'000);
}

std::uint64_t ExecutionTrace::energy_uj_between(std::uint64_t t0_us, std::uint64_t t1_us,
                                                const EnergyDomain& domain) const {
    if (t0_us > t1_us) throw OutOfRange("interval outside the trace span");
    return cumulative_uj(t1_us, domain) - cumulative_uj(t0_us, domain);
}

FunctionId ExecutionTrace::function_at(std::uint64_t t_us) const {
    if (t_us >= duration_us()) throw OutOfRange("time outside the trace span");
    return segments_[segment_index_at(t_us)].function;
}

FunctionId ExecutionTrace::function_for_tick(std::uint64_t t_us) const {
    std::uint64_t end = duration_us();
    if (end == 0) return kUnattributed;
    if (t_us > end) throw OutOfRange("tick past the end of the trace");
    return function_at(std::min(t_us, end - 1));
}

std::map<FunctionId, uint128> ExecutionTrace::per_function_energy_pj(
    const EnergyDomain& domain) const {
    std::map<FunctionId, uint128> out;
    auto d = domain_index(domain);
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        uint128 pj = 0;
        if (d) pj = prefix_pj_[*d][i + 1] - prefix_pj_[*d][i];
        out[segments_[i].function] += pj;
    }
    return out;
}

uint128 ExecutionTrace::total_energy_pj(const EnergyDomain& domain) const {
    auto d = domain_index(domain);
    if (!d || segments_.empty()) return 0;
    return prefix_pj_[*d].back();
}

std::map<FunctionId, double> ExecutionTrace::energy_shares(const EnergyDomain& domain) const {
    auto per_fn = per_function_energy_pj(domain);
    uint128 total = total_energy_pj(domain);
    std::map<FunctionId, double> shares;
    for (const auto& [fn, pj] : per_fn)
        shares[fn] = total == 0 ? 0.0
                                : static_cast<double>(static_cast<long double>(pj) /
                                                      static_cast<long double>(total));
    return shares;
}

void write_trace(const ExecutionTrace& trace, std::ostream& out) {
    out << "trace v1\n";
    for (FunctionId id = 0; id < trace.registry().size(); ++id)
        out << "fn " << id << ' ' << trace.registry().name(id) << '\n';
    for (const auto& seg : trace.segments()) {
        out << "seg " << seg.start_us << ' ' << seg.end_us << ' ' << seg.function << ' ';
        if (seg.power_uw.empty()) {
            out << '-';
        } else {
            bool first = true;
            for (const auto& [dom, uw] : seg.power_uw) {
                if (!first) out << ',';
                first = false;
                out << to_string(dom) << '=' << uw;
            }
        }
        out << '\n';
    }
}

namespace {

std::uint64_t parse_u64(const std::string& text, std::size_t line) {
    try {
        std::size_t pos = 0;
        if (text.empty() || text[0] == '-') throw std::invalid_argument("negative");
        std::uint64_t v = std::stoull(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad number '" + text + "'", line);
    }
}

}  // namespace

ExecutionTrace parse_trace(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty trace file", 1);
    ++lineno;
    if (line == "trace v1\r") line.pop_back();
    if (line != "trace v1") throw ParseError("expected header 'trace v1'", lineno);

    FunctionRegistry registry;
    std::vector<TraceSegment> segments;
    std::uint64_t cursor = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "fn") {
            std::string id_text;
            ls >> id_text;
            std::uint64_t declared = parse_u64(id_text, lineno);
            std::string name;
            std::getline(ls, name);
            if (!name.empty() && name.front() == ' ') name.erase(0, 1);
            if (name.empty()) throw ParseError("function name missing", lineno);
            FunctionId actual = registry.intern(name);
            if (actual != declared)
                throw ParseError("function id " + id_text + " does not match registration order",
                                 lineno);
        } else if (tag == "seg") {
            std::string a, b, f, powers;
            ls >> a >> b >> f >> powers;
            if (powers.empty()) throw ParseError("segment power list missing", lineno);
            TraceSegment seg;
            seg.start_us = parse_u64(a, lineno);
            seg.end_us = parse_u64(b, lineno);
            std::uint64_t fn = parse_u64(f, lineno);
            if (fn >= registry.size())
                throw ParseError("segment references undeclared function id " + f, lineno);
            seg.function = static_cast<FunctionId>(fn);
            if (seg.start_us != cursor)
                throw ParseError("segments must be contiguous from t=0", lineno);
            if (seg.end_us <= seg.start_us) throw ParseError("segment end must be > start", lineno);
            cursor = seg.end_us;
            if (powers != "-") {
                std::size_t pos = 0;
                while (pos < powers.size()) {
                    std::size_t comma = powers.find(',', pos);
                    std::string entry = powers.substr(
                        pos, comma == std::string::npos ? std::string::npos : comma - pos);
                    std::size_t eq = entry.find('=');
                    if (eq == std::string::npos)
                        throw ParseError("expected <domain>=<uw> in '" + entry + "'", lineno);
                    EnergyDomain dom;
                    try {
                        dom = parse_domain(entry.substr(0, eq));
                    } catch (const UnknownDomain& e) {
                        throw ParseError(e.what(), lineno);
                    }
                    std::uint64_t uw = parse_u64(entry.substr(eq + 1), lineno);
                    if (!seg.power_uw.emplace(dom, uw).second)
                        throw ParseError("duplicate domain in segment power list", lineno);
                    if (comma == std::string::npos) break;
                    pos = comma + 1;
                }
            }
            segments.push_back(std::move(seg));
        } else {
            throw ParseError("unknown line tag '" + tag + "'", lineno);
        }
    }
    try {
        return ExecutionTrace(std::move(registry), std::move(segments));
    } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), lineno);
    }
}

ExecutionTrace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trace file '" + path + "'");
    return parse_trace(in);
}

ExecutionTrace generate_trace(const TraceGenSpec& spec, std::uint64_t seed) {
    if (spec.functions.empty()) throw InvalidShares("at least one function required");
    if (spec.duration_us == 0) throw InvalidArgument("trace duration must be > 0");
    long double share_sum = 0;
    for (const auto& fn : spec.functions) {
        if (fn.energy_share < 0) throw InvalidShares("energy share must be >= 0");
        share_sum += fn.energy_share;
    }
    if (std::abs(static_cast<double>(share_sum) - 1.0) > 1e-9)
        throw InvalidShares("energy shares must sum to 1");

    DetRng rng(seed);
    std::size_t n = spec.functions.size();

    // Per-function power multiplier; time is then allotted so that
    // multiplier * time realizes the requested energy share exactly
    // (up to 1 us rounding per function, distributed largest-remainder).
    std::vector<std::uint64_t> multiplier(n, 1);
    if (!spec.uniform_power)
        for (auto& m : multiplier) m = 1 + rng.below(4);

    std::vector<long double> weight(n);
    long double weight_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        weight[i] = static_cast<long double>(spec.functions[i].energy_share) /
                    static_cast<long double>(multiplier[i]);
        weight_sum += weight[i];
    }
    std::vector<std::uint64_t> alloc_us(n, 0);
    std::vector<std::pair<long double, std::size_t>> remainder;
    std::uint64_t allotted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        long double exact = weight[i] / weight_sum * static_cast<long double>(spec.duration_us);
        alloc_us[i] = static_cast<std::uint64_t>(exact);
        allotted += alloc_us[i];
        remainder.emplace_back(exact - static_cast<long double>(alloc_us[i]), i);
    }
    std::sort(remainder.begin(), remainder.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    for (std::size_t k = 0; allotted < spec.duration_us; ++k, ++allotted)
        ++alloc_us[remainder[k % n].second];

    FunctionRegistry registry;
    std::vector<FunctionId> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (registry.find(spec.functions[i].name))
            throw InvalidArgument("duplicate function name '" + spec.functions[i].name + "'");
        ids[i] = registry.intern(spec.functions[i].name);
    }

    struct Piece {
        std::uint64_t len_us;
        std::size_t fn_index;
    };
    std::vector<Piece> pieces;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t t = alloc_us[i];
        if (t == 0) continue;
        std::uint64_t k = std::min<std::uint64_t>(
            static_cast<std::uint64_t>(std::max(1, spec.segments_per_function)), t);
        std::set<std::uint64_t> cuts;
        while (cuts.size() + 1 < k) cuts.insert(1 + rng.below(t - 1));
        std::uint64_t prev = 0;
        for (std::uint64_t c : cuts) {
            pieces.push_back({c - prev, i});
            prev = c;
        }
        pieces.push_back({t - prev, i});
    }
    rng.shuffle(pieces);

    std::vector<TraceSegment> segments;
    segments.reserve(pieces.size());
    std::uint64_t cursor = 0;
    for (const auto& piece : pieces) {
        TraceSegment seg;
        seg.start_us = cursor;
        seg.end_us = cursor + piece.len_us;
        seg.function = ids[piece.fn_index];
        for (const auto& [dom, base_uw] : spec.domain_power_uw)
            seg.power_uw[dom] = base_uw * multiplier[piece.fn_index];
        cursor = seg.end_us;
        segments.push_back(std::move(seg));
    }
    return ExecutionTrace(std::move(registry), std::move(segments));
}

}  // namespace jprof
