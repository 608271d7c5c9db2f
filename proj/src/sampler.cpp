#include "jprof/sampler.hpp"

#include <chrono>
#include <thread>

#include "jprof/errors.hpp"

namespace jprof {

std::uint64_t Profile::total_hits(const EnergyDomain& domain) const {
    std::uint64_t total = 0;
    for (const auto& [fn, row] : rows) {
        auto it = row.hits.find(domain);
        if (it != row.hits.end()) total += it->second;
    }
    return total;
}

std::uint64_t Profile::energy_uj(FunctionId fn, const EnergyDomain& domain) const {
    auto row = rows.find(fn);
    if (row == rows.end()) return 0;
    auto it = row->second.hits.find(domain);
    if (it == row->second.hits.end()) return 0;
    return it->second * config.threshold_uj.at(domain);
}

void prime(Accumulator& acc, std::span<const CounterReading> readings) {
    for (const CounterReading& r : readings) acc.last[r.domain] = r;
}

namespace {

CounterRange range_for(const Accumulator& acc, const EnergyDomain& domain) {
    auto it = acc.range.find(domain);
    return it != acc.range.end() ? it->second : CounterRange{UINT64_MAX};
}

std::uint64_t threshold_for(const Profile& profile, const EnergyDomain& domain) {
    auto it = profile.config.threshold_uj.find(domain);
    if (it == profile.config.threshold_uj.end() || it->second == 0)
        throw InvalidArgument("no threshold configured for domain " + to_string(domain));
    return it->second;
}

}  // namespace

std::map<EnergyDomain, std::uint64_t> tick(Accumulator& acc,
                                           std::span<const CounterReading> readings,
                                           FunctionId current, Profile& profile) {
    std::map<EnergyDomain, std::uint64_t> emitted;
    for (const CounterReading& r : readings) {
        std::uint64_t threshold = threshold_for(profile, r.domain);
        auto last = acc.last.find(r.domain);
        if (last == acc.last.end()) {
            acc.last[r.domain] = r;
            emitted[r.domain] = 0;
            continue;
        }
        std::uint64_t delta = delta_energy(last->second, r, range_for(acc, r.domain));
        std::uint64_t residual = acc.residual_uj[r.domain] + delta;
        std::uint64_t hits = residual / threshold;
        acc.residual_uj[r.domain] = residual % threshold;
        acc.last[r.domain] = r;
        emitted[r.domain] = hits;
        if (hits > 0) profile.rows[current].hits[r.domain] += hits;
        profile.total_energy_uj[r.domain] += delta;
        profile.residual_uj[r.domain] = acc.residual_uj[r.domain];
    }
    profile.rows[current].perf_ticks += 1;
    profile.total_ticks += 1;
    return emitted;
}

std::map<EnergyDomain, std::uint64_t> tick(Accumulator& acc,
                                           const CounterReading& reading,
                                           FunctionId current, Profile& profile) {
    return tick(acc, std::span<const CounterReading>(&reading, 1), current, profile);
}

namespace {

std::vector<EnergyDomain> resolve_domains(EnergySource& source,
                                          const SamplerConfig& config) {
    std::vector<EnergyDomain> sampled =
        config.domains.empty() ? source.domains() : config.domains;
    if (sampled.empty()) throw InvalidArgument("no domains to sample");
    return sampled;
}

Profile init_profile(EnergySource& source, const SamplerConfig& config,
                     const std::vector<EnergyDomain>& sampled, Accumulator& acc) {
    Profile profile;
    profile.config = config;
    profile.config.domains = sampled;
    for (const EnergyDomain& d : sampled) {
        threshold_for(profile, d);
        acc.range[d] = source.range_of(d);
    }
    return profile;
}

}  // namespace

Profile run_sampling(SyntheticSource& source, const ContextProvider& context,
                     const SamplerConfig& config, std::uint64_t duration_us) {
    std::vector<EnergyDomain> sampled = resolve_domains(source, config);
    Accumulator acc;
    Profile profile = init_profile(source, config, sampled, acc);
    if (config.period_us == 0) throw InvalidArgument("sampling period must be positive");

    std::uint64_t t0 = source.now_us();
    std::vector<CounterReading> readings;
    readings.reserve(sampled.size());
    for (const EnergyDomain& d : sampled) readings.push_back(source.read(d));
    prime(acc, readings);

    std::uint64_t ticks = (duration_us + config.period_us - 1) / config.period_us;
    for (std::uint64_t k = 1; k <= ticks; ++k) {
        source.set_time(t0 + k * config.period_us);
        readings.clear();
        for (const EnergyDomain& d : sampled) readings.push_back(source.read(d));
        FunctionId fn = context.current(source.now_us());
        tick(acc, readings, fn, profile);
    }
    profile.wall_time_us = source.now_us() - t0;
    profile.registry = context.registry();
    return profile;
}

Profile run_sampling_live(EnergySource& source, const ContextProvider& context,
                          const SamplerConfig& config, std::uint64_t duration_us,
                          const std::atomic<bool>* stop) {
    std::vector<EnergyDomain> sampled = resolve_domains(source, config);
    Accumulator acc;
    Profile profile = init_profile(source, config, sampled, acc);
    if (config.period_us == 0) throw InvalidArgument("sampling period must be positive");

    auto start = std::chrono::steady_clock::now();
    std::uint64_t t0 = monotonic_now_us();
    std::vector<CounterReading> readings;
    readings.reserve(sampled.size());
    for (const EnergyDomain& d : sampled) readings.push_back(source.read(d));
    prime(acc, readings);

    std::uint64_t self_time = 0;
    std::uint64_t ticks = (duration_us + config.period_us - 1) / config.period_us;
    for (std::uint64_t k = 1; k <= ticks; ++k) {
        if (stop && stop->load(std::memory_order_relaxed)) break;
        std::this_thread::sleep_until(
            start + std::chrono::microseconds(k * config.period_us));
        auto before = std::chrono::steady_clock::now();
        readings.clear();
        for (const EnergyDomain& d : sampled) readings.push_back(source.read(d));
        FunctionId fn = context.current(monotonic_now_us());
        tick(acc, readings, fn, profile);
        self_time += std::chrono::duration_cast<std::chrono::microseconds>(
                         std::chrono::steady_clock::now() - before)
                         .count();
    }
    profile.wall_time_us = monotonic_now_us() - t0;
    profile.sampler_self_time_us = self_time;
    profile.registry = context.registry();
    return profile;
}

std::uint64_t auto_threshold_uj(std::uint64_t idle_power_uw, std::uint64_t period_us) {
    uint128 uj = uint128(idle_power_uw) * period_us / 1'000'000u;
    std::uint64_t threshold = static_cast<std::uint64_t>(uj * 5u);
    return threshold > 0 ? threshold : 1;
}

std::map<FunctionId, double> estimate_shares(const Profile& profile,
                                             const EnergyDomain& domain) {
    std::uint64_t total = profile.total_hits(domain);
    if (total == 0)
        throw EmptyProfile("no hits recorded for domain " + to_string(domain));
    std::map<FunctionId, double> shares;
    for (const auto& [fn, row] : profile.rows) {
        auto it = row.hits.find(domain);
        if (it != row.hits.end() && it->second > 0)
            shares[fn] = static_cast<double>(it->second) / static_cast<double>(total);
    }
    return shares;
}

Profile merge_profiles(const Profile& a, const Profile& b) {
    if (a.config != b.config)
        throw ConfigMismatch("profiles sampled with different configurations");
    Profile merged;
    merged.config = a.config;
    merged.registry = a.registry;
    merged.rows = a.rows;
    for (const auto& [fn, row] : b.rows) {
        FunctionId id = merged.registry.intern(b.registry.name(fn));
        ProfileRow& target = merged.rows[id];
        target.perf_ticks += row.perf_ticks;
        for (const auto& [domain, hits] : row.hits) target.hits[domain] += hits;
    }
    merged.total_ticks = a.total_ticks + b.total_ticks;
    merged.wall_time_us = a.wall_time_us + b.wall_time_us;
    merged.sampler_self_time_us = a.sampler_self_time_us + b.sampler_self_time_us;
    for (const Profile* p : {&a, &b}) {
        for (const auto& [domain, uj] : p->total_energy_uj)
            merged.total_energy_uj[domain] += uj;
        for (const auto& [domain, uj] : p->residual_uj)
            merged.residual_uj[domain] += uj;
    }
    return merged;
}

}  // namespace jprof
