#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "jprof/source.hpp"

namespace jprof {

// Linux powercap (intel-rapl) counters. The root defaults to
// /sys/class/powercap but can be pointed anywhere (CLI --powercap-root or
// JPROF_POWERCAP_ROOT), which both enables fixture testing and lets any
// file tree exposing name/energy_uj/max_energy_range_uj act as a counter
// source. Files are read lazily on every tick; at 10 ms periods freshness
// beats the syscall cost.
class PowercapSource : public EnergySource {
public:
    explicit PowercapSource(std::filesystem::path root = default_root());

    std::vector<EnergyDomain> domains() override;
    CounterReading read(const EnergyDomain& domain) override;
    CounterRange range_of(const EnergyDomain& domain) override;

    bool supports_capping() const override { return true; }
    void set_power_cap(const CapConstraint& cap) override;

    // RAPL counter updates are in the millisecond range.
    std::uint64_t timestamp_precision_us() const override { return 1000; }

    const std::filesystem::path& root() const { return root_; }

    static std::filesystem::path default_root();
    static bool available(const std::filesystem::path& root = default_root());

private:
    struct DomainDir {
        EnergyDomain domain;
        std::filesystem::path dir;
        CounterRange range;
    };

    const DomainDir& lookup(const EnergyDomain& domain) const;

    std::filesystem::path root_;
    std::vector<DomainDir> dirs_;
};

}  // namespace jprof
