#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jprof/domain.hpp"
#include "jprof/meters.hpp"
#include "jprof/source.hpp"

namespace jprof {

// Runs a workload across a ladder of thread counts, brackets every run
// with counter readings, and turns the numbers into throughput and
// energy-efficiency metrics that are comparable across machines.

struct WorkloadSpec {
    std::string command;  // "{threads}" is replaced per run
    std::vector<int> thread_counts;
    // Used when the workload does not print an "events: <n>" line.
    std::uint64_t events_per_run = 0;
    int repetitions = 1;
    std::uint64_t cooldown_us = 10'000'000;
    std::map<std::string, std::string> machine_meta;
};

struct RunResult {
    int threads = 0;
    int repetition = 0;  // 1-based
    std::uint64_t start_us = 0;
    std::uint64_t end_us = 0;
    std::uint64_t wall_time_us = 0;
    std::uint64_t events = 0;
    bool events_from_output = false;
    std::map<EnergyDomain, std::uint64_t> energy_uj;
    std::optional<double> external_joules;
    int exit_status = 0;
    bool success = false;
};

struct EfficiencyMetrics {
    int threads = 0;
    std::uint64_t events = 0;
    double wall_time_s = 0;
    double events_per_second = 0;
    double events_per_second_per_core = 0;
    std::map<EnergyDomain, double> joules;
    // Only filled when events > 0 / energy > 0 respectively.
    std::map<EnergyDomain, double> joules_per_event;
    std::map<EnergyDomain, double> events_per_joule;
    std::optional<double> external_joules;
    std::optional<double> external_joules_per_event;
    bool zero_events = false;
    bool overcommitted = false;  // more threads than cores
};

struct SweepOptions {
    // Pre-recorded node-level series to attribute to runs, with the offset
    // that maps its timebase onto ours.
    const PowerSeries* external = nullptr;
    std::int64_t external_offset_us = 0;
    const BaselineEstimate* external_baseline = nullptr;
    std::optional<PduEndpoint> pdu;  // poll while the sweep runs
    std::ostream* log = nullptr;
};

// "cores" entry of the machine metadata, needed for per-core rates.
int cores_from_meta(const std::map<std::string, std::string>& meta);

// Sweep config file: `key = value` lines, '#' comments. Keys: command,
// threads (comma list), events, repetitions, cooldown, meta.<name>.
WorkloadSpec parse_sweep_config(std::istream& in);

// Runs every (threads, repetition) pair with a cooldown pause between
// runs. `source` may be null; energy maps stay empty then. The workload's
// stdout is scanned for `events: <n>` (last wins); its stderr passes
// through.
std::vector<RunResult> run_sweep(const WorkloadSpec& spec, EnergySource* source,
                                 const SweepOptions& options = {});

EfficiencyMetrics compute_metrics(const RunResult& result, int cores);

// Field-wise median over runs of the same thread count.
EfficiencyMetrics median_metrics(const std::vector<EfficiencyMetrics>& samples);

struct SweepSide {
    std::string label;
    std::vector<RunResult> results;
    std::map<std::string, std::string> machine_meta;
};

struct ComparisonRow {
    int threads = 0;
    EfficiencyMetrics a;
    EfficiencyMetrics b;
    // b over a, keyed by metric name; per-domain keys look like
    // "joules_per_event.pkg".
    std::map<std::string, double> ratios;
};

struct ComparisonTable {
    std::string label_a;
    std::string label_b;
    std::vector<ComparisonRow> rows;
};

// Lines up two sweeps by thread count (medians per side) and reports
// b/a ratios for every metric both sides define.
ComparisonTable compare_runs(const SweepSide& a, const SweepSide& b);

}  // namespace jprof
