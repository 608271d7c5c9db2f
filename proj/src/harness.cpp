#include "jprof/harness.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "jprof/errors.hpp"
#include "jprof/spans.hpp"
#include "jprof/units_io.hpp"

namespace jprof {

int cores_from_meta(const std::map<std::string, std::string>& meta) {
    auto it = meta.find("cores");
    if (it == meta.end())
        throw InvalidArgument("machine metadata is missing 'cores'");
    try {
        std::size_t used = 0;
        int cores = std::stoi(it->second, &used);
        if (used != it->second.size() || cores <= 0) throw std::exception();
        return cores;
    } catch (const std::exception&) {
        throw InvalidArgument("bad core count '" + it->second + "'");
    }
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

WorkloadSpec parse_sweep_config(std::istream& in) {
    WorkloadSpec spec;
    spec.cooldown_us = 10'000'000;
    bool have_command = false, have_threads = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected 'key = value'", line_no);
        std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        try {
            if (key == "command") {
                spec.command = value;
                have_command = !value.empty();
            } else if (key == "threads") {
                std::stringstream ss(value);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    int n = std::stoi(trim(item));
                    if (n <= 0) throw InvalidArgument("thread count must be positive");
                    spec.thread_counts.push_back(n);
                }
                have_threads = !spec.thread_counts.empty();
            } else if (key == "events") {
                spec.events_per_run = std::stoull(value);
            } else if (key == "repetitions") {
                spec.repetitions = std::stoi(value);
                if (spec.repetitions < 1)
                    throw InvalidArgument("need at least one repetition");
            } else if (key == "cooldown") {
                spec.cooldown_us = parse_duration_us(value);
            } else if (key.rfind("meta.", 0) == 0) {
                spec.machine_meta[key.substr(5)] = value;
            } else {
                throw InvalidArgument("unknown key '" + key + "'");
            }
        } catch (const std::exception& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!have_command) throw InvalidArgument("sweep config has no command");
    if (!have_threads) throw InvalidArgument("sweep config has no thread counts");
    return spec;
}

namespace {

std::string substitute_threads(const std::string& command, int threads) {
    std::string out = command;
    const std::string token = "{threads}";
    std::size_t at;
    while ((at = out.find(token)) != std::string::npos)
        out.replace(at, token.size(), std::to_string(threads));
    return out;
}

// Runs the command under sh, captures stdout, inherits stderr.
struct ChildRun {
    std::string stdout_text;
    int exit_status = -1;
    bool exited = false;
};

ChildRun run_child(const std::string& command) {
    ChildRun run;
    FILE* pipe = ::popen(command.c_str(), "r");
    if (!pipe) throw SpawnFailure("cannot spawn: " + command);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
        run.stdout_text.append(buf, n);
    int status = ::pclose(pipe);
    if (status == -1) throw SpawnFailure("lost child process: " + command);
    run.exited = WIFEXITED(status);
    run.exit_status = run.exited ? WEXITSTATUS(status) : -WTERMSIG(status);
    return run;
}

// Last "events: <n>" line wins.
std::optional<std::uint64_t> parse_events(const std::string& text) {
    std::optional<std::uint64_t> events;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        std::string t = trim(line);
        if (t.rfind("events:", 0) != 0) continue;
        std::string num = trim(t.substr(7));
        if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
            continue;
        events = std::strtoull(num.c_str(), nullptr, 10);
    }
    return events;
}

void attach_external(std::vector<RunResult>& results, const PowerSeries& series,
                     std::int64_t offset_us, const BaselineEstimate* baseline,
                     std::ostream* log) {
    for (RunResult& r : results) {
        std::int64_t t0 = static_cast<std::int64_t>(r.start_us) + offset_us;
        std::int64_t t1 = static_cast<std::int64_t>(r.end_us) + offset_us;
        if (t0 < 0 || t1 < t0) continue;
        try {
            double joules =
                baseline ? net_energy(series, t0, t1, *baseline, true)
                         : integrate(series, t0, t1, true);
            r.external_joules = joules;
        } catch (const CoverageError& e) {
            if (log)
                *log << "external series does not cover run t" << r.threads << ":r"
                     << r.repetition << ": " << e.what() << "\n";
        }
    }
}

}  // namespace

std::vector<RunResult> run_sweep(const WorkloadSpec& spec, EnergySource* source,
                                 const SweepOptions& options) {
    if (spec.command.empty()) throw InvalidArgument("sweep has no command");
    if (spec.thread_counts.empty()) throw InvalidArgument("sweep has no thread counts");
    if (spec.repetitions < 1) throw InvalidArgument("need at least one repetition");
    for (int t : spec.thread_counts)
        if (t <= 0) throw InvalidArgument("thread count must be positive");

    std::optional<SpanProfiler> profiler;
    if (source) profiler.emplace(*source);
    std::optional<PduPoller> poller;
    if (options.pdu) {
        poller.emplace(*options.pdu);
        poller->start();
    }

    std::vector<RunResult> results;
    for (int threads : spec.thread_counts) {
        std::string command = substitute_threads(spec.command, threads);
        for (int rep = 1; rep <= spec.repetitions; ++rep) {
            if (!results.empty() && spec.cooldown_us > 0)
                std::this_thread::sleep_for(
                    std::chrono::microseconds(spec.cooldown_us));
            RunResult result;
            result.threads = threads;
            result.repetition = rep;
            if (options.log)
                *options.log << "run t" << threads << ":r" << rep << ": " << command
                             << "\n";
            std::optional<SpanHandle> span;
            if (profiler)
                span = profiler->begin_span(
                    "t" + std::to_string(threads) + ":r" + std::to_string(rep));
            result.start_us = monotonic_now_us();
            ChildRun child = run_child(command);
            result.end_us = monotonic_now_us();
            if (span) {
                SpanReport report = profiler->end_span(*span);
                for (const auto& [domain, cell] : report.domains)
                    result.energy_uj[domain] = cell.energy_uj;
            }
            result.wall_time_us = result.end_us - result.start_us;
            result.exit_status = child.exit_status;
            result.success = child.exited && child.exit_status == 0;
            std::optional<std::uint64_t> events = parse_events(child.stdout_text);
            result.events_from_output = events.has_value();
            result.events = events.value_or(spec.events_per_run);
            if (options.log && !result.success)
                *options.log << "run t" << threads << ":r" << rep
                             << " failed with status " << result.exit_status << "\n";
            results.push_back(std::move(result));
        }
    }

    if (poller) {
        PowerSeries series = poller->stop();
        attach_external(results, series, 0, options.external_baseline, options.log);
    }
    if (options.external)
        attach_external(results, *options.external, options.external_offset_us,
                        options.external_baseline, options.log);
    return results;
}

EfficiencyMetrics compute_metrics(const RunResult& result, int cores) {
    if (cores <= 0) throw InvalidArgument("core count must be positive");
    EfficiencyMetrics m;
    m.threads = result.threads;
    m.events = result.events;
    m.wall_time_s = static_cast<double>(result.wall_time_us) / 1e6;
    m.zero_events = result.events == 0;
    m.overcommitted = result.threads > cores;
    if (m.wall_time_s > 0) {
        m.events_per_second = static_cast<double>(result.events) / m.wall_time_s;
        m.events_per_second_per_core = m.events_per_second / cores;
    }
    for (const auto& [domain, uj] : result.energy_uj) {
        double joules = static_cast<double>(uj) / 1e6;
        m.joules[domain] = joules;
        if (result.events > 0)
            m.joules_per_event[domain] = joules / static_cast<double>(result.events);
        if (joules > 0)
            m.events_per_joule[domain] = static_cast<double>(result.events) / joules;
    }
    m.external_joules = result.external_joules;
    if (result.external_joules && result.events > 0 && *result.external_joules > 0)
        m.external_joules_per_event =
            *result.external_joules / static_cast<double>(result.events);
    return m;
}

namespace {

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

// Median over the values present in every sample (absent in any => absent).
template <typename Get>
std::optional<double> median_optional(const std::vector<EfficiencyMetrics>& samples,
                                      Get get) {
    std::vector<double> values;
    for (const EfficiencyMetrics& m : samples) {
        std::optional<double> v = get(m);
        if (!v) return std::nullopt;
        values.push_back(*v);
    }
    return median_of(std::move(values));
}

}  // namespace

EfficiencyMetrics median_metrics(const std::vector<EfficiencyMetrics>& samples) {
    if (samples.empty()) throw InvalidArgument("no metrics to aggregate");
    EfficiencyMetrics m;
    m.threads = samples.front().threads;
    std::vector<double> events, wall, eps, epspc;
    for (const EfficiencyMetrics& s : samples) {
        events.push_back(static_cast<double>(s.events));
        wall.push_back(s.wall_time_s);
        eps.push_back(s.events_per_second);
        epspc.push_back(s.events_per_second_per_core);
        m.zero_events = m.zero_events || s.zero_events;
        m.overcommitted = m.overcommitted || s.overcommitted;
    }
    m.events = static_cast<std::uint64_t>(std::llround(median_of(events)));
    m.wall_time_s = median_of(wall);
    m.events_per_second = median_of(eps);
    m.events_per_second_per_core = median_of(epspc);

    for (const auto& [domain, unused] : samples.front().joules) {
        auto in_all = [&](auto pick) -> std::optional<double> {
            std::vector<double> values;
            for (const EfficiencyMetrics& s : samples) {
                auto v = pick(s);
                if (!v) return std::nullopt;
                values.push_back(*v);
            }
            return median_of(std::move(values));
        };
        auto find = [&](const std::map<EnergyDomain, double>& map)
            -> std::optional<double> {
            auto it = map.find(domain);
            if (it == map.end()) return std::nullopt;
            return it->second;
        };
        if (auto v = in_all([&](const EfficiencyMetrics& s) { return find(s.joules); }))
            m.joules[domain] = *v;
        if (auto v = in_all(
                [&](const EfficiencyMetrics& s) { return find(s.joules_per_event); }))
            m.joules_per_event[domain] = *v;
        if (auto v = in_all(
                [&](const EfficiencyMetrics& s) { return find(s.events_per_joule); }))
            m.events_per_joule[domain] = *v;
    }
    m.external_joules = median_optional(
        samples, [](const EfficiencyMetrics& s) { return s.external_joules; });
    m.external_joules_per_event = median_optional(
        samples, [](const EfficiencyMetrics& s) { return s.external_joules_per_event; });
    return m;
}

namespace {

std::map<int, EfficiencyMetrics> medians_by_threads(const SweepSide& side) {
    int cores = cores_from_meta(side.machine_meta);
    std::map<int, std::vector<EfficiencyMetrics>> grouped;
    for (const RunResult& r : side.results)
        grouped[r.threads].push_back(compute_metrics(r, cores));
    std::map<int, EfficiencyMetrics> medians;
    for (const auto& [threads, metrics] : grouped)
        medians.emplace(threads, median_metrics(metrics));
    return medians;
}

void add_ratio(std::map<std::string, double>& ratios, const std::string& key,
               double a, double b) {
    if (a > 0) ratios[key] = b / a;
}

}  // namespace

ComparisonTable compare_runs(const SweepSide& a, const SweepSide& b) {
    ComparisonTable table;
    table.label_a = a.label.empty() ? "a" : a.label;
    table.label_b = b.label.empty() ? "b" : b.label;
    std::map<int, EfficiencyMetrics> ma = medians_by_threads(a);
    std::map<int, EfficiencyMetrics> mb = medians_by_threads(b);
    for (const auto& [threads, metrics_a] : ma) {
        auto it = mb.find(threads);
        if (it == mb.end()) continue;
        ComparisonRow row;
        row.threads = threads;
        row.a = metrics_a;
        row.b = it->second;
        add_ratio(row.ratios, "wall_time_s", row.a.wall_time_s, row.b.wall_time_s);
        add_ratio(row.ratios, "events_per_second", row.a.events_per_second,
                  row.b.events_per_second);
        add_ratio(row.ratios, "events_per_second_per_core",
                  row.a.events_per_second_per_core, row.b.events_per_second_per_core);
        for (const auto& [domain, va] : row.a.joules_per_event) {
            auto jb = row.b.joules_per_event.find(domain);
            if (jb != row.b.joules_per_event.end())
                add_ratio(row.ratios, "joules_per_event." + to_string(domain), va,
                          jb->second);
        }
        for (const auto& [domain, va] : row.a.events_per_joule) {
            auto jb = row.b.events_per_joule.find(domain);
            if (jb != row.b.events_per_joule.end())
                add_ratio(row.ratios, "events_per_joule." + to_string(domain), va,
                          jb->second);
        }
        if (row.a.external_joules_per_event && row.b.external_joules_per_event)
            add_ratio(row.ratios, "external_joules_per_event",
                      *row.a.external_joules_per_event,
                      *row.b.external_joules_per_event);
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace jprof
