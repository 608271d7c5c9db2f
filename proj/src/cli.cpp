#include "jprof/cli.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "jprof/capsim.hpp"
#include "jprof/errors.hpp"
#include "jprof/harness.hpp"
#include "jprof/meters.hpp"
#include "jprof/powercap.hpp"
#include "jprof/report.hpp"
#include "jprof/sampler.hpp"
#include "jprof/source.hpp"
#include "jprof/spans.hpp"
#include "jprof/trace.hpp"
#include "jprof/units_io.hpp"

namespace jprof {

namespace {

void emit(const std::string& document, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << document;
        std::cout.flush();
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + out_path);
    out << document;
}

std::string read_all(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<EnergyDomain> parse_domain_list(const std::string& text) {
    std::vector<EnergyDomain> domains;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) domains.push_back(parse_domain(item));
    return domains;
}

// "16mj" applies to every sampled domain, "pkg=16mj" to one.
void apply_threshold_specs(const std::vector<std::string>& specs,
                           const std::vector<EnergyDomain>& sampled,
                           std::map<EnergyDomain, std::uint64_t>& thresholds) {
    for (const std::string& spec : specs) {
        std::size_t eq = spec.find('=');
        if (eq == std::string::npos) {
            std::uint64_t uj = parse_energy_uj(spec);
            for (const EnergyDomain& d : sampled) thresholds[d] = uj;
        } else {
            thresholds[parse_domain(spec.substr(0, eq))] =
                parse_energy_uj(spec.substr(eq + 1));
        }
    }
}

std::string join_args(const std::vector<std::string>& args) {
    std::string out;
    for (const std::string& a : args) {
        if (!out.empty()) out += ' ';
        out += a;
    }
    return out;
}

PowercapSource open_powercap(const std::string& root_flag) {
    if (!root_flag.empty()) return PowercapSource(root_flag);
    return PowercapSource();
}

int cmd_replay(const std::string& trace_path, const std::string& period_text,
               const std::vector<std::string>& threshold_specs,
               const std::string& duration_text, const std::string& domains_text,
               const std::string& format_text, const std::string& out_path) {
    ExecutionTrace trace = load_trace(trace_path);
    SyntheticSource source(trace);
    SamplerConfig config;
    config.period_us = parse_duration_us(period_text);
    config.domains = domains_text.empty() ? trace.domains()
                                          : parse_domain_list(domains_text);
    for (const EnergyDomain& d : config.domains) {
        std::uint64_t avg_uw = static_cast<std::uint64_t>(
            trace.total_energy_pj(d) / std::max<std::uint64_t>(trace.duration_us(), 1));
        config.threshold_uj[d] = auto_threshold_uj(avg_uw, config.period_us);
    }
    apply_threshold_specs(threshold_specs, config.domains, config.threshold_uj);
    std::uint64_t duration = duration_text.empty() ? trace.duration_us()
                                                   : parse_duration_us(duration_text);
    TraceContext context(trace);
    Profile profile = run_sampling(source, context, config, duration);
    emit(render_flat(profile, parse_format(format_text)), out_path);
    return 0;
}

int cmd_sample(const std::string& duration_text, const std::string& period_text,
               const std::vector<std::string>& threshold_specs,
               const std::string& domains_text, const std::string& root_flag,
               const std::string& format_text, const std::string& out_path) {
    PowercapSource source = open_powercap(root_flag);
    SamplerConfig config;
    config.period_us = parse_duration_us(period_text);
    config.domains = domains_text.empty() ? source.domains()
                                          : parse_domain_list(domains_text);
    // Calibrate missing thresholds against current draw.
    std::map<EnergyDomain, std::uint64_t> specified;
    apply_threshold_specs(threshold_specs, config.domains, specified);
    std::vector<EnergyDomain> uncalibrated;
    for (const EnergyDomain& d : config.domains)
        if (!specified.count(d)) uncalibrated.push_back(d);
    if (!uncalibrated.empty()) {
        std::map<EnergyDomain, CounterReading> before;
        for (const EnergyDomain& d : uncalibrated) before[d] = source.read(d);
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        for (const EnergyDomain& d : uncalibrated) {
            CounterReading after = source.read(d);
            std::uint64_t dt = after.timestamp_us - before[d].timestamp_us;
            std::uint64_t idle_uw = dt > 0
                ? static_cast<std::uint64_t>(
                      uint128(delta_energy(before[d], after, source.range_of(d))) *
                      1'000'000u / dt)
                : 0;
            specified[d] = auto_threshold_uj(idle_uw, config.period_us);
            std::cerr << "calibrated threshold for " << to_string(d) << ": "
                      << specified[d] << " uj\n";
        }
    }
    config.threshold_uj = specified;
    ContextStack stack;  // nothing instrumented: everything is unattributed
    StackContext context(stack);
    Profile profile = run_sampling_live(source, context, config,
                                        parse_duration_us(duration_text));
    emit(render_flat(profile, parse_format(format_text)), out_path);
    return 0;
}

int cmd_span_run(std::string name, const std::vector<std::string>& command,
                 const std::string& root_flag, const std::string& format_text,
                 const std::string& out_path) {
    if (command.empty()) throw InvalidArgument("no command given after --");
    std::string command_line = join_args(command);
    if (name.empty()) name = command.front();
    PowercapSource source = open_powercap(root_flag);
    SpanProfiler profiler(source);
    SpanHandle span = profiler.begin_span(name);
    FILE* pipe = ::popen(command_line.c_str(), "r");
    if (!pipe) throw SpawnFailure("cannot spawn: " + command_line);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
        std::cerr.write(buf, static_cast<std::streamsize>(n));
    int status = ::pclose(pipe);
    profiler.end_span(span);
    emit(render_spans(profiler.span_tree(), parse_format(format_text)), out_path);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        std::cerr << "workload exited with status " << status << "\n";
        return 1;
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& root_flag,
              bool no_counters, const std::string& pdu_url,
              const std::string& pdu_interval_text, const std::string& external_csv,
              std::int64_t external_offset_us, const std::string& format_text,
              const std::string& out_path) {
    std::istringstream config_in(read_all(config_path));
    WorkloadSpec spec = parse_sweep_config(config_in);
    if (!spec.machine_meta.count("cores"))
        spec.machine_meta["cores"] =
            std::to_string(std::max(1u, std::thread::hardware_concurrency()));

    std::optional<PowercapSource> source;
    if (!no_counters) {
        try {
            source.emplace(open_powercap(root_flag));
        } catch (const Error& e) {
            std::cerr << "energy counters unavailable (" << e.what()
                      << "); timing only\n";
        }
    }
    SweepOptions options;
    options.log = &std::cerr;
    PowerSeries external;
    if (!external_csv.empty()) {
        std::istringstream csv_in(read_all(external_csv));
        external = ingest_csv(csv_in);
        options.external = &external;
        options.external_offset_us = external_offset_us;
    }
    if (!pdu_url.empty())
        options.pdu = PduEndpoint{pdu_url, parse_duration_us(pdu_interval_text), ""};

    std::vector<RunResult> results =
        run_sweep(spec, source ? &*source : nullptr, options);
    emit(render_sweep(results, spec.machine_meta, parse_format(format_text)), out_path);
    return 0;
}

int cmd_meter_ingest(const std::string& csv_path, const std::string& from_text,
                     const std::string& to_text, const std::string& idle_from_text,
                     const std::string& idle_to_text, bool allow_gaps,
                     const std::string& format_text, const std::string& out_path) {
    std::istringstream in(read_all(csv_path));
    PowerSeries series = ingest_csv(in);
    if (from_text.empty() != to_text.empty())
        throw InvalidArgument("--from and --to go together");
    if (from_text.empty()) {
        std::ostringstream out;
        export_csv(series, out);
        emit(out.str(), out_path);
        return 0;
    }
    std::uint64_t t0 = parse_duration_us(from_text);
    std::uint64_t t1 = parse_duration_us(to_text);
    double gross = integrate(series, t0, t1, allow_gaps);
    std::optional<BaselineEstimate> baseline;
    if (!idle_from_text.empty() || !idle_to_text.empty()) {
        if (idle_from_text.empty() || idle_to_text.empty())
            throw InvalidArgument("--idle-from and --idle-to go together");
        baseline = measure_idle_baseline(series, parse_duration_us(idle_from_text),
                                         parse_duration_us(idle_to_text));
    }
    Format format = parse_format(format_text);
    if (format == Format::Json) {
        std::ostringstream out;
        out << "{\n  \"schema\": \"joulescope-prof/v1\",\n  \"kind\": \"meter\",\n";
        out << "  \"window_us\": [" << t0 << ", " << t1 << "],\n";
        out << "  \"gross_joules\": " << format_sig6(gross);
        if (baseline) {
            out << ",\n  \"idle_power_w\": "
                << format_sig6(baseline->idle_power_uw / 1e6);
            out << ",\n  \"idle_stddev_w\": " << format_sig6(baseline->stddev_uw / 1e6);
            out << ",\n  \"net_joules\": "
                << format_sig6(net_energy(series, t0, t1, *baseline, allow_gaps));
        }
        out << "\n}\n";
        emit(out.str(), out_path);
    } else {
        std::ostringstream out;
        out << "window_us: [" << t0 << ", " << t1 << "]\n";
        out << "gross_joules: " << format_sig6(gross) << "\n";
        if (baseline) {
            out << "idle_power_w: " << format_sig6(baseline->idle_power_uw / 1e6)
                << " (stddev " << format_sig6(baseline->stddev_uw / 1e6) << ")\n";
            out << "net_joules: "
                << format_sig6(net_energy(series, t0, t1, *baseline, allow_gaps))
                << "\n";
        }
        emit(out.str(), out_path);
    }
    return 0;
}

int cmd_meter_poll(const std::string& url, const std::string& interval_text,
                   const std::string& duration_text, const std::string& token,
                   const std::string& out_path) {
    PduEndpoint endpoint{url, parse_duration_us(interval_text), token};
    PowerSeries series = poll_pdu(endpoint, parse_duration_us(duration_text));
    for (const SeriesGap& gap : series.gaps)
        std::cerr << "gap: " << gap.missed_polls << " missed poll(s) in ["
                  << gap.start_us << ", " << gap.end_us << "] us\n";
    std::ostringstream out;
    export_csv(series, out);
    emit(out.str(), out_path);
    return 0;
}

int cmd_report(const std::string& in_path, const std::string& format_text,
               const std::string& out_path) {
    emit(rerender(read_all(in_path), parse_format(format_text)), out_path);
    return 0;
}

int cmd_cap(const std::string& domain_text, const std::string& limit_text,
            const std::string& window_text, const std::string& trace_path,
            const std::string& root_flag, const std::string& out_path) {
    CapConstraint cap;
    cap.domain = parse_domain(domain_text);
    cap.limit_uw = parse_power_uw(limit_text);
    cap.window_us = parse_duration_us(window_text);
    validate(cap);
    if (!trace_path.empty()) {
        ExecutionTrace capped = enforce_cap_sim(load_trace(trace_path), cap);
        std::ostringstream out;
        write_trace(capped, out);
        emit(out.str(), out_path);
        return 0;
    }
    PowercapSource source = open_powercap(root_flag);
    source.set_power_cap(cap);
    std::cout << "cap set: " << to_string(cap.domain) << " limit " << cap.limit_uw
              << " uw window " << cap.window_us << " us\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"function-level energy profiler"};
    app.set_version_flag("--version", "jprof 1.0.0");
    app.require_subcommand(1);

    std::string out_path, format_text = "text", root_flag;

    auto* replay = app.add_subcommand(
        "replay", "sample a recorded execution trace deterministically");
    std::string rp_trace, rp_period = "1ms", rp_duration, rp_domains;
    std::vector<std::string> rp_thresholds;
    replay->add_option("--trace", rp_trace, "trace file")->required();
    replay->add_option("--period", rp_period, "sampling period (default 1ms)");
    replay->add_option("--threshold", rp_thresholds,
                       "energy threshold, e.g. 250uj or pkg=16mj");
    replay->add_option("--duration", rp_duration, "sampling duration");
    replay->add_option("--domains", rp_domains, "comma-separated domain list");
    replay->add_option("--format", format_text, "text|json|csv|svg");
    replay->add_option("-o,--output", out_path, "output file (default stdout)");

    auto* sample =
        app.add_subcommand("sample", "sample the live energy counters");
    std::string sm_duration, sm_period = "10ms", sm_domains;
    std::vector<std::string> sm_thresholds;
    sample->add_option("--duration", sm_duration, "sampling duration")->required();
    sample->add_option("--period", sm_period, "sampling period (default 10ms)");
    sample->add_option("--threshold", sm_thresholds,
                       "energy threshold, e.g. 250uj or pkg=16mj");
    sample->add_option("--domains", sm_domains, "comma-separated domain list");
    sample->add_option("--powercap-root", root_flag, "powercap sysfs root");
    sample->add_option("--format", format_text, "text|json|csv|svg");
    sample->add_option("-o,--output", out_path, "output file (default stdout)");

    auto* span_run = app.add_subcommand(
        "span-run", "run a command inside an instrumentation span");
    std::string sr_name;
    std::vector<std::string> sr_command;
    span_run->add_option("--name", sr_name, "span name (default: the command)");
    span_run->add_option("--powercap-root", root_flag, "powercap sysfs root");
    span_run->add_option("--format", format_text, "text|json");
    span_run->add_option("-o,--output", out_path, "output file (default stdout)");
    span_run->add_option("command", sr_command, "workload command, after --")
        ->expected(-1);

    auto* sweep = app.add_subcommand(
        "sweep", "run a workload across thread counts and report efficiency");
    std::string sw_config, sw_pdu_url, sw_pdu_interval = "1s", sw_external;
    std::int64_t sw_external_offset = 0;
    bool sw_no_counters = false;
    sweep->add_option("--config", sw_config, "sweep config file")->required();
    sweep->add_option("--powercap-root", root_flag, "powercap sysfs root");
    sweep->add_flag("--no-counters", sw_no_counters, "skip energy counters");
    sweep->add_option("--pdu-url", sw_pdu_url, "poll this PDU during the sweep");
    sweep->add_option("--pdu-interval", sw_pdu_interval, "PDU poll interval");
    sweep->add_option("--external-csv", sw_external,
                      "plug meter CSV covering the sweep");
    sweep->add_option("--external-offset", sw_external_offset,
                      "offset (us) mapping our clock onto the CSV timebase");
    sweep->add_option("--format", format_text, "text|json|csv");
    sweep->add_option("-o,--output", out_path, "output file (default stdout)");

    auto* meter = app.add_subcommand("meter", "external power meter utilities");
    meter->require_subcommand(1);
    auto* ingest = meter->add_subcommand("ingest", "validate and analyse a CSV series");
    std::string mi_csv, mi_from, mi_to, mi_idle_from, mi_idle_to;
    bool mi_allow_gaps = false;
    ingest->add_option("--csv", mi_csv, "CSV file, or - for stdin")->required();
    ingest->add_option("--from", mi_from, "integration window start");
    ingest->add_option("--to", mi_to, "integration window end");
    ingest->add_option("--idle-from", mi_idle_from, "idle window start");
    ingest->add_option("--idle-to", mi_idle_to, "idle window end");
    ingest->add_flag("--allow-gaps", mi_allow_gaps, "bridge gaps up to 3 polls");
    ingest->add_option("--format", format_text, "text|json");
    ingest->add_option("-o,--output", out_path, "output file (default stdout)");
    auto* poll = meter->add_subcommand("poll", "poll a PDU and emit a CSV series");
    std::string mp_url, mp_interval = "1s", mp_duration, mp_token;
    poll->add_option("--url", mp_url, "endpoint answering {\"power_w\": <number>}")
        ->required();
    poll->add_option("--interval", mp_interval, "poll interval (default 1s)");
    poll->add_option("--duration", mp_duration, "how long to poll")->required();
    poll->add_option("--token", mp_token, "bearer token");
    poll->add_option("-o,--output", out_path, "output file (default stdout)");

    auto* report = app.add_subcommand(
        "report", "re-render a stored JSON document in another format");
    std::string rr_in;
    report->add_option("--in", rr_in, "JSON document, or - for stdin")->required();
    report->add_option("--format", format_text, "text|json|csv|svg");
    report->add_option("-o,--output", out_path, "output file (default stdout)");

    auto* cap = app.add_subcommand(
        "cap", "apply a power cap (live) or simulate one on a trace");
    std::string cp_domain = "pkg", cp_limit, cp_window, cp_trace;
    cap->add_option("--domain", cp_domain, "energy domain (default pkg)");
    cap->add_option("--limit", cp_limit, "average power limit, e.g. 5w")->required();
    cap->add_option("--window", cp_window, "averaging window, e.g. 100ms")->required();
    cap->add_option("--trace", cp_trace, "simulate on this trace instead of live");
    cap->add_option("--powercap-root", root_flag, "powercap sysfs root");
    cap->add_option("-o,--output", out_path, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run '" << (argc > 0 ? argv[0] : "jprof")
                  << " --help' for usage\n";
        return 2;
    }

    try {
        if (app.got_subcommand(replay))
            return cmd_replay(rp_trace, rp_period, rp_thresholds, rp_duration,
                              rp_domains, format_text, out_path);
        if (app.got_subcommand(sample))
            return cmd_sample(sm_duration, sm_period, sm_thresholds, sm_domains,
                              root_flag, format_text, out_path);
        if (app.got_subcommand(span_run))
            return cmd_span_run(sr_name, sr_command, root_flag, format_text, out_path);
        if (app.got_subcommand(sweep))
            return cmd_sweep(sw_config, root_flag, sw_no_counters, sw_pdu_url,
                             sw_pdu_interval, sw_external, sw_external_offset,
                             format_text, out_path);
        if (app.got_subcommand(meter)) {
            if (meter->got_subcommand(ingest))
                return cmd_meter_ingest(mi_csv, mi_from, mi_to, mi_idle_from,
                                        mi_idle_to, mi_allow_gaps, format_text,
                                        out_path);
            return cmd_meter_poll(mp_url, mp_interval, mp_duration, mp_token, out_path);
        }
        if (app.got_subcommand(report))
            return cmd_report(rr_in, format_text, out_path);
        if (app.got_subcommand(cap))
            return cmd_cap(cp_domain, cp_limit, cp_window, cp_trace, root_flag,
                           out_path);
    } catch (const std::exception& e) {
        std::cerr << "jprof: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace jprof
