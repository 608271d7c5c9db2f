#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>
#include <string>
#include <vector>

#include "jprof/errors.hpp"
#include "jprof/harness.hpp"
#include "jprof/source.hpp"
#include "jprof/trace.hpp"

using namespace jprof;

namespace {

const EnergyDomain kPkg{DomainKind::Package, 0};
const EnergyDomain kDram{DomainKind::Dram, 0};

WorkloadSpec quick_spec(const std::string& command, std::vector<int> threads) {
    WorkloadSpec spec;
    spec.command = command;
    spec.thread_counts = std::move(threads);
    spec.cooldown_us = 0;
    return spec;
}

RunResult fixed_run(int threads, std::uint64_t events, std::uint64_t wall_us,
                    std::uint64_t pkg_uj) {
    RunResult r;
    r.threads = threads;
    r.repetition = 1;
    r.events = events;
    r.wall_time_us = wall_us;
    r.energy_uj[kPkg] = pkg_uj;
    r.success = true;
    return r;
}

}  // namespace

TEST_CASE("sweep configs parse keys, comments and metadata") {
    std::istringstream in(
        "# efficiency ladder\n"
        "command = ./bench --threads {threads}\n"
        "threads = 1, 2,4,8\n"
        "events = 100000\n"
        "repetitions = 3\n"
        "cooldown = 2s\n"
        "meta.cores = 8\n"
        "meta.host = node17\n");
    WorkloadSpec spec = parse_sweep_config(in);
    CHECK(spec.command == "./bench --threads {threads}");
    CHECK(spec.thread_counts == std::vector<int>{1, 2, 4, 8});
    CHECK(spec.events_per_run == 100000);
    CHECK(spec.repetitions == 3);
    CHECK(spec.cooldown_us == 2'000'000);
    CHECK(spec.machine_meta.at("cores") == "8");
    CHECK(spec.machine_meta.at("host") == "node17");
    CHECK(cores_from_meta(spec.machine_meta) == 8);
}

TEST_CASE("sweep config errors point at the offending line") {
    SUBCASE("no key-value shape") {
        std::istringstream in("command = x\nthreads = 1\nwhat is this\n");
        try {
            parse_sweep_config(in);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line_number == 3);
        }
    }
    SUBCASE("unknown key") {
        std::istringstream in("command = x\nthreads = 1\ncolor = red\n");
        CHECK_THROWS_AS(parse_sweep_config(in), ParseError);
    }
    SUBCASE("non-positive thread count") {
        std::istringstream in("command = x\nthreads = 1,0\n");
        CHECK_THROWS_AS(parse_sweep_config(in), ParseError);
    }
    SUBCASE("missing command") {
        std::istringstream in("threads = 1\n");
        CHECK_THROWS_AS(parse_sweep_config(in), InvalidArgument);
    }
    SUBCASE("missing threads") {
        std::istringstream in("command = x\n");
        CHECK_THROWS_AS(parse_sweep_config(in), InvalidArgument);
    }
}

TEST_CASE("core counts come from the metadata") {
    CHECK_THROWS_AS(cores_from_meta({}), InvalidArgument);
    CHECK_THROWS_AS(cores_from_meta({{"cores", "eight"}}), InvalidArgument);
    CHECK_THROWS_AS(cores_from_meta({{"cores", "8x"}}), InvalidArgument);
    CHECK_THROWS_AS(cores_from_meta({{"cores", "-2"}}), InvalidArgument);
    CHECK(cores_from_meta({{"cores", "64"}}) == 64);
}

TEST_CASE("a sweep runs every thread count and repetition in order") {
    WorkloadSpec spec = quick_spec("echo 'events: {threads}00'", {1, 2});
    spec.repetitions = 2;
    std::vector<RunResult> results = run_sweep(spec, nullptr);
    REQUIRE(results.size() == 4);
    CHECK(results[0].threads == 1);
    CHECK(results[0].repetition == 1);
    CHECK(results[1].repetition == 2);
    CHECK(results[2].threads == 2);
    CHECK(results[3].repetition == 2);
    // {threads} was substituted into the echoed event count.
    CHECK(results[0].events == 100);
    CHECK(results[2].events == 200);
    for (const RunResult& r : results) {
        CHECK(r.success);
        CHECK(r.events_from_output);
        CHECK(r.end_us >= r.start_us);
        CHECK(r.energy_uj.empty());
    }
    CHECK(results[1].start_us >= results[0].end_us);
}

TEST_CASE("the configured event count backs up silent workloads") {
    WorkloadSpec spec = quick_spec("true", {1});
    spec.events_per_run = 777;
    std::vector<RunResult> results = run_sweep(spec, nullptr);
    REQUIRE(results.size() == 1);
    CHECK(results[0].events == 777);
    CHECK_FALSE(results[0].events_from_output);
}

TEST_CASE("the last events line wins") {
    WorkloadSpec spec =
        quick_spec("echo 'events: 1'; echo 'noise'; echo 'events: 42'", {1});
    std::vector<RunResult> results = run_sweep(spec, nullptr);
    CHECK(results[0].events == 42);
}

TEST_CASE("failing workloads are recorded, not fatal") {
    WorkloadSpec spec = quick_spec("echo 'events: 5'; exit 3", {1});
    std::ostringstream log;
    SweepOptions options;
    options.log = &log;
    std::vector<RunResult> results = run_sweep(spec, nullptr, options);
    REQUIRE(results.size() == 1);
    CHECK_FALSE(results[0].success);
    CHECK(results[0].exit_status == 3);
    CHECK(results[0].events == 5);
    CHECK(log.str().find("failed with status 3") != std::string::npos);
}

TEST_CASE("a counter source brackets each run with readings") {
    FunctionRegistry reg;
    TraceSegment s;
    s.start_us = 0;
    s.end_us = 1'000'000;
    s.function = reg.intern("w");
    s.power_uw[kPkg] = 1'000'000;
    ExecutionTrace t(reg, {s});
    SyntheticSource src(t);

    WorkloadSpec spec = quick_spec("true", {1});
    std::vector<RunResult> results = run_sweep(spec, &src);
    REQUIRE(results.size() == 1);
    // The synthetic clock stands still, so the bracket sees zero energy,
    // but the domain is present in the result.
    CHECK(results[0].energy_uj.count(kPkg) == 1);
}

TEST_CASE("sweeps validate their inputs") {
    CHECK_THROWS_AS(run_sweep(quick_spec("", {1}), nullptr), InvalidArgument);
    CHECK_THROWS_AS(run_sweep(quick_spec("true", {}), nullptr), InvalidArgument);
    WorkloadSpec bad_rep = quick_spec("true", {1});
    bad_rep.repetitions = 0;
    CHECK_THROWS_AS(run_sweep(bad_rep, nullptr), InvalidArgument);
    WorkloadSpec bad_threads = quick_spec("true", {0});
    CHECK_THROWS_AS(run_sweep(bad_threads, nullptr), InvalidArgument);
}

TEST_CASE("a recorded external series attaches to the runs that it covers") {
    // Constant 50 W over a window wide enough for any monotonic timestamp.
    PowerSeries series;
    series.points = {{0, 50'000'000}, {std::uint64_t(1) << 62, 50'000'000}};
    SweepOptions options;
    options.external = &series;
    WorkloadSpec spec = quick_spec("true", {1});
    std::vector<RunResult> results = run_sweep(spec, nullptr, options);
    REQUIRE(results.size() == 1);
    REQUIRE(results[0].external_joules.has_value());
    double expect = 50.0 * static_cast<double>(results[0].wall_time_us) / 1e6;
    CHECK(*results[0].external_joules == doctest::Approx(expect).epsilon(1e-9));

    // An offset that maps the run past the series coverage logs a miss.
    SweepOptions far;
    far.external = &series;
    far.external_offset_us = static_cast<std::int64_t>(1) << 62;
    std::ostringstream log;
    far.log = &log;
    std::vector<RunResult> missed = run_sweep(spec, nullptr, far);
    CHECK_FALSE(missed[0].external_joules.has_value());
    CHECK(log.str().find("does not cover") != std::string::npos);
}

TEST_CASE("metrics follow from events, time, cores and energy") {
    RunResult r = fixed_run(4, 1000, 100'000'000, 5'000'000'000);
    r.energy_uj[kDram] = 1'000'000'000;
    EfficiencyMetrics m = compute_metrics(r, 4);
    CHECK(m.events_per_second == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(m.events_per_second_per_core == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(m.wall_time_s == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(m.joules.at(kPkg) == doctest::Approx(5000.0).epsilon(1e-12));
    CHECK(m.joules_per_event.at(kPkg) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(m.events_per_joule.at(kPkg) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(m.joules_per_event.at(kDram) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(m.overcommitted);
    CHECK_FALSE(m.zero_events);

    SUBCASE("overcommit is flagged against the core count") {
        CHECK(compute_metrics(r, 2).overcommitted);
    }
    SUBCASE("zero events null out the per-event ratios") {
        RunResult idle = fixed_run(1, 0, 1'000'000, 2'000'000);
        EfficiencyMetrics im = compute_metrics(idle, 4);
        CHECK(im.zero_events);
        CHECK(im.joules_per_event.empty());
        CHECK(im.events_per_second == 0.0);
    }
    SUBCASE("external energy carries into the metrics") {
        RunResult ext = fixed_run(1, 1000, 1'000'000, 0);
        ext.external_joules = 2000.0;
        EfficiencyMetrics em = compute_metrics(ext, 4);
        CHECK(em.external_joules_per_event.value() ==
              doctest::Approx(2.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(compute_metrics(r, 0), InvalidArgument);
}

TEST_CASE("median metrics aggregate field-wise") {
    std::vector<EfficiencyMetrics> samples = {
        compute_metrics(fixed_run(2, 100, 10'000'000, 30'000'000), 4),
        compute_metrics(fixed_run(2, 300, 10'000'000, 10'000'000), 4),
        compute_metrics(fixed_run(2, 200, 10'000'000, 20'000'000), 4),
    };
    EfficiencyMetrics med = median_metrics(samples);
    CHECK(med.events == 200);
    CHECK(med.joules.at(kPkg) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(med.events_per_second == doctest::Approx(20.0).epsilon(1e-12));

    SUBCASE("even sample counts average the middle pair") {
        samples.pop_back();
        EfficiencyMetrics two = median_metrics(samples);
        CHECK(two.events_per_second == doctest::Approx(20.0).epsilon(1e-12));
        CHECK(two.joules.at(kPkg) == doctest::Approx(20.0).epsilon(1e-12));
    }
    SUBCASE("an external figure missing from one run is dropped") {
        samples[0].external_joules = 5.0;
        EfficiencyMetrics med2 = median_metrics(samples);
        CHECK_FALSE(med2.external_joules.has_value());
    }
    CHECK_THROWS_AS(median_metrics({}), InvalidArgument);
}

TEST_CASE("comparing sweeps lines up thread counts and reports ratios") {
    SweepSide a{"baseline",
                {fixed_run(1, 1000, 100'000'000, 5'000'000'000),
                 fixed_run(2, 2000, 100'000'000, 5'000'000'000),
                 fixed_run(8, 100, 1'000'000, 1'000'000)},
                {{"cores", "8"}}};
    SweepSide b{"tuned",
                {fixed_run(1, 1800, 100'000'000, 4'500'000'000),
                 fixed_run(2, 3600, 100'000'000, 4'500'000'000),
                 fixed_run(4, 10, 1'000'000, 1'000'000)},
                {{"cores", "8"}}};

    ComparisonTable table = compare_runs(a, b);
    CHECK(table.label_a == "baseline");
    CHECK(table.label_b == "tuned");
    // Only thread counts both sides ran: 1 and 2.
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].threads == 1);
    CHECK(table.rows[1].threads == 2);
    CHECK(table.rows[0].ratios.at("events_per_second") ==
          doctest::Approx(1.8).epsilon(1e-9));
    // 5 J/event vs 2.5 J/event.
    CHECK(table.rows[0].ratios.at("joules_per_event.pkg") ==
          doctest::Approx(0.5).epsilon(1e-9));
    CHECK(table.rows[0].ratios.at("events_per_joule.pkg") ==
          doctest::Approx(2.0).epsilon(1e-9));
}
